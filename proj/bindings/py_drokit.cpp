#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "drokit/experiment.hpp"
#include "drokit/verify.hpp"

namespace py = pybind11;
using namespace drokit;

namespace {

py::object ext_to_py(const ExtReal& v) {
  if (v.is_infinite()) {
    return py::cast(std::numeric_limits<double>::infinity());
  }
  return py::cast(v.value());
}

}  // namespace

PYBIND11_MODULE(_drokit, m) {
  m.doc() = "Penalized DRO toolkit: divergence conjugates, the joint dual "
            "objective, and the optimizers that train it";

  py::register_exception<NotTwiceDifferentiable>(m, "NotTwiceDifferentiable");
  py::register_exception<NotAbsolutelyContinuous>(m, "NotAbsolutelyContinuous");
  py::register_exception<BracketFailure>(m, "BracketFailure");
  py::register_exception<UnboundedLoss>(m, "UnboundedLoss");
  py::register_exception<MissingConstant>(m, "MissingConstant");

  py::class_<DivergenceSpec>(m, "DivergenceSpec")
      .def_static("chi2", &DivergenceSpec::chi2)
      .def_static("kl", &DivergenceSpec::kl)
      .def_static("cvar", &DivergenceSpec::cvar, py::arg("alpha"))
      .def_static("smoothed_cvar", &DivergenceSpec::smoothed_cvar, py::arg("alpha"))
      .def_static("kl_reg_cvar", &DivergenceSpec::kl_reg_cvar, py::arg("alpha"))
      .def_static("cressie_read", &DivergenceSpec::cressie_read, py::arg("k"))
      .def("conj_value", &DivergenceSpec::conj_value, py::arg("t"))
      .def("conj_grad", &DivergenceSpec::conj_grad, py::arg("t"))
      .def("conj_second", &DivergenceSpec::conj_second, py::arg("t"))
      .def("crossing_point", &DivergenceSpec::crossing_point)
      .def("divergence_value",
           [](const DivergenceSpec& d, const std::vector<double>& q,
              const std::vector<double>& p) {
             return ext_to_py(d.divergence_value(q, p));
           },
           py::arg("q"), py::arg("p"),
           "sum_i p_i psi(q_i/p_i); returns float('inf') outside dom psi")
      .def_property_readonly("smoothness_M",
                             [](const DivergenceSpec& d) { return d.smoothness_M(); })
      .def_property_readonly("conj_lipschitz",
                             [](const DivergenceSpec& d) { return d.conj_lipschitz(); })
      .def_property_readonly("crossing_C", &DivergenceSpec::crossing_C)
      .def_property_readonly("name", &DivergenceSpec::name)
      .def("__repr__", [](const DivergenceSpec& d) {
        return "<DivergenceSpec " + d.name() + ">";
      });

  py::class_<Sample>(m, "Sample")
      .def(py::init([](Eigen::VectorXd features, double target, double weight) {
             Sample s;
             s.features = std::move(features);
             s.target = target;
             s.weight = weight;
             return s;
           }),
           py::arg("features"), py::arg("target"), py::arg("weight") = 1.0)
      .def_readwrite("features", &Sample::features)
      .def_readwrite("target", &Sample::target)
      .def_readwrite("weight", &Sample::weight);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      // samples converts to/from a python list by value; use add() to build
      // a dataset incrementally.
      .def_readwrite("samples", &Dataset::samples)
      .def_readwrite("name", &Dataset::name)
      .def("add", [](Dataset& d, const Sample& s) { d.samples.push_back(s); },
           py::arg("sample"))
      .def("__len__", &Dataset::size)
      .def_property_readonly("feature_dim", &Dataset::feature_dim);

  py::class_<LossModel>(m, "LossModel")
      .def_readonly("dim", &LossModel::dim)
      .def_readonly("lipschitz_G", &LossModel::lipschitz_G)
      .def_readonly("smooth_L", &LossModel::smooth_L)
      .def_readonly("bound_B", &LossModel::bound_B)
      .def_readonly("noise_sigma2", &LossModel::noise_sigma2)
      .def_readonly("name", &LossModel::name)
      .def("value",
           [](const LossModel& l, const Eigen::VectorXd& x, const Sample& s) {
             return l.value(x, s);
           })
      .def("grad", [](const LossModel& l, const Eigen::VectorXd& x,
                      const Sample& s) { return l.grad(x, s); });

  m.def("counterexample_loss", &counterexample_loss, py::arg("box_radius") = 10.0);
  m.def("logistic_loss", &logistic_loss, py::arg("num_classes"),
        py::arg("feature_dim"), py::arg("feature_norm_bound") = 2.0);
  m.def("logistic_loss_for", &logistic_loss_for, py::arg("num_classes"),
        py::arg("data"));
  m.def("clipped_quadratic_loss", &clipped_quadratic_loss, py::arg("feature_dim"),
        py::arg("clip_B"), py::arg("feature_norm_bound") = 1.0);
  m.def("fixed_sample_loss", &fixed_sample_loss, py::arg("dim") = 1,
        py::arg("bound_B") = 0.0);
  m.def("default_imbalance_ratios", &default_imbalance_ratios);
  m.def("synth_imbalanced",
        py::overload_cast<std::uint64_t, const std::vector<double>&, int, int>(
            &synth_imbalanced),
        py::arg("seed"), py::arg("ratios"), py::arg("base_n"), py::arg("feature_dim"));
  m.def("synth_imbalanced",
        py::overload_cast<std::uint64_t, int, int>(&synth_imbalanced),
        py::arg("seed"), py::arg("base_n"), py::arg("feature_dim"));
  m.def("rademacher_dataset", &rademacher_dataset);
  m.def("load_csv", &load_csv, py::arg("path"));
  m.def("save_csv", &save_csv, py::arg("data"), py::arg("path"));

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("next_unit", &Rng::next_unit)
      .def("next_normal", &Rng::next_normal)
      .def_property_readonly("draw_count", &Rng::draw_count);

  py::class_<DroProblem>(m, "DroProblem")
      .def_static("make",
                  py::overload_cast<LossModel, DivergenceSpec, double>(
                      &DroProblem::make),
                  py::arg("loss"), py::arg("divergence"), py::arg("lambda_"))
      .def_static("make",
                  py::overload_cast<LossModel, DivergenceSpec, double, double>(
                      &DroProblem::make),
                  py::arg("loss"), py::arg("divergence"), py::arg("lambda_"),
                  py::arg("rescale_G"))
      .def_readonly("loss", &DroProblem::loss)
      .def_readonly("divergence", &DroProblem::divergence)
      .def_readonly("lambda_", &DroProblem::lambda)
      .def_readonly("rescale_G", &DroProblem::rescale_G);

  py::class_<DualPoint>(m, "DualPoint")
      .def(py::init([](Eigen::VectorXd x, double eta) {
             DualPoint w;
             w.x = std::move(x);
             w.eta = eta;
             return w;
           }),
           py::arg("x"), py::arg("eta") = 0.0)
      .def_readwrite("x", &DualPoint::x)
      .def_readwrite("eta", &DualPoint::eta)
      .def("joint", &DualPoint::joint);

  py::class_<GradientEstimate>(m, "GradientEstimate")
      .def_readonly("grad_x", &GradientEstimate::grad_x)
      .def_readonly("grad_eta", &GradientEstimate::grad_eta)
      .def_readonly("batch_size", &GradientEstimate::batch_size)
      .def("joint", &GradientEstimate::joint)
      .def("norm", &GradientEstimate::norm);

  py::class_<TheoremConstants>(m, "TheoremConstants")
      .def_readwrite("K0", &TheoremConstants::K0)
      .def_readwrite("K1", &TheoremConstants::K1)
      .def_readwrite("Gamma2", &TheoremConstants::Gamma2)
      .def_readwrite("Lambda2", &TheoremConstants::Lambda2)
      .def_readwrite("Delta", &TheoremConstants::Delta)
      .def_readwrite("delta_is_estimate", &TheoremConstants::delta_is_estimate);

  py::class_<StationarityReport>(m, "StationarityReport")
      .def_readonly("eps", &StationarityReport::eps)
      .def_readonly("joint_norm", &StationarityReport::joint_norm)
      .def_readonly("certified", &StationarityReport::certified)
      .def_readonly("sum_form", &StationarityReport::sum_form)
      .def_readonly("sum_certified", &StationarityReport::sum_certified);

  m.def("objective_sample", &objective_sample);
  m.def("objective_full", &objective_full);
  m.def("full_gradient", &full_gradient);
  m.def("stochastic_gradient", &stochastic_gradient, py::arg("p"), py::arg("w"),
        py::arg("data"), py::arg("batch_size"), py::arg("rng"),
        py::arg("use_all") = false);
  m.def("solve_eta", &solve_eta, py::arg("p"), py::arg("x"), py::arg("data"),
        py::arg("tol") = 0.0);
  m.def("evaluate_psi", &evaluate_psi, py::arg("p"), py::arg("x"), py::arg("data"),
        py::arg("tol") = 0.0);
  m.def("stationarity_transfer", &stationarity_transfer, py::arg("grad"),
        py::arg("eps"), py::arg("rescale_G"));
  m.def("dro_constants", &dro_constants, py::arg("p"), py::arg("gamma2") = 8.0);
  m.def("estimate_delta", &estimate_delta);

  py::enum_<OptMethod>(m, "OptMethod")
      .value("NormalizedMomentum", OptMethod::NormalizedMomentum)
      .value("SGD", OptMethod::SGD)
      .value("RSPG", OptMethod::RSPG);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("method", &OptimizerConfig::method)
      .def_readwrite("step_gamma", &OptimizerConfig::step_gamma)
      .def_readwrite("momentum_beta", &OptimizerConfig::momentum_beta)
      .def_readwrite("batch_S", &OptimizerConfig::batch_S)
      .def_readwrite("iters_T", &OptimizerConfig::iters_T)
      .def_readwrite("target_eps", &OptimizerConfig::target_eps)
      .def_readwrite("seed", &OptimizerConfig::seed)
      .def_readwrite("eta_box", &OptimizerConfig::eta_box)
      .def_readwrite("record_full_every", &OptimizerConfig::record_full_every)
      .def_readwrite("record_vectors", &OptimizerConfig::record_vectors)
      .def_readwrite("use_all_batch", &OptimizerConfig::use_all_batch);

  py::class_<TraceRecord>(m, "TraceRecord")
      .def_readonly("iter", &TraceRecord::iter)
      .def_readonly("objective", &TraceRecord::objective)
      .def_readonly("grad_norm", &TraceRecord::grad_norm)
      .def_readonly("mom_norm", &TraceRecord::mom_norm)
      .def_readonly("step", &TraceRecord::step)
      .def_readonly("eta", &TraceRecord::eta);

  py::class_<TraceSummary>(m, "TraceSummary")
      .def_readonly("best_grad_norm", &TraceSummary::best_grad_norm)
      .def_readonly("gradient_evaluations", &TraceSummary::gradient_evaluations)
      .def_readonly("wall_time_s", &TraceSummary::wall_time_s)
      .def_readonly("skipped_steps", &TraceSummary::skipped_steps);

  py::class_<TrainingTrace>(m, "TrainingTrace")
      .def_readonly("records", &TrainingTrace::records)
      .def_readonly("summary", &TrainingTrace::summary)
      .def("csv", &TrainingTrace::csv_string)
      .def("summary_text", &TrainingTrace::summary_text);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("w", &RunResult::w)
      .def_readonly("trace", &RunResult::trace);

  m.def("run_normalized_momentum",
        [](const DroProblem& p, const Dataset& d, const DualPoint& w0,
           const OptimizerConfig& cfg) {
          return run_normalized_momentum(p, d, w0, cfg);
        },
        py::arg("p"), py::arg("data"), py::arg("w0"), py::arg("cfg"));
  m.def("run_sgd",
        [](const DroProblem& p, const Dataset& d, const DualPoint& w0,
           const OptimizerConfig& cfg) { return run_sgd(p, d, w0, cfg); },
        py::arg("p"), py::arg("data"), py::arg("w0"), py::arg("cfg"));
  m.def("run_rspg",
        [](const DroProblem& p, const Dataset& d, const DualPoint& w0,
           const OptimizerConfig& cfg) { return run_rspg(p, d, w0, cfg); },
        py::arg("p"), py::arg("data"), py::arg("w0"), py::arg("cfg"));

  py::class_<EtaInterval>(m, "EtaInterval")
      .def_readonly("U", &EtaInterval::U)
      .def_readonly("V", &EtaInterval::V)
      .def_readonly("U_wide", &EtaInterval::U_wide)
      .def_readonly("V_wide", &EtaInterval::V_wide);
  m.def("eta_interval", &eta_interval, py::arg("p"), py::arg("eps"));

  m.def("theorem_hyperparams",
        [](const TheoremConstants& c, double eps) {
          std::string warning;
          OptimizerConfig cfg = theorem_hyperparams(c, eps, &warning);
          return py::make_tuple(cfg, warning);
        },
        py::arg("constants"), py::arg("eps"),
        "Returns (config, warning); warning is empty when eps is in range");

  py::class_<CheckReport>(m, "CheckReport")
      .def_readonly("check_name", &CheckReport::check_name)
      .def_readonly("instances_tested", &CheckReport::instances_tested)
      .def_readonly("worst_violation", &CheckReport::worst_violation)
      .def_readonly("tolerance", &CheckReport::tolerance)
      .def_readonly("witness", &CheckReport::witness)
      .def_readonly("passed", &CheckReport::passed)
      .def("text", &CheckReport::text);

  m.def("conj_oracle", &conj_oracle);
  m.def("cvar_psi_reference", &cvar_psi_reference);
  m.def("verification_suite_names", &verification_suite_names);
  m.def("run_verification_suite", &run_verification_suite, py::arg("name"));
  m.def("run_all_verifications", &run_all_verifications);
}
