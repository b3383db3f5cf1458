#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drokit/errors.hpp"

namespace drokit {

/// One observation xi drawn from the data distribution.
struct Sample {
  Eigen::VectorXd features;
  double target = 0.0;
  double weight = 1.0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::string name;

  std::size_t size() const { return samples.size(); }
  int feature_dim() const {
    return samples.empty() ? 0 : static_cast<int>(samples.front().features.size());
  }
};

/// A parametric sample loss l(x; xi) with its gradient and the declared
/// constants the convergence theory consumes. value/grad are pure functions
/// and safe for concurrent calls.
struct LossModel {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&, const Sample&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Sample&)> grad;

  double lipschitz_G = 0.0;
  double smooth_L = 0.0;
  std::optional<double> bound_B;        // nullopt: unbounded
  std::optional<double> noise_sigma2;   // nullopt: unknown
  /// When set, the Lipschitz constant is certified only on |x|_inf <= radius
  /// and optimizers reject iterates outside it.
  std::optional<double> x_box_radius;
  std::string name;
};

/// Scalar loss x^2 (1 + xi/(x^2+1))^2 with Rademacher xi in {-1,+1} read from
/// the sample target. Globally 8-smooth with loss variance at most 4; the
/// Lipschitz constant is certified by grid maximization over |x| <= box_radius.
LossModel counterexample_loss(double box_radius = 10.0);

/// Multinomial cross-entropy over linear logits. x flattens the
/// (num_classes x feature_dim) weight matrix row-major, followed by the bias
/// vector. feature_norm_bound is R with sqrt(|f|^2 + 1) <= R over the data
/// (bias input included); G = sqrt(2) R, L = R^2 / 2.
LossModel logistic_loss(int num_classes, int feature_dim,
                        double feature_norm_bound = 2.0);

/// logistic_loss with the feature-norm bound measured from the dataset.
LossModel logistic_loss_for(int num_classes, const Dataset& data);

/// max over samples of sqrt(|features|^2 + 1) (the logistic bias input).
double feature_norm_bound(const Dataset& data);

/// Bounded regression loss B * tanh((y - w.f)^2 / B). No bias term; dim equals
/// feature_dim. G and L are certified from a residual grid scaled by
/// feature_norm_bound (max |f| over the intended data).
LossModel clipped_quadratic_loss(int feature_dim, double clip_B,
                                 double feature_norm_bound = 1.0);

/// Loss that returns the sample target and ignores x (gradient zero). Useful
/// for experiments over a fixed discrete loss distribution.
LossModel fixed_sample_loss(int dim = 1, double bound_B = 0.0);

/// Class-frequency ratios used by default in synth_imbalanced.
const std::vector<double>& default_imbalance_ratios();

/// Gaussian class blobs with class i receiving round(ratios[i] * base_n)
/// samples; targets are class indices. Deterministic given the seed.
Dataset synth_imbalanced(std::uint64_t seed, const std::vector<double>& ratios,
                         int base_n, int feature_dim);
Dataset synth_imbalanced(std::uint64_t seed, int base_n, int feature_dim);

/// Two-sample dataset carrying targets -1 and +1 with equal weight (the exact
/// Rademacher distribution used by the scalar counterexample loss).
Dataset rademacher_dataset();

/// CSV round trip. Format: header line "# dim=<d>", then one row per sample
/// "f1,...,fd,target,weight" with \n line endings and no quoting.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& data, const std::string& path);

/// Empirical variance proxy: max over random probe points x of the sample
/// variance of l(x, .), times a 2x safety factor.
double estimate_noise_sigma2(const LossModel& loss, const Dataset& data,
                             int n_probes, std::uint64_t seed);

}  // namespace drokit
