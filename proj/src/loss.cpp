#include "drokit/loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "drokit/rng.hpp"
#include "drokit/textio.hpp"

namespace drokit {

namespace {

// Grid maximum of |f| over [0, hi] plus a curvature safety margin so the
// result upper-bounds the true supremum: |f| between grid points exceeds the
// grid max by at most deriv_bound * h / 2.
double certified_max(const std::function<double(double)>& f, double hi,
                     double step, double deriv_bound) {
  double best = 0.0;
  for (double r = 0.0; r <= hi; r += step) {
    best = std::max(best, std::abs(f(r)));
  }
  return best + 0.5 * deriv_bound * step;
}

}  // namespace

LossModel counterexample_loss(double box_radius) {
  LossModel m;
  m.dim = 1;
  m.name = "counterexample";
  m.value = [](const Eigen::VectorXd& x, const Sample& s) {
    double xi = s.target;
    double a = 1.0 + xi / (x[0] * x[0] + 1.0);
    return x[0] * x[0] * a * a;
  };
  m.grad = [](const Eigen::VectorXd& x, const Sample& s) {
    double xi = s.target;
    double v = x[0];
    double d = v * v + 1.0;
    double a = 1.0 + xi / d;
    Eigen::VectorXd g(1);
    g[0] = 2.0 * v * a * a - 4.0 * v * v * v * xi * a / (d * d);
    return g;
  };
  m.smooth_L = 8.0;
  m.noise_sigma2 = 4.0;
  m.bound_B = std::nullopt;
  m.x_box_radius = box_radius;
  // |l'(x, xi)| maximized on the working box; |l''| <= 8 supplies the
  // between-grid-point margin.
  double step = 1e-4;
  double best = 0.0;
  for (double xi : {-1.0, 1.0}) {
    Eigen::VectorXd x(1);
    Sample s;
    s.target = xi;
    for (double v = 0.0; v <= box_radius; v += step) {
      x[0] = v;
      best = std::max(best, std::abs(m.grad(x, s)[0]));
    }
  }
  m.lipschitz_G = best + 0.5 * 8.0 * step;
  return m;
}

LossModel logistic_loss(int num_classes, int feature_dim,
                        double feature_norm_bound) {
  if (num_classes < 2 || feature_dim < 1) {
    throw Error("logistic_loss: need num_classes >= 2 and feature_dim >= 1");
  }
  LossModel m;
  m.dim = num_classes * feature_dim + num_classes;
  m.name = "logistic";
  const int C = num_classes;
  const int F = feature_dim;

  auto logits = [C, F](const Eigen::VectorXd& x, const Sample& s) {
    Eigen::VectorXd z(C);
    for (int c = 0; c < C; ++c) {
      z[c] = x.segment(c * F, F).dot(s.features) + x[C * F + c];
    }
    return z;
  };
  m.value = [logits, C](const Eigen::VectorXd& x, const Sample& s) {
    Eigen::VectorXd z = logits(x, s);
    double zmax = z.maxCoeff();
    double lse = zmax + std::log((z.array() - zmax).exp().sum());
    int y = static_cast<int>(s.target);
    if (y < 0 || y >= C) throw Error("logistic_loss: target outside classes");
    return lse - z[y];
  };
  m.grad = [logits, C, F](const Eigen::VectorXd& x, const Sample& s) {
    Eigen::VectorXd z = logits(x, s);
    double zmax = z.maxCoeff();
    Eigen::VectorXd p = (z.array() - zmax).exp();
    p /= p.sum();
    int y = static_cast<int>(s.target);
    if (y < 0 || y >= C) throw Error("logistic_loss: target outside classes");
    p[y] -= 1.0;
    Eigen::VectorXd g(C * F + C);
    for (int c = 0; c < C; ++c) {
      g.segment(c * F, F) = p[c] * s.features;
      g[C * F + c] = p[c];
    }
    return g;
  };
  m.lipschitz_G = std::sqrt(2.0) * feature_norm_bound;
  m.smooth_L = feature_norm_bound * feature_norm_bound / 2.0;
  m.bound_B = std::nullopt;  // log-loss is unbounded above
  m.noise_sigma2 = std::nullopt;
  return m;
}

double feature_norm_bound(const Dataset& data) {
  double best = 1.0;
  for (const Sample& s : data.samples) {
    best = std::max(best, std::sqrt(s.features.squaredNorm() + 1.0));
  }
  return best;
}

LossModel logistic_loss_for(int num_classes, const Dataset& data) {
  return logistic_loss(num_classes, data.feature_dim(), feature_norm_bound(data));
}

LossModel clipped_quadratic_loss(int feature_dim, double clip_B,
                                 double feature_norm_bound) {
  if (!(clip_B > 0.0)) throw Error("clipped_quadratic_loss: clip_B must be positive");
  if (feature_dim < 1) throw Error("clipped_quadratic_loss: feature_dim must be positive");
  LossModel m;
  m.dim = feature_dim;
  m.name = "clipped_quadratic";
  const double B = clip_B;
  m.value = [B](const Eigen::VectorXd& x, const Sample& s) {
    double r = s.target - x.dot(s.features);
    return B * std::tanh(r * r / B);
  };
  m.grad = [B](const Eigen::VectorXd& x, const Sample& s) {
    double r = s.target - x.dot(s.features);
    double th = std::tanh(r * r / B);
    double sech2 = 1.0 - th * th;
    return Eigen::VectorXd(-2.0 * r * sech2 * s.features);
  };
  m.bound_B = clip_B;
  m.noise_sigma2 = std::nullopt;
  // In residual units u = r / sqrt(B): |dv/dyhat| = 2 sqrt(B) u sech^2(u^2)
  // and |d2v/dyhat2| = |2 sech^2(u^2) - 8 u^2 sech^2(u^2) tanh(u^2)|, both
  // with bounded slope; grids over u in [0, 6] certify the maxima.
  auto phi = [](double u) {
    double th = std::tanh(u * u);
    return 2.0 * u * (1.0 - th * th);
  };
  auto omega = [](double u) {
    double th = std::tanh(u * u);
    double sech2 = 1.0 - th * th;
    return 2.0 * sech2 - 8.0 * u * u * sech2 * th;
  };
  double c1 = certified_max(phi, 6.0, 1e-5, 10.0);
  double c2 = certified_max(omega, 6.0, 1e-5, 30.0);
  m.lipschitz_G = std::sqrt(B) * c1 * feature_norm_bound;
  m.smooth_L = c2 * feature_norm_bound * feature_norm_bound;
  return m;
}

LossModel fixed_sample_loss(int dim, double bound_B) {
  LossModel m;
  m.dim = dim;
  m.name = "fixed_sample";
  m.value = [](const Eigen::VectorXd&, const Sample& s) { return s.target; };
  m.grad = [dim](const Eigen::VectorXd&, const Sample&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(dim));
  };
  m.lipschitz_G = 1.0;
  m.smooth_L = 1.0;
  m.bound_B = bound_B > 0.0 ? std::optional<double>(bound_B) : std::nullopt;
  m.noise_sigma2 = std::nullopt;
  return m;
}

const std::vector<double>& default_imbalance_ratios() {
  static const std::vector<double> r = {0.804, 0.543, 0.997, 0.593, 0.390,
                                        0.285, 0.959, 0.806, 0.967, 0.660};
  return r;
}

Dataset synth_imbalanced(std::uint64_t seed, const std::vector<double>& ratios,
                         int base_n, int feature_dim) {
  if (base_n < 1 || feature_dim < 1) {
    throw Error("synth_imbalanced: base_n and feature_dim must be positive");
  }
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw BadRatio("ratio outside (0, 1]: " + std::to_string(r));
    }
  }
  Rng rng(seed);
  Dataset data;
  data.name = "synth_imbalanced";
  const int C = static_cast<int>(ratios.size());
  // Class centers drawn once so blobs are separated but overlapping.
  std::vector<Eigen::VectorXd> centers(C);
  for (int c = 0; c < C; ++c) {
    centers[c].resize(feature_dim);
    for (int j = 0; j < feature_dim; ++j) centers[c][j] = 2.0 * rng.next_normal();
  }
  for (int c = 0; c < C; ++c) {
    auto n_c = static_cast<long long>(std::llround(ratios[c] * base_n));
    for (long long i = 0; i < n_c; ++i) {
      Sample s;
      s.features.resize(feature_dim);
      for (int j = 0; j < feature_dim; ++j) {
        s.features[j] = centers[c][j] + rng.next_normal();
      }
      s.target = static_cast<double>(c);
      s.weight = 1.0;
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

Dataset synth_imbalanced(std::uint64_t seed, int base_n, int feature_dim) {
  return synth_imbalanced(seed, default_imbalance_ratios(), base_n, feature_dim);
}

Dataset rademacher_dataset() {
  Dataset data;
  data.name = "rademacher";
  for (double xi : {-1.0, 1.0}) {
    Sample s;
    s.features.resize(1);
    s.features[0] = xi;
    s.target = xi;
    data.samples.push_back(std::move(s));
  }
  return data;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  int dim = -1;
  if (line.rfind("# dim=", 0) == 0) {
    try {
      dim = std::stoi(line.substr(6));
    } catch (const std::exception&) {
      throw ParseError(path + ": line 1: bad dimension header");
    }
  } else {
    throw ParseError(path + ": line 1: expected '# dim=<d>' header");
  }
  if (dim < 1) throw ParseError(path + ": line 1: dimension must be positive");

  Dataset data;
  data.name = path;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != dim + 2) {
      throw DimensionMismatch(path + ": line " + std::to_string(lineno) +
                              ": expected " + std::to_string(dim + 2) +
                              " fields, got " + std::to_string(fields.size()));
    }
    Sample s;
    s.features.resize(dim);
    auto parse_field = [&](const std::string& f) {
      std::size_t pos = 0;
      double v;
      try {
        v = std::stod(f, &pos);
      } catch (const std::exception&) {
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": non-numeric field '" + f + "'");
      }
      if (pos != f.size()) {
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": non-numeric field '" + f + "'");
      }
      return v;
    };
    for (int j = 0; j < dim; ++j) s.features[j] = parse_field(fields[j]);
    s.target = parse_field(fields[dim]);
    s.weight = parse_field(fields[dim + 1]);
    if (!(s.weight > 0.0)) {
      throw ParseError(path + ": line " + std::to_string(lineno) +
                       ": weight must be positive");
    }
    data.samples.push_back(std::move(s));
  }
  if (data.samples.empty()) throw ParseError(path + ": no samples");
  return data;
}

void save_csv(const Dataset& data, const std::string& path) {
  if (data.samples.empty()) throw Error("save_csv: dataset is empty");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_csv: cannot open " + path);
  int dim = data.feature_dim();
  out << "# dim=" << dim << "\n";
  for (const Sample& s : data.samples) {
    if (static_cast<int>(s.features.size()) != dim) {
      throw DimensionMismatch("save_csv: inconsistent feature dimension");
    }
    for (int j = 0; j < dim; ++j) out << format_double(s.features[j]) << ",";
    out << format_double(s.target) << "," << format_double(s.weight) << "\n";
  }
}

double estimate_noise_sigma2(const LossModel& loss, const Dataset& data,
                             int n_probes, std::uint64_t seed) {
  if (data.samples.empty()) throw Error("estimate_noise_sigma2: empty dataset");
  Rng rng(seed);
  double worst = 0.0;
  double radius = loss.x_box_radius.value_or(3.0);
  for (int k = 0; k < n_probes; ++k) {
    Eigen::VectorXd x(loss.dim);
    for (int j = 0; j < loss.dim; ++j) {
      x[j] = radius * (2.0 * rng.next_unit() - 1.0);
    }
    double mean = 0.0;
    for (const Sample& s : data.samples) mean += loss.value(x, s);
    mean /= static_cast<double>(data.size());
    double var = 0.0;
    for (const Sample& s : data.samples) {
      double d = loss.value(x, s) - mean;
      var += d * d;
    }
    var /= static_cast<double>(data.size());
    worst = std::max(worst, var);
  }
  return 2.0 * worst;  // safety factor
}

}  // namespace drokit
