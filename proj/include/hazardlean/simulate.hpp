#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "hazardlean/grid.hpp"

namespace hazardlean {

enum class HistKernel { Zero, Constant, Gaussian, Sine };

inline double kernel_value(HistKernel k, double s, double t) {
  switch (k) {
    case HistKernel::Zero: return 0.0;
    case HistKernel::Constant: return 1.0;
    case HistKernel::Gaussian: return std::exp(-2.0 * (t - s) * (t - s));
    case HistKernel::Sine: return std::sin(4.0 * t - 20.0 * s);
  }
  return 0.0;
}

inline std::string kernel_name(HistKernel k) {
  switch (k) {
    case HistKernel::Zero: return "zero";
    case HistKernel::Constant: return "constant";
    case HistKernel::Gaussian: return "gaussian";
    case HistKernel::Sine: return "sine";
  }
  return "?";
}

inline HistKernel parse_kernel(const std::string& s) {
  if (s == "zero") return HistKernel::Zero;
  if (s == "constant") return HistKernel::Constant;
  if (s == "gaussian") return HistKernel::Gaussian;
  if (s == "sine") return HistKernel::Sine;
  throw ConfigError("unknown kernel '" + s + "' (zero, constant, gaussian, sine)");
}

/** Lower-triangular weights dt*rho(t_j, t_i), j < i, for one kernel on one grid. */
class KernelWeights {
 public:
  KernelWeights(HistKernel k, const TimeGrid& grid) : kernel_(k), q_(grid.size()) {
    if (k == HistKernel::Gaussian || k == HistKernel::Sine) {
      w_.assign(q_ * q_, 0.0);
      for (std::size_t i = 0; i < q_; ++i)
        for (std::size_t j = 0; j < i; ++j)
          w_[i * q_ + j] = grid.step() * kernel_value(k, grid[j], grid[i]);
    }
    step_ = grid.step();
  }

  HistKernel kernel() const { return kernel_; }
  std::size_t q() const { return q_; }
  double weight(std::size_t i, std::size_t j) const {
    if (j >= i) return 0.0;
    switch (kernel_) {
      case HistKernel::Zero: return 0.0;
      case HistKernel::Constant: return step_;
      default: return w_[i * q_ + j];
    }
  }

  // out[i] = sum_{j<i} weight(i,j) z[j] + noise[i]
  std::vector<double> apply(std::span<const double> z, std::span<const double> noise) const {
    if (z.size() != q_ || noise.size() != q_) throw DimensionError("historical_linear: length != q");
    std::vector<double> out(noise.begin(), noise.end());
    if (kernel_ == HistKernel::Zero) return out;
    if (kernel_ == HistKernel::Constant) {
      double acc = 0.0;
      for (std::size_t i = 0; i < q_; ++i) {
        out[i] += step_ * acc;
        acc += z[i];
      }
      return out;
    }
    for (std::size_t i = 1; i < q_; ++i) {
      const double* row = &w_[i * q_];
      double acc = 0.0;
      for (std::size_t j = 0; j < i; ++j) acc += row[j] * z[j];
      out[i] += acc;
    }
    return out;
  }

 private:
  HistKernel kernel_;
  std::size_t q_;
  double step_ = 0.0;
  std::vector<double> w_;
};

inline std::vector<double> historical_linear(std::span<const double> z, HistKernel kernel,
                                             std::span<const double> noise, const TimeGrid& grid) {
  return KernelWeights(kernel, grid).apply(z, noise);
}

/** Gaussian random walk on the grid: W_0 = 0, increments N(0, 1/q). */
inline std::vector<double> gaussian_walk(const TimeGrid& grid, Xoshiro256& rng) {
  const std::size_t q = grid.size();
  boost::random::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(q)));
  std::vector<double> w(q, 0.0);
  for (std::size_t i = 1; i < q; ++i) w[i] = w[i - 1] + nd(rng);
  return w;
}

inline std::vector<double> z_process_from(const TimeGrid& grid, double xi1, double xi2, double xi3,
                                          std::span<const double> walk) {
  if (walk.size() != grid.size()) throw DimensionError("walk length != q");
  std::vector<double> z(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    z[i] = xi1 + xi2 * t + std::sin(2.0 * std::numbers::pi * xi3 * t) + walk[i];
  }
  return z;
}

/** Z_t = xi1 + xi2 t + sin(2 pi xi3 t) + W_t with xi ~ N(0, I_3). */
inline std::vector<double> sample_z_process(const TimeGrid& grid, Xoshiro256& rng) {
  boost::random::normal_distribution<double> nd;
  const double xi1 = nd(rng), xi2 = nd(rng), xi3 = nd(rng);
  auto walk = gaussian_walk(grid, rng);
  return z_process_from(grid, xi1, xi2, xi3, walk);
}

struct SurvivalDraw {
  std::size_t event_index;
  bool delta;
};

inline void check_cumhaz(std::span<const double> cumhaz) {
  if (cumhaz.empty()) throw DimensionError("empty cumulative hazard");
  if (cumhaz[0] != 0.0) throw DomainError("cumulative hazard must start at 0");
  for (std::size_t i = 1; i < cumhaz.size(); ++i)
    if (cumhaz[i] < cumhaz[i - 1]) throw DomainError("cumulative hazard decreases at index " + std::to_string(i));
}

// T = max{t_i : Lambda_i < E}; censored at the last point if Lambda never reaches E
inline SurvivalDraw inverse_hazard_crossing(std::span<const double> cumhaz, double e) {
  const std::size_t q = cumhaz.size();
  for (std::size_t i = 1; i < q; ++i)
    if (cumhaz[i] >= e) return {i - 1, true};
  return {q - 1, false};
}

inline SurvivalDraw sample_survival_inverse_hazard(std::span<const double> cumhaz, Xoshiro256& rng) {
  check_cumhaz(cumhaz);
  boost::random::exponential_distribution<double> ex(1.0);
  return inverse_hazard_crossing(cumhaz, ex(rng));
}

// ---------------------------------------------------------------------------
// Cox model with historical functional-linear covariates

struct CoxSimConfig {
  std::size_t n = 500;
  std::size_t d = 1;
  std::size_t q = 128;
  HistKernel kernel_x = HistKernel::Constant;
  HistKernel kernel_y = HistKernel::Constant;
  double beta2 = -1.0;
  double rho0 = 0.0;
  double beta1 = 0.0;         // <= 0 means: calibrate on a pilot
  bool strict_beta1 = false;  // true: a short dataset is an error instead of doubling again
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;

  void validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (d != 1) throw ConfigError("the Cox engine has a single covariate process (d = 1)");
    if (q < 2) throw ConfigError("q must be >= 2");
    if (rho0 < 0.0) throw ConfigError("rho0 must be >= 0");
    if (!std::isfinite(beta2)) throw ConfigError("beta2 must be finite");
  }

  nlohmann::json to_json() const {
    return {{"engine", "cox"},
            {"n", n},
            {"d", d},
            {"q", q},
            {"kernel_x", kernel_name(kernel_x)},
            {"kernel_y", kernel_name(kernel_y)},
            {"beta2", beta2},
            {"rho0", rho0},
            {"beta1", beta1},
            {"strict_beta1", strict_beta1},
            {"seed", seed},
            {"replicate", replicate}};
  }

  static CoxSimConfig from_json(const nlohmann::json& j) {
    CoxSimConfig c;
    c.n = j.value("n", c.n);
    c.d = j.value("d", c.d);
    c.q = j.value("q", c.q);
    c.kernel_x = parse_kernel(j.value("kernel_x", std::string("constant")));
    c.kernel_y = parse_kernel(j.value("kernel_y", std::string("constant")));
    c.beta2 = j.value("beta2", c.beta2);
    c.rho0 = j.value("rho0", c.rho0);
    c.beta1 = j.value("beta1", c.beta1);
    c.strict_beta1 = j.value("strict_beta1", c.strict_beta1);
    c.seed = j.value("seed", c.seed);
    c.replicate = j.value("replicate", c.replicate);
    return c;
  }
};

/** Everything drawn for one Cox subject, including the latent process. */
struct CoxSubjectDraw {
  std::vector<double> z, x, latent;
  std::vector<double> hazard, cumhaz;
  double e = 0.0;
  SurvivalDraw outcome{0, false};
};

struct CoxKernels {
  KernelWeights kx, ky;
  CoxKernels(const CoxSimConfig& c, const TimeGrid& g) : kx(c.kernel_x, g), ky(c.kernel_y, g) {}
};

// Draws do not depend on beta1, so the same stream with a larger beta1 gives
// the same subject with an earlier event.
inline CoxSubjectDraw draw_cox_subject(const CoxSimConfig& c, const TimeGrid& grid,
                                       const CoxKernels& kern, double beta1, Xoshiro256& rng) {
  CoxSubjectDraw s;
  s.z = sample_z_process(grid, rng);
  auto v = gaussian_walk(grid, rng);
  auto w = gaussian_walk(grid, rng);
  boost::random::exponential_distribution<double> ex(1.0);
  s.e = ex(rng);
  s.x = kern.kx.apply(s.z, v);
  s.latent = kern.ky.apply(s.z, w);
  const std::size_t q = grid.size();
  const double alt = c.rho0 / std::sqrt(static_cast<double>(c.n));
  s.hazard.resize(q);
  s.cumhaz.assign(q, 0.0);
  for (std::size_t i = 0; i < q; ++i) {
    const double t = grid[i];
    s.hazard[i] = beta1 * t * t * std::exp(c.beta2 * s.z[i] + s.latent[i] + alt * s.x[i]);
    if (i > 0) s.cumhaz[i] = s.cumhaz[i - 1] + s.hazard[i] * grid.step();
  }
  s.outcome = inverse_hazard_crossing(s.cumhaz, s.e);
  return s;
}

inline SubjectPath to_subject_path(const CoxSubjectDraw& s) {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(s.z.size()), 1);
  for (std::size_t i = 0; i < s.z.size(); ++i) z(static_cast<Eigen::Index>(i), 0) = s.z[i];
  return SubjectPath(std::move(z), s.x, s.outcome.event_index, s.outcome.delta);
}

inline std::size_t required_events(std::size_t n, std::size_t q) {
  // ceil((q-1)/q * n)
  return (n * (q - 1) + q - 1) / q;
}

/** Smallest power of two (from 1) giving the required event fraction on a 1000-subject pilot. */
inline double calibrate_beta1(const CoxSimConfig& c, std::size_t pilot = 1000) {
  c.validate();
  const TimeGrid grid(c.q);
  const CoxKernels kern(c, grid);
  std::vector<double> need(pilot);  // beta1 factor needed for an event before 1, per subject
  for (std::size_t j = 0; j < pilot; ++j) {
    auto rng = make_stream(c.seed, StreamTag::Calibration, 0, j);
    auto s = draw_cox_subject(c, grid, kern, 1.0, rng);
    need[j] = s.cumhaz.back() > 0 ? s.e / s.cumhaz.back() : INFINITY;
  }
  const std::size_t req = required_events(pilot, c.q);
  double b = 1.0;
  for (int it = 0; it < 200; ++it, b *= 2.0) {
    std::size_t ev = 0;
    for (double v : need) ev += (b >= v) ? 1 : 0;
    if (ev >= req) return b;
  }
  throw CalibrationError("beta1 calibration did not reach the event fraction");
}

inline SurvivalSample simulate_cox_dataset(const CoxSimConfig& config) {
  config.validate();
  const TimeGrid grid(config.q);
  const CoxKernels kern(config, grid);
  const bool calibrated = !(config.beta1 > 0.0);
  const double beta1_start = calibrated ? calibrate_beta1(config) : config.beta1;
  const std::size_t req = required_events(config.n, config.q);

  double beta1 = beta1_start;
  int escalations = 0;
  std::vector<SubjectPath> subjects;
  for (;;) {
    subjects.clear();
    subjects.reserve(config.n);
    std::size_t events = 0;
    for (std::size_t j = 0; j < config.n; ++j) {
      auto rng = make_stream(config.seed, StreamTag::Subject, config.replicate, j);
      auto s = draw_cox_subject(config, grid, kern, beta1, rng);
      events += s.outcome.delta ? 1 : 0;
      subjects.push_back(to_subject_path(s));
    }
    if (events >= req) break;
    if (config.strict_beta1 || escalations >= 60)
      throw CalibrationError("only " + std::to_string(events) + " of " + std::to_string(config.n) +
                             " subjects had an event before t=1 (need " + std::to_string(req) +
                             "); use a larger beta1");
    beta1 *= 2.0;
    ++escalations;
  }
  nlohmann::json meta = {{"engine", "cox"},
                         {"config", config.to_json()},
                         {"beta1_calibrated", beta1_start},
                         {"beta1", beta1},
                         {"beta1_escalations", escalations},
                         {"beta1_source", calibrated ? "pilot" : "given"}};
  return SurvivalSample(grid, std::move(subjects), std::move(meta));
}

// ---------------------------------------------------------------------------
// Time-constant designs for the ACM

enum class AcmSetting { Lin, Par, BinCox };

inline std::string setting_name(AcmSetting s) {
  switch (s) {
    case AcmSetting::Lin: return "lin";
    case AcmSetting::Par: return "par";
    case AcmSetting::BinCox: return "bincox";
  }
  return "?";
}

inline AcmSetting parse_setting(const std::string& s) {
  if (s == "lin" || s == "acm-lin") return AcmSetting::Lin;
  if (s == "par" || s == "acm-par") return AcmSetting::Par;
  if (s == "bincox" || s == "acm-bincox") return AcmSetting::BinCox;
  throw ConfigError("unknown ACM setting '" + s + "' (lin, par, bincox)");
}

inline double phi_bump(double t) { return std::exp(-2.0 * t * t); }

struct AcmSimConfig {
  AcmSetting setting = AcmSetting::Lin;
  std::size_t n = 200;
  std::size_t d = 4;
  std::size_t q = 128;
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;
  // binary exposure design: X ~ Bern(expit(alpha Z1)), hazard 2t exp(beta_x X + beta_z Z1)
  double beta_x = 1.0;
  double beta_z = 0.5;
  double alpha = 1.0;

  void validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (q < 2) throw ConfigError("q must be >= 2");
    if (d < 1) throw ConfigError("d must be >= 1");
    if (setting == AcmSetting::Lin && d < 4)
      throw ConfigError("the additive design needs d >= 4 (four Dirichlet weights)");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"engine", "acm-" + setting_name(setting)},
                        {"setting", setting_name(setting)},
                        {"n", n},
                        {"d", d},
                        {"q", q},
                        {"seed", seed},
                        {"replicate", replicate}};
    if (setting == AcmSetting::BinCox) {
      j["beta_x"] = beta_x;
      j["beta_z"] = beta_z;
      j["alpha"] = alpha;
    }
    return j;
  }

  static AcmSimConfig from_json(const nlohmann::json& j) {
    AcmSimConfig c;
    c.setting = parse_setting(j.value("setting", std::string("lin")));
    c.n = j.value("n", c.n);
    c.d = j.value("d", c.d);
    c.q = j.value("q", c.q);
    c.seed = j.value("seed", c.seed);
    c.replicate = j.value("replicate", c.replicate);
    c.beta_x = j.value("beta_x", c.beta_x);
    c.beta_z = j.value("beta_z", c.beta_z);
    c.alpha = j.value("alpha", c.alpha);
    return c;
  }
};

/** Per-dataset coefficient vector f(z) = beta'z of the additive design (zeros elsewhere). */
inline std::vector<double> draw_acm_beta(const AcmSimConfig& c) {
  std::vector<double> beta(c.d, 0.0);
  if (c.setting != AcmSetting::Lin) return beta;
  auto rng = make_stream(c.seed, StreamTag::DatasetParams, c.replicate);
  boost::random::exponential_distribution<double> ex(1.0);
  double g[4], s = 0.0;
  for (double& v : g) s += (v = ex(rng));
  for (int k = 0; k < 4; ++k) beta[static_cast<std::size_t>(k)] = g[k] / s;
  return beta;
}

inline double expit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// f(z): exposure-free part of the additive hazard (Lin/Par)
inline double acm_f(const AcmSimConfig& c, std::span<const double> beta, std::span<const double> z) {
  switch (c.setting) {
    case AcmSetting::Lin: {
      double f = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) f += beta[k] * z[k];
      return f;
    }
    case AcmSetting::Par: return phi_bump(z[0]);
    case AcmSetting::BinCox: return 0.0;
  }
  return 0.0;
}

/** Lambda(t | x, z) = t^2 * acm_rate(x, z) in all three designs. */
inline double acm_rate(const AcmSimConfig& c, std::span<const double> beta, double x,
                       std::span<const double> z) {
  if (c.setting == AcmSetting::BinCox) return std::exp(c.beta_x * x + c.beta_z * z[0]);
  return 1.0 + x + acm_f(c, beta, z);
}

struct AcmSubjectDraw {
  std::vector<double> z;
  double x = 0.0;
  double e = 0.0;
  double t_star = 0.0;
  SurvivalDraw outcome{0, false};
};

inline AcmSubjectDraw draw_acm_subject(const AcmSimConfig& c, std::span<const double> beta,
                                       const TimeGrid& grid, Xoshiro256& rng) {
  AcmSubjectDraw s;
  s.z.resize(c.d);
  boost::random::normal_distribution<double> nd;
  boost::random::exponential_distribution<double> ex(1.0);
  switch (c.setting) {
    case AcmSetting::Lin:
      for (auto& v : s.z) v = rng.uniform();
      s.x = s.z[0] + rng.uniform();
      break;
    case AcmSetting::Par:
      for (auto& v : s.z) v = nd(rng);
      s.x = phi_bump(s.z[0]) + rng.uniform();
      break;
    case AcmSetting::BinCox:
      for (auto& v : s.z) v = nd(rng);
      s.x = rng.uniform() < expit(c.alpha * s.z[0]) ? 1.0 : 0.0;
      break;
  }
  s.e = ex(rng);
  s.t_star = std::sqrt(s.e / acm_rate(c, beta, s.x, s.z));
  // events land on the first grid point at or after T*, so N and Y on the grid are exact
  if (s.t_star <= 1.0)
    s.outcome = {grid.ceil_index(s.t_star), true};
  else
    s.outcome = {grid.size() - 1, false};
  return s;
}

inline SubjectPath to_subject_path(const AcmSubjectDraw& s, std::size_t q) {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(s.z.size()));
  for (std::size_t k = 0; k < s.z.size(); ++k) z.col(static_cast<Eigen::Index>(k)).setConstant(s.z[k]);
  return SubjectPath(std::move(z), std::vector<double>(q, s.x), s.outcome.event_index, s.outcome.delta);
}

inline SurvivalSample simulate_acm_dataset(const AcmSimConfig& config) {
  config.validate();
  const TimeGrid grid(config.q);
  const auto beta = draw_acm_beta(config);
  std::vector<SubjectPath> subjects;
  subjects.reserve(config.n);
  for (std::size_t j = 0; j < config.n; ++j) {
    auto rng = make_stream(config.seed, StreamTag::Subject, config.replicate, j);
    subjects.push_back(to_subject_path(draw_acm_subject(config, beta, grid, rng), config.q));
  }
  nlohmann::json meta = {{"engine", "acm-" + setting_name(config.setting)},
                         {"config", config.to_json()},
                         {"beta", beta}};
  return SurvivalSample(grid, std::move(subjects), std::move(meta));
}

}  // namespace hazardlean
