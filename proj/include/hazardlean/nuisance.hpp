#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hazardlean/boosting.hpp"
#include "hazardlean/grid.hpp"
#include "hazardlean/simulate.hpp"

namespace hazardlean {

/**
 * Predictable projection evaluator. predict() returns the whole path for one
 * subject; entry i may only depend on the subject's entries before i
 * (baseline covariates at index 0 are part of the starting information).
 */
class ProjectionModel {
 public:
  virtual ~ProjectionModel() = default;
  virtual std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const = 0;
  virtual nlohmann::json describe() const = 0;
};

/** Hazard evaluator, same strict-history contract, values >= 0. */
class HazardModel {
 public:
  virtual ~HazardModel() = default;
  virtual std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const = 0;
  virtual nlohmann::json describe() const = 0;
};

struct NuisanceFit {
  std::shared_ptr<const ProjectionModel> projection;
  std::shared_ptr<const HazardModel> hazard;
  std::vector<std::size_t> trained_on;  // empty for oracles
  nlohmann::json metadata = nlohmann::json::object();

  double pi_hat(const SubjectPath& s, const TimeGrid& g, std::size_t i) const {
    return projection->predict(s, g).at(i);
  }
  double hazard_hat(const SubjectPath& s, const TimeGrid& g, std::size_t i) const {
    return hazard->predict(s, g).at(i);
  }
};

using NuisanceFactory =
    std::function<NuisanceFit(const SurvivalSample&, std::span<const std::size_t> train_idx)>;

inline constexpr double kHazardCap = 50.0;

// ---------------------------------------------------------------------------
// Ridge regression of X_t on the covariate history, one fit per grid time

class RidgeHistoricalProjection : public ProjectionModel {
 public:
  struct TimeFit {
    double intercept = 0.0;
    std::vector<double> weights;  // raw scale, index j*d + k for z(j, k), j < i
    std::vector<double> center, scale;
    std::size_t at_risk = 0;
    bool inherited = false;
    double penalty = 0.0;  // the one used at this time (differs per time under GCV)
  };

  RidgeHistoricalProjection(std::size_t d, double penalty, std::vector<TimeFit> fits)
      : d_(d), penalty_(penalty), fits_(std::move(fits)) {}

  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    const std::size_t q = grid.size();
    if (s.q() != q || fits_.size() != q || s.d() != d_) throw DimensionError("ridge projection: shape mismatch");
    std::vector<double> out(q);
    const auto& z = s.z();
    for (std::size_t i = 0; i < q; ++i) {
      const auto& f = fits_[i];
      double v = f.intercept;
      const std::size_t p = f.weights.size();
      for (std::size_t c = 0; c < p; ++c)
        v += f.weights[c] * z(static_cast<Eigen::Index>(c / d_), static_cast<Eigen::Index>(c % d_));
      out[i] = v;
    }
    return out;
  }

  const std::vector<TimeFit>& fits() const { return fits_; }

  nlohmann::json describe() const override {
    nlohmann::json times = nlohmann::json::array();
    for (std::size_t i = 0; i < fits_.size(); ++i) {
      const auto& f = fits_[i];
      times.push_back({{"index", i}, {"intercept", f.intercept}, {"weights", f.weights},
                       {"center", f.center}, {"scale", f.scale}, {"at_risk", f.at_risk},
                       {"inherited", f.inherited}, {"penalty", f.penalty}});
    }
    return {{"method", "ridge-hist"}, {"penalty", std::isnan(penalty_) ? nlohmann::json("gcv") : nlohmann::json(penalty_)},
            {"standardized", true}, {"d", d_}, {"times", times}};
  }

 private:
  std::size_t d_;
  double penalty_;
  std::vector<TimeFit> fits_;
};

/** Log-spaced penalties searched by generalized cross-validation. */
inline std::vector<double> default_gcv_grid() {
  std::vector<double> g;
  for (int k = -6; k <= 10; ++k) g.push_back(std::pow(10.0, 0.5 * k));
  return g;
}

/**
 * For each t_i, ridge regression of X_{t_i} on (Z_{t_j})_{j<i} among training
 * subjects at risk at t_i. Columns are standardized with that time's at-risk
 * rows; the intercept is unpenalized. Gram matrices are kept as running sums
 * and downdated when subjects leave the risk set.
 *
 * A non-empty gcv_grid picks the penalty per time by generalized
 * cross-validation instead of using `penalty`. Late times have few subjects
 * at risk and many lags, and a fixed small penalty interpolates there.
 */
inline std::shared_ptr<const RidgeHistoricalProjection> fit_projection_ridge(
    const SurvivalSample& sample, std::span<const std::size_t> train_idx, double penalty = 0.001,
    const std::vector<double>& gcv_grid = {}) {
  if (train_idx.size() < 2) throw UsageError("ridge projection needs at least 2 training subjects");
  const bool gcv = !gcv_grid.empty();
  if (!gcv && !(penalty >= 0.0)) throw DomainError("ridge penalty must be >= 0");
  for (double g : gcv_grid)
    if (!(g > 0.0)) throw DomainError("gcv penalties must be > 0");
  const std::size_t q = sample.q(), d = sample.d();
  const std::size_t P = (q - 1) * d;

  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample[a].event_index() < sample[b].event_index();
  });

  auto feature_vec = [&](std::size_t j) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(P));
    const auto& z = sample[j].z();
    for (std::size_t c = 0; c < P; ++c)
      f(static_cast<Eigen::Index>(c)) = z(static_cast<Eigen::Index>(c / d), static_cast<Eigen::Index>(c % d));
    return f;
  };

  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
  for (std::size_t j : order) {
    auto f = feature_vec(j);
    s1 += f;
    s2.selfadjointView<Eigen::Lower>().rankUpdate(f, 1.0);
  }

  std::vector<RidgeHistoricalProjection::TimeFit> fits(q);
  {
    double m = 0.0;
    for (std::size_t j : order) m += sample[j].x(0);
    fits[0].intercept = m / static_cast<double>(order.size());
    fits[0].at_risk = order.size();
    fits[0].penalty = gcv ? gcv_grid.front() : penalty;
  }

  std::size_t head = 0;  // order[head..] are at risk
  for (std::size_t i = 1; i < q; ++i) {
    while (head < order.size() && sample[order[head]].event_index() < i) {
      auto f = feature_vec(order[head]);
      s1 -= f;
      s2.selfadjointView<Eigen::Lower>().rankUpdate(f, -1.0);
      ++head;
    }
    const std::size_t m = order.size() - head;
    auto& fit = fits[i];
    fit.at_risk = m;
    if (m < 2) {
      // too few at risk: carry the previous time's fit
      fit = fits[i - 1];
      fit.at_risk = m;
      fit.inherited = true;
      continue;
    }
    const auto p = static_cast<Eigen::Index>(i * d);
    const double mm = static_cast<double>(m);
    Eigen::VectorXd mu = s1.head(p) / mm;
    Eigen::MatrixXd cov = s2.topLeftCorner(p, p).selfadjointView<Eigen::Lower>();
    cov = cov / mm - mu * mu.transpose();

    Eigen::VectorXd sxy = Eigen::VectorXd::Zero(p);
    double sy = 0.0, syy = 0.0;
    for (std::size_t r = head; r < order.size(); ++r) {
      const auto& s = sample[order[r]];
      const double xv = s.x(i);
      sy += xv;
      syy += xv * xv;
      const auto& z = s.z();
      for (Eigen::Index c = 0; c < p; ++c)
        sxy(c) += xv * z(c / static_cast<Eigen::Index>(d), c % static_cast<Eigen::Index>(d));
    }
    const double xbar = sy / mm;
    Eigen::VectorXd cxy = sxy / mm - mu * xbar;

    Eigen::VectorXd sd(p);
    for (Eigen::Index c = 0; c < p; ++c) {
      const double v = cov(c, c);
      sd(c) = v > 1e-24 ? std::sqrt(v) : 1.0;
    }
    Eigen::MatrixXd a = (sd.asDiagonal().inverse() * cov * sd.asDiagonal().inverse()) * mm;
    Eigen::VectorXd rhs = (cxy.array() / sd.array()).matrix() * mm;

    Eigen::VectorXd wt;
    if (gcv) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
      if (es.info() != Eigen::Success)
        throw NumericError("eigen decomposition failed in ridge projection at grid index " + std::to_string(i));
      const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
      const Eigen::VectorXd cc = es.eigenvectors().transpose() * rhs;
      const double yy = std::max(syy - mm * xbar * xbar, 0.0);
      double best = std::numeric_limits<double>::infinity(), lam = gcv_grid.back();
      for (double g : gcv_grid) {
        double df = 0.0, rss = yy;
        for (Eigen::Index k = 0; k < p; ++k) {
          const double den = ev(k) + g;
          df += ev(k) / den;
          rss -= cc(k) * cc(k) * (2.0 / den - ev(k) / (den * den));
        }
        const double dof = 1.0 - (df + 1.0) / mm;
        if (dof <= 0.0) continue;
        const double score = std::max(rss, 0.0) / (dof * dof);
        if (score < best) {
          best = score;
          lam = g;
        }
      }
      wt = es.eigenvectors() * (cc.array() / (ev.array() + lam)).matrix();
      fit.penalty = lam;
    } else {
      a.diagonal().array() += penalty;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      const auto dvec = ldlt.vectorD();
      const double dmax = dvec.cwiseAbs().maxCoeff();
      if (ldlt.info() != Eigen::Success ||
          (penalty == 0.0 && dvec.minCoeff() <= 1e-12 * std::max(dmax, 1e-300)))
        throw NumericError("singular normal equations in ridge projection at grid index " +
                           std::to_string(i) + " (" + std::to_string(m) +
                           " at risk); use penalty > 0");
      wt = ldlt.solve(rhs);
      fit.penalty = penalty;
    }
    Eigen::VectorXd w = (wt.array() / sd.array()).matrix();
    fit.intercept = xbar - mu.dot(w);
    fit.weights.assign(w.data(), w.data() + p);
    fit.center.assign(mu.data(), mu.data() + p);
    fit.scale.assign(sd.data(), sd.data() + p);
  }
  return std::make_shared<RidgeHistoricalProjection>(d, gcv ? std::nan("") : penalty, std::move(fits));
}

// ---------------------------------------------------------------------------
// History features for hazard models

struct HazardBasis {
  bool time = true;
  bool time_sq = true;
  bool log_time = true;
  bool last = true;          // Z at the previous grid point
  bool cumulative = true;    // dt * sum_{j<i} Z_j
  bool running_mean = true;  // mean of Z_j, j < i
  std::vector<double> lag_rates{1.0, 4.0};

  static HazardBasis intercept_only() {
    HazardBasis b;
    b.time = b.time_sq = b.log_time = b.last = b.cumulative = b.running_mean = false;
    b.lag_rates.clear();
    return b;
  }

  std::size_t size(std::size_t d) const {
    std::size_t p = (time ? 1 : 0) + (time_sq ? 1 : 0) + (log_time ? 1 : 0);
    p += d * ((last ? 1 : 0) + (cumulative ? 1 : 0) + (running_mean ? 1 : 0) + lag_rates.size());
    return p;
  }

  std::vector<std::string> names(std::size_t d) const {
    std::vector<std::string> v;
    if (time) v.push_back("t");
    if (time_sq) v.push_back("t^2");
    if (log_time) v.push_back("log(t+dt)");
    for (std::size_t k = 0; k < d; ++k) {
      const std::string zk = "z" + std::to_string(k + 1);
      if (last) v.push_back(zk + "_prev");
      if (cumulative) v.push_back("cum_" + zk);
      if (running_mean) v.push_back("mean_" + zk);
      for (double r : lag_rates) v.push_back("lag" + std::to_string(r).substr(0, 4) + "_" + zk);
    }
    return v;
  }

  nlohmann::json to_json() const {
    return {{"intercept", true},   {"time", time},           {"time_sq", time_sq},
            {"log_time", log_time}, {"last", last},           {"cumulative", cumulative},
            {"running_mean", running_mean}, {"lag_rates", lag_rates}};
  }
};

/** q x p feature matrix (no intercept column); row i uses Z rows < i only. */
inline RowMatrix hazard_features(const SubjectPath& s, const TimeGrid& grid, const HazardBasis& b) {
  const std::size_t q = grid.size(), d = s.d();
  const std::size_t p = b.size(d);
  RowMatrix f(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p));
  const double dt = grid.step();
  std::vector<double> sum(d, 0.0);
  std::vector<std::vector<double>> lag(b.lag_rates.size(), std::vector<double>(d, 0.0));
  std::vector<double> decay(b.lag_rates.size());
  for (std::size_t r = 0; r < b.lag_rates.size(); ++r) decay[r] = std::exp(-b.lag_rates[r] * dt);
  for (std::size_t i = 0; i < q; ++i) {
    if (i > 0) {
      for (std::size_t k = 0; k < d; ++k) {
        const double zp = s.z(i - 1, k);
        sum[k] += zp;
        for (std::size_t r = 0; r < lag.size(); ++r) lag[r][k] = decay[r] * (lag[r][k] + dt * zp);
      }
    }
    const double t = grid[i];
    Eigen::Index c = 0;
    const auto row = static_cast<Eigen::Index>(i);
    if (b.time) f(row, c++) = t;
    if (b.time_sq) f(row, c++) = t * t;
    if (b.log_time) f(row, c++) = std::log(t + dt);
    for (std::size_t k = 0; k < d; ++k) {
      if (b.last) f(row, c++) = i > 0 ? s.z(i - 1, k) : 0.0;
      if (b.cumulative) f(row, c++) = dt * sum[k];
      if (b.running_mean) f(row, c++) = i > 0 ? sum[k] / static_cast<double>(i) : 0.0;
      for (std::size_t r = 0; r < lag.size(); ++r) f(row, c++) = lag[r][k];
    }
  }
  return f;
}

struct PersonPeriod {
  RowMatrix features;
  std::vector<double> events;
  std::vector<std::size_t> subject, index;
};

// rows (j, i) for 1 <= i <= event_index_j
inline PersonPeriod person_period_rows(const SurvivalSample& sample, std::span<const std::size_t> idx,
                                       const HazardBasis& basis) {
  const std::size_t p = basis.size(sample.d());
  std::size_t rows = 0;
  for (std::size_t j : idx) rows += sample[j].event_index();
  PersonPeriod pp;
  pp.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  pp.events.resize(rows);
  pp.subject.resize(rows);
  pp.index.resize(rows);
  std::size_t r = 0;
  for (std::size_t j : idx) {
    const auto& s = sample[j];
    const auto f = hazard_features(s, sample.grid(), basis);
    for (std::size_t i = 1; i <= s.event_index(); ++i, ++r) {
      pp.features.row(static_cast<Eigen::Index>(r)) = f.row(static_cast<Eigen::Index>(i));
      pp.events[r] = s.event_increment(i);
      pp.subject[r] = j;
      pp.index[r] = i;
    }
  }
  return pp;
}

class PooledHazardModel : public HazardModel {
 public:
  PooledHazardModel(HazardBasis basis, std::size_t d, double intercept, std::vector<double> coef,
                    double penalty, int iterations, double cap = kHazardCap)
      : basis_(std::move(basis)), d_(d), intercept_(intercept), coef_(std::move(coef)), penalty_(penalty),
        iterations_(iterations), cap_(cap) {}

  // log-hazard before clipping, per grid index
  std::vector<double> log_hazard(const SubjectPath& s, const TimeGrid& grid) const {
    const auto f = hazard_features(s, grid, basis_);
    std::vector<double> eta(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double v = intercept_;
      for (std::size_t c = 0; c < coef_.size(); ++c) v += coef_[c] * f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      eta[i] = v;
    }
    return eta;
  }

  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    auto eta = log_hazard(s, grid);
    for (double& v : eta) v = std::clamp(std::exp(std::min(v, 700.0)), 0.0, cap_);
    return eta;
  }

  double intercept() const { return intercept_; }
  const std::vector<double>& coefficients() const { return coef_; }
  const HazardBasis& basis() const { return basis_; }

  nlohmann::json describe() const override {
    return {{"method", "pooled-hazard"}, {"basis", basis_.to_json()},
            {"names", basis_.names(d_)},
            {"intercept", intercept_},   {"coefficients", coef_},
            {"penalty", penalty_},       {"newton_iterations", iterations_},
            {"cap", cap_}};
  }

 private:
  HazardBasis basis_;
  std::size_t d_;
  double intercept_;
  std::vector<double> coef_;
  double penalty_;
  int iterations_;
  double cap_;
};

struct NewtonOptions {
  int max_iter = 100;
  double grad_tol = 1e-8;
};

/**
 * Pooled person-period Poisson fit of log h = b0 + b'f on rows at risk.
 * Maximizes sum[dN eta - exp(eta) dt] - penalty |b|^2 with b on the
 * standardized feature scale (intercept unpenalized).
 */
inline std::shared_ptr<const PooledHazardModel> fit_hazard_pooled(
    const SurvivalSample& sample, std::span<const std::size_t> train_idx,
    const HazardBasis& basis = {}, double penalty = 1e-4, NewtonOptions opt = {}) {
  if (train_idx.empty()) throw UsageError("hazard fit needs training subjects");
  const auto pp = person_period_rows(sample, train_idx, basis);
  const auto rows = static_cast<std::size_t>(pp.features.rows());
  const auto p = static_cast<std::size_t>(pp.features.cols());
  const double dt = sample.grid().step();
  double events = 0.0;
  for (double e : pp.events) events += e;
  if (rows == 0 || events == 0.0) {
    // no information: zero hazard
    return std::make_shared<PooledHazardModel>(basis, sample.d(), -700.0, std::vector<double>(p, 0.0), penalty, 0);
  }

  Eigen::VectorXd mu(static_cast<Eigen::Index>(p)), sd(static_cast<Eigen::Index>(p));
  for (std::size_t c = 0; c < p; ++c) {
    const auto col = pp.features.col(static_cast<Eigen::Index>(c));
    const double m = col.mean();
    const double v = (col.array() - m).square().mean();
    mu(static_cast<Eigen::Index>(c)) = m;
    sd(static_cast<Eigen::Index>(c)) = v > 1e-24 ? std::sqrt(v) : 1.0;
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p + 1));
  x.col(0).setOnes();
  for (std::size_t c = 0; c < p; ++c)
    x.col(static_cast<Eigen::Index>(c + 1)) =
        (pp.features.col(static_cast<Eigen::Index>(c)).array() - mu(static_cast<Eigen::Index>(c))) /
        sd(static_cast<Eigen::Index>(c));
  const Eigen::Map<const Eigen::VectorXd> y(pp.events.data(), static_cast<Eigen::Index>(rows));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  beta(0) = std::log(events / (static_cast<double>(rows) * dt));
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p + 1), penalty);
  pen(0) = 0.0;

  auto objective = [&](const Eigen::VectorXd& b) {
    Eigen::ArrayXd eta = (x * b).array().min(700.0);
    return (y.array() * eta - eta.exp() * dt).sum() - (pen.array() * b.array().square()).sum();
  };

  double obj = objective(beta);
  int it = 0;
  double gnorm = INFINITY;
  for (; it < opt.max_iter; ++it) {
    Eigen::ArrayXd eta = (x * beta).array().min(700.0);
    Eigen::ArrayXd m = eta.exp() * dt;
    Eigen::VectorXd grad = x.transpose() * (y.array() - m).matrix() - 2.0 * (pen.array() * beta.array()).matrix();
    gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm < opt.grad_tol * std::max(1.0, events)) break;
    Eigen::MatrixXd hess = x.transpose() * (x.array().colwise() * m).matrix();
    hess.diagonal() += 2.0 * pen;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite())
      throw NumericError("pooled hazard: singular Hessian (gradient norm " + std::to_string(gnorm) + ")");
    double scale = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls, scale *= 0.5) {
      Eigen::VectorXd cand = beta + scale * step;
      const double oc = objective(cand);
      if (std::isfinite(oc) && oc >= obj - 1e-12 * std::abs(obj)) {
        beta = cand;
        obj = oc;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (it >= opt.max_iter)
    throw NumericError("pooled hazard: Newton did not converge in " + std::to_string(opt.max_iter) +
                       " iterations (gradient norm " + std::to_string(gnorm) + ")");

  std::vector<double> coef(p);
  double b0 = beta(0);
  for (std::size_t c = 0; c < p; ++c) {
    coef[c] = beta(static_cast<Eigen::Index>(c + 1)) / sd(static_cast<Eigen::Index>(c));
    b0 -= coef[c] * mu(static_cast<Eigen::Index>(c));
  }
  return std::make_shared<PooledHazardModel>(basis, sample.d(), b0, std::move(coef), penalty, it);
}

/** Log-linear fit plus Poisson-boosted trees on the same history features. */
class BoostedHazardModel : public HazardModel {
 public:
  BoostedHazardModel(std::shared_ptr<const PooledHazardModel> base, TreeEnsemble ens, BoostParams par,
                     HazardBasis tree_basis)
      : base_(std::move(base)), ens_(std::move(ens)), par_(par), tree_basis_(std::move(tree_basis)) {}

  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    auto eta = base_->log_hazard(s, grid);
    const auto f = hazard_features(s, grid, tree_basis_);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double v = eta[i] + ens_.predict(std::span<const double>(f.row(r).data(), static_cast<std::size_t>(f.cols())));
      eta[i] = std::clamp(std::exp(std::min(v, 700.0)), 0.0, kHazardCap);
    }
    return eta;
  }

  nlohmann::json describe() const override {
    return {{"method", "boosted"}, {"base", base_->describe()}, {"params", par_.to_json()},
            {"ensemble", ens_.to_json()}};
  }

 private:
  std::shared_ptr<const PooledHazardModel> base_;
  TreeEnsemble ens_;
  BoostParams par_;
  HazardBasis tree_basis_;
};

inline BoostParams default_hazard_boost() {
  BoostParams p;
  p.n_trees = 60;
  p.max_depth = 2;
  p.learning_rate = 0.1;
  p.min_leaf_hessian = 10.0;
  p.l2 = 1.0;
  p.max_leaf_step = 1.0;
  return p;
}

/**
 * Poisson boosting on the person-period rows. The offset is a pooled
 * log-linear fit: on the full basis by default, or on time terms only
 * (linear_offset = false), which leaves all covariate structure to the trees.
 */
namespace detail {

inline HazardBasis offset_basis(const HazardBasis& basis, bool linear_offset) {
  HazardBasis b = basis;
  if (!linear_offset) {
    b.last = b.cumulative = b.running_mean = false;
    b.lag_rates.clear();
  }
  return b;
}

inline std::vector<double> linear_offsets(const PooledHazardModel& base, const PersonPeriod& rows) {
  std::vector<double> offset(rows.events.size());
  for (std::size_t r = 0; r < offset.size(); ++r) {
    double v = base.intercept();
    for (std::size_t c = 0; c < base.coefficients().size(); ++c)
      v += base.coefficients()[c] * rows.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    offset[r] = v;
  }
  return offset;
}

}  // namespace detail

inline std::shared_ptr<const BoostedHazardModel> fit_hazard_boosted(
    const SurvivalSample& sample, std::span<const std::size_t> train_idx, const HazardBasis& basis = {},
    const BoostParams& par = default_hazard_boost(), double penalty = 1e-4, bool linear_offset = true) {
  const HazardBasis base_basis = detail::offset_basis(basis, linear_offset);
  auto base = fit_hazard_pooled(sample, train_idx, base_basis, penalty);
  const auto pp = person_period_rows(sample, train_idx, basis);
  const auto offset = detail::linear_offsets(*base, linear_offset ? pp : person_period_rows(sample, train_idx, base_basis));
  auto ens = pp.events.empty() ? TreeEnsemble{}
                               : boost_poisson(pp.features, pp.events, offset, sample.grid().step(), par);
  return std::make_shared<BoostedHazardModel>(std::move(base), std::move(ens), par, basis);
}

struct BoostTuning {
  BoostParams best;
  std::vector<int> depths, trees;
  std::vector<std::vector<double>> deviance;  // [depth][trees], mean held-out Poisson deviance per row
  nlohmann::json to_json() const {
    return {{"best", best.to_json()}, {"depths", depths}, {"trees", trees}, {"deviance", deviance}};
  }
};

/**
 * Picks max_depth and n_trees for the boosted hazard by K-fold
 * cross-validated Poisson deviance. One ensemble per (fold, depth) with the
 * largest tree count; smaller counts are its prefixes.
 */
inline BoostTuning tune_hazard_boost(const SurvivalSample& sample, std::span<const std::size_t> idx,
                                     const FoldPlan& plan, std::vector<int> depths, std::vector<int> trees,
                                     const HazardBasis& basis = {}, BoostParams par = default_hazard_boost(),
                                     double penalty = 1e-4, bool linear_offset = true) {
  if (depths.empty() || trees.empty()) throw UsageError("boost tuning needs non-empty grids");
  if (plan.is_no_split() || plan.n() != idx.size()) throw PlanError("boost tuning needs a K >= 2 plan over idx");
  std::sort(trees.begin(), trees.end());
  if (trees.front() < 0) throw DomainError("tree counts must be >= 0");
  const HazardBasis base_basis = detail::offset_basis(basis, linear_offset);
  const double dt = sample.grid().step();
  BoostTuning tun;
  tun.depths = depths;
  tun.trees = trees;
  tun.deviance.assign(depths.size(), std::vector<double>(trees.size(), 0.0));
  double rows_total = 0.0;
  for (std::size_t f = 0; f < plan.k(); ++f) {
    std::vector<std::size_t> tr, ev;
    for (std::size_t r : plan.train_indices(f)) tr.push_back(idx[r]);
    for (std::size_t r : plan.eval_indices(f)) ev.push_back(idx[r]);
    auto base = fit_hazard_pooled(sample, tr, base_basis, penalty);
    const auto pp = person_period_rows(sample, tr, basis);
    const auto off = detail::linear_offsets(*base, linear_offset ? pp : person_period_rows(sample, tr, base_basis));
    const auto hp = person_period_rows(sample, ev, basis);
    const auto hoff = detail::linear_offsets(*base, linear_offset ? hp : person_period_rows(sample, ev, base_basis));
    rows_total += static_cast<double>(hp.events.size());
    for (std::size_t di = 0; di < depths.size(); ++di) {
      BoostParams p = par;
      p.max_depth = depths[di];
      p.n_trees = trees.back();
      const auto ens = pp.events.empty() ? TreeEnsemble{} : boost_poisson(pp.features, pp.events, off, dt, p);
      std::vector<double> eta(hp.events.size());
      for (std::size_t r = 0; r < eta.size(); ++r) eta[r] = hoff[r] + ens.base;
      std::size_t used = 0;
      for (std::size_t ti = 0; ti < trees.size(); ++ti) {
        for (; used < static_cast<std::size_t>(trees[ti]) && used < ens.trees.size(); ++used)
          for (std::size_t r = 0; r < eta.size(); ++r) {
            const auto row = hp.features.row(static_cast<Eigen::Index>(r));
            eta[r] += ens.trees[used].predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
          }
        double dev = 0.0;
        for (std::size_t r = 0; r < eta.size(); ++r) {
          const double h = std::clamp(std::exp(std::min(eta[r], 700.0)), 1e-300, kHazardCap);
          dev += h * dt - hp.events[r] * std::log(h * dt);
        }
        tun.deviance[di][ti] += dev;
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  tun.best = par;
  for (std::size_t di = 0; di < depths.size(); ++di)
    for (std::size_t ti = 0; ti < trees.size(); ++ti) {
      tun.deviance[di][ti] /= std::max(rows_total, 1.0);
      if (tun.deviance[di][ti] < best) {
        best = tun.deviance[di][ti];
        tun.best.max_depth = depths[di];
        tun.best.n_trees = trees[ti];
      }
    }
  return tun;
}

// ---------------------------------------------------------------------------
// Pooled regression on a coarse time grid (time-constant X and Z)

class FittedRegressor {
 public:
  virtual ~FittedRegressor() = default;
  virtual double predict(std::span<const double> row) const = 0;
  virtual nlohmann::json describe() const = 0;
};

class HistoricalRegressor {
 public:
  virtual ~HistoricalRegressor() = default;
  virtual std::shared_ptr<const FittedRegressor> fit(const RowMatrix& x, std::span<const double> y) const = 0;
  virtual std::string name() const = 0;
};

class LinearFit : public FittedRegressor {
 public:
  LinearFit(double b0, std::vector<double> w) : b0_(b0), w_(std::move(w)) {}
  double predict(std::span<const double> row) const override {
    double v = b0_;
    for (std::size_t c = 0; c < w_.size(); ++c) v += w_[c] * row[c];
    return v;
  }
  nlohmann::json describe() const override { return {{"intercept", b0_}, {"weights", w_}}; }

 private:
  double b0_;
  std::vector<double> w_;
};

/** Least squares with intercept (a tiny ridge term keeps constant columns harmless). */
class LinearRegressor : public HistoricalRegressor {
 public:
  explicit LinearRegressor(double ridge = 1e-8) : ridge_(ridge) {}
  std::shared_ptr<const FittedRegressor> fit(const RowMatrix& x, std::span<const double> y) const override {
    const auto n = x.rows(), p = x.cols();
    if (n == 0) throw DimensionError("linear regressor: no rows");
    Eigen::VectorXd mu = x.colwise().mean();
    const Eigen::Map<const Eigen::VectorXd> yy(y.data(), n);
    const double ym = yy.mean();
    Eigen::MatrixXd xc = x.rowwise() - mu.transpose();
    Eigen::MatrixXd a = xc.transpose() * xc;
    a.diagonal().array() += ridge_ * static_cast<double>(n);
    Eigen::VectorXd w = a.ldlt().solve(xc.transpose() * (yy.array() - ym).matrix());
    std::vector<double> wv(w.data(), w.data() + p);
    return std::make_shared<LinearFit>(ym - mu.dot(w), std::move(wv));
  }
  std::string name() const override { return "linear"; }

 private:
  double ridge_;
};

class BoostedFit : public FittedRegressor {
 public:
  explicit BoostedFit(TreeEnsemble e) : ens_(std::move(e)) {}
  double predict(std::span<const double> row) const override { return ens_.predict(row); }
  nlohmann::json describe() const override { return ens_.to_json(); }

 private:
  TreeEnsemble ens_;
};

inline BoostParams default_pi_boost() {
  BoostParams p;
  p.n_trees = 100;
  p.max_depth = 3;
  p.learning_rate = 0.1;
  p.min_leaf_hessian = 20.0;
  p.l2 = 1.0;
  return p;
}

class BoostedTreeRegressor : public HistoricalRegressor {
 public:
  explicit BoostedTreeRegressor(BoostParams p = default_pi_boost()) : par_(p) {}
  std::shared_ptr<const FittedRegressor> fit(const RowMatrix& x, std::span<const double> y) const override {
    return std::make_shared<BoostedFit>(boost_squared(x, y, par_));
  }
  std::string name() const override { return "boosted"; }
  const BoostParams& params() const { return par_; }

 private:
  BoostParams par_;
};

class GridProjectionModel : public ProjectionModel {
 public:
  GridProjectionModel(std::size_t n_t, std::string regressor, std::shared_ptr<const FittedRegressor> fit)
      : n_t_(n_t), regressor_(std::move(regressor)), fit_(std::move(fit)) {}

  double tau(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(n_t_ - 1); }

  static void row_for(const SubjectPath& s, const TimeGrid& grid, double tau, std::vector<double>& row) {
    row.resize(2 + s.d());
    row[0] = tau;
    row[1] = grid[s.event_index()] >= tau ? 1.0 : 0.0;  // Y_tau = 1(T >= tau)
    for (std::size_t k = 0; k < s.d(); ++k) row[2 + k] = s.z(0, k);
  }

  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    std::vector<double> at_tau(n_t_), row;
    for (std::size_t k = 0; k < n_t_; ++k) {
      row_for(s, grid, tau(k), row);
      at_tau[k] = fit_->predict(row);
    }
    // left-step extension to the fine grid
    std::vector<double> out(grid.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      while (k + 1 < n_t_ && tau(k + 1) <= grid[i]) ++k;
      out[i] = at_tau[k];
    }
    return out;
  }

  nlohmann::json describe() const override {
    return {{"method", "grid-pi"}, {"regressor", regressor_}, {"n_t", n_t_}, {"fit", fit_->describe()}};
  }

 private:
  std::size_t n_t_;
  std::string regressor_;
  std::shared_ptr<const FittedRegressor> fit_;
};

/**
 * Person-period rows (tau_k, Y_tau, Z) with response X for every training
 * subject and every point of an n_t grid on [0,1]; one pooled regression.
 */
inline std::shared_ptr<const GridProjectionModel> fit_pi_grid_regression(
    const SurvivalSample& sample, std::span<const std::size_t> train_idx,
    const HistoricalRegressor& regressor, std::size_t n_t = 20) {
  if (train_idx.empty()) throw UsageError("grid regression needs training subjects");
  if (n_t < 2) throw DomainError("pi grid needs at least 2 points");
  const std::size_t d = sample.d();
  RowMatrix x(static_cast<Eigen::Index>(train_idx.size() * n_t), static_cast<Eigen::Index>(2 + d));
  std::vector<double> y(train_idx.size() * n_t), row;
  std::size_t r = 0;
  const GridProjectionModel shape(n_t, regressor.name(), nullptr);
  for (std::size_t j : train_idx) {
    const auto& s = sample[j];
    for (std::size_t k = 0; k < n_t; ++k, ++r) {
      const double tau = shape.tau(k);
      GridProjectionModel::row_for(s, sample.grid(), tau, row);
      for (std::size_t c = 0; c < row.size(); ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
      y[r] = s.x(sample.grid().floor_index(tau));
    }
  }
  return std::make_shared<GridProjectionModel>(n_t, regressor.name(), regressor.fit(x, y));
}

// ---------------------------------------------------------------------------
// Oracles

/** pi_0 / (pi_0 + (1 - pi_0) e^{I_t}). */
inline double oracle_pi_logistic(double pi0, double i_t) {
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw DomainError("oracle_pi_logistic needs pi0 in (0,1)");
  return pi0 / (pi0 + (1.0 - pi0) * std::exp(i_t));
}

class ZeroProjection : public ProjectionModel {
 public:
  std::vector<double> predict(const SubjectPath&, const TimeGrid& grid) const override {
    return std::vector<double>(grid.size(), 0.0);
  }
  nlohmann::json describe() const override { return {{"method", "zero"}}; }
};

/** One hazard path shared by all subjects. */
class FixedPathHazard : public HazardModel {
 public:
  explicit FixedPathHazard(std::vector<double> path) : path_(std::move(path)) {}
  std::vector<double> predict(const SubjectPath&, const TimeGrid& grid) const override {
    if (path_.size() != grid.size()) throw DimensionError("fixed hazard path length != q");
    return path_;
  }
  nlohmann::json describe() const override { return {{"method", "fixed"}, {"path", path_}}; }

 private:
  std::vector<double> path_;
};

class CoxOracleProjection : public ProjectionModel {
 public:
  CoxOracleProjection(const CoxSimConfig& c, const TimeGrid& g) : kx_(c.kernel_x, g) {}
  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    std::vector<double> z(grid.size()), zero(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) z[i] = s.z(i, 0);
    return kx_.apply(z, zero);
  }
  nlohmann::json describe() const override { return {{"method", "oracle-cox-projection"}, {"kernel", kernel_name(kx_.kernel())}}; }

 private:
  KernelWeights kx_;
};

/**
 * Cox intensity for the grid event at index i given the observed history
 * before i. The event at i is driven by the hazard over (t_i, t_{i+1}]:
 *   beta1 t_{i+1}^2 exp(beta2 Z_{i-1} + sum_{j<i} dt rho_Y(t_j, t_{i+1}) Z_j) * phi_i * exp(b_i).
 * phi_i is the posterior mean of exp(W_{t_{i+1}}) given survival to i, from a
 * fixed set of simulated W walks weighted by their survival probability
 * (unknown Z_i enters as Z_{i-1}). Without walks phi_i = 1. b_i is a Monte
 * Carlo baseline making the at-risk average exact.
 */
class CoxOracleHazard : public HazardModel {
 public:
  using Walks = std::vector<std::vector<double>>;

  CoxOracleHazard(const CoxSimConfig& c, const TimeGrid& g, double beta1, std::vector<double> baseline,
                  std::shared_ptr<const Walks> walks = nullptr)
      : cfg_(c), beta1_(beta1), baseline_(std::move(baseline)), wy_(g.size() * g.size(), 0.0),
        wy_now_(g.size() * g.size(), 0.0), walks_(std::move(walks)) {
    const std::size_t q = g.size();
    for (std::size_t i = 0; i + 1 < q; ++i)
      for (std::size_t j = 0; j < i; ++j) wy_[i * q + j] = g.step() * kernel_value(c.kernel_y, g[j], g[i + 1]);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < i; ++j) wy_now_[i * q + j] = g.step() * kernel_value(c.kernel_y, g[j], g[i]);
  }

  std::vector<double> known_log_part(const SubjectPath& s, const TimeGrid& grid) const {
    const std::size_t q = grid.size();
    std::vector<double> out(q, -INFINITY);
    for (std::size_t i = 0; i + 1 < q; ++i) {
      const double t1 = grid[i + 1];
      double v = std::log(beta1_) + 2.0 * std::log(t1) + cfg_.beta2 * (i > 0 ? s.z(i - 1) : 0.0);
      for (std::size_t j = 0; j < i; ++j) v += wy_[i * q + j] * s.z(j);
      out[i] = v;
    }
    if (walks_ && !walks_->empty()) {
      const auto lp = log_posterior_factor(s, grid);
      for (std::size_t i = 0; i + 1 < q; ++i) out[i] += lp[i];
    }
    return out;
  }

  // log phi_i, see the class comment
  std::vector<double> log_posterior_factor(const SubjectPath& s, const TimeGrid& grid) const {
    const std::size_t q = grid.size(), m = walks_->size();
    const double dt = grid.step();
    // deterministic part of log hazard at grid index l, using only Z before l
    std::vector<double> base(q, -INFINITY);
    for (std::size_t l = 1; l < q; ++l) {
      double v = std::log(beta1_) + 2.0 * std::log(grid[l]) + cfg_.beta2 * s.z(l - 1);
      for (std::size_t j = 0; j < l; ++j) v += wy_now_[l * q + j] * s.z(j);
      base[l] = v;
    }
    std::vector<double> out(q, 0.0);
    std::vector<double> cum(m, 0.0);  // exact cumulative hazard through index l-1
    for (std::size_t i = 0; i + 1 < q; ++i) {
      // survival to i: Lambda_i < E, the last term with Z_i unknown
      double best = INFINITY;
      std::vector<double> lw(m);
      for (std::size_t r = 0; r < m; ++r) {
        const auto& w = (*walks_)[r];
        const double last = i >= 1 ? std::exp(base[i] + w[i]) * dt : 0.0;
        lw[r] = cum[r] + last;
        best = std::min(best, lw[r]);
      }
      double num = 0.0, den = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        const double wt = std::exp(-(lw[r] - best));
        den += wt;
        num += wt * std::exp((*walks_)[r][i + 1]);
      }
      out[i] = std::log(num / den);
      // advance the exact part with Z_i now known for index i
      if (i >= 1) {
        double v = std::log(beta1_) + 2.0 * std::log(grid[i]) + cfg_.beta2 * s.z(i);
        for (std::size_t j = 0; j < i; ++j) v += wy_now_[i * q + j] * s.z(j);
        for (std::size_t r = 0; r < m; ++r) cum[r] += std::exp(v + (*walks_)[r][i]) * dt;
      }
    }
    return out;
  }

  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    auto eta = known_log_part(s, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      eta[i] = std::isfinite(eta[i]) ? std::min(std::exp(eta[i] + baseline_[i]), 1e300) : 0.0;
    return eta;
  }

  nlohmann::json describe() const override {
    return {{"method", "oracle-cox-hazard"},
            {"beta1", beta1_},
            {"baseline", baseline_},
            {"posterior_walks", walks_ ? walks_->size() : 0}};
  }

 private:
  CoxSimConfig cfg_;
  double beta1_;
  std::vector<double> baseline_;
  std::vector<double> wy_, wy_now_;
  std::shared_ptr<const Walks> walks_;
};

inline std::shared_ptr<const CoxOracleHazard::Walks> cox_oracle_walks(const CoxSimConfig& c, std::size_t count) {
  auto w = std::make_shared<CoxOracleHazard::Walks>();
  const TimeGrid grid(c.q);
  for (std::size_t r = 0; r < count; ++r) {
    auto rng = make_stream(c.seed, StreamTag::Oracle, 1, r);
    w->push_back(gaussian_walk(grid, rng));
  }
  return w;
}

/**
 * Baseline b_i for CoxOracleHazard: log of the at-risk mean of
 * (1 - exp(-lambda^full_{i+1} dt)) / dt divided by the known part,
 * from mc_size fresh subjects. Before enough subjects are at risk the
 * previous value is carried forward.
 */
inline std::vector<double> cox_oracle_baseline(const CoxSimConfig& c, double beta1, std::size_t mc_size = 20000,
                                               std::size_t min_at_risk = 50,
                                               std::shared_ptr<const CoxOracleHazard::Walks> walks = nullptr) {
  const TimeGrid grid(c.q);
  const CoxKernels kern(c, grid);
  const CoxOracleHazard shape(c, grid, beta1, std::vector<double>(c.q, 0.0), walks);
  const std::size_t q = c.q;
  std::vector<double> num(q, 0.0), cnt(q, 0.0);
  for (std::size_t j = 0; j < mc_size; ++j) {
    auto rng = make_stream(c.seed, StreamTag::Oracle, 0, j);
    auto s = draw_cox_subject(c, grid, kern, beta1, rng);
    const auto path = to_subject_path(s);
    const auto known = shape.known_log_part(path, grid);
    for (std::size_t i = 1; i + 1 < q && i <= s.outcome.event_index; ++i) {
      const double p = -std::expm1(-s.hazard[i + 1] * grid.step()) / grid.step();
      num[i] += p / std::exp(known[i]);
      cnt[i] += 1.0;
    }
  }
  std::vector<double> b(q, 0.0);
  double prev = 0.0;
  for (std::size_t i = 1; i + 1 < q; ++i) {
    if (cnt[i] >= static_cast<double>(min_at_risk) && num[i] > 0.0) prev = std::log(num[i] / cnt[i]);
    b[i] = prev;
  }
  b[q - 1] = prev;
  return b;
}

/** posterior_walks = 0 gives the baseline-only intensity. */
inline NuisanceFit oracle_nuisances_cox(const CoxSimConfig& c, double beta1, std::size_t mc_size = 4000,
                                        std::size_t posterior_walks = 512) {
  if (c.rho0 != 0.0) throw ConfigError("the Cox oracle is only available under the null (rho0 = 0)");
  const TimeGrid grid(c.q);
  NuisanceFit f;
  std::shared_ptr<const CoxOracleHazard::Walks> walks;
  if (posterior_walks > 0) walks = cox_oracle_walks(c, posterior_walks);
  f.projection = std::make_shared<CoxOracleProjection>(c, grid);
  f.hazard = std::make_shared<CoxOracleHazard>(c, grid, beta1, cox_oracle_baseline(c, beta1, mc_size, 50, walks), walks);
  f.metadata = {{"kind", "oracle-cox"}, {"beta1", beta1}, {"mc_size", mc_size}, {"posterior_walks", posterior_walks}};
  return f;
}

inline NuisanceFit oracle_nuisances_cox(const CoxSimConfig& c) {
  return oracle_nuisances_cox(c, c.beta1 > 0 ? c.beta1 : calibrate_beta1(c));
}

// mean of Unif(0,1) tilted by exp(-c u)
inline double tilted_uniform_mean(double c) {
  if (std::abs(c) < 1e-4) return 0.5 - c / 12.0;
  return 1.0 / c - 1.0 / std::expm1(c);
}

/** Closed-form pi_t(Z) = E[X | T* >= t, Z] for the ACM designs. */
inline double acm_pi(const AcmSimConfig& c, double t, std::span<const double> z) {
  switch (c.setting) {
    case AcmSetting::Lin: return z[0] + tilted_uniform_mean(t * t);
    case AcmSetting::Par: return phi_bump(z[0]) + tilted_uniform_mean(t * t);
    case AcmSetting::BinCox: {
      const double pi0 = expit(c.alpha * z[0]);
      const double it = t * t * std::exp(c.beta_z * z[0]) * std::expm1(c.beta_x);
      return oracle_pi_logistic(pi0, it);
    }
  }
  return 0.0;
}

/** Hazard given Z only: h_t(Z) = E[hazard | T* >= t, Z]. */
inline double acm_h(const AcmSimConfig& c, std::span<const double> beta, double t, std::span<const double> z) {
  const double pi = acm_pi(c, t, z);
  if (c.setting == AcmSetting::BinCox) {
    const double phi = 2.0 * t * std::exp(c.beta_z * z[0]);
    return phi * (pi * std::expm1(c.beta_x) + 1.0);
  }
  return 2.0 * t * (1.0 + pi + acm_f(c, beta, z));
}

/** Full hazard given (X, Z). */
inline double acm_hfull(const AcmSimConfig& c, std::span<const double> beta, double t, double x,
                        std::span<const double> z) {
  return 2.0 * t * acm_rate(c, beta, x, z);
}

inline std::vector<double> baseline_z(const SubjectPath& s) {
  std::vector<double> z(s.d());
  for (std::size_t k = 0; k < s.d(); ++k) z[k] = s.z(0, k);
  return z;
}

// With events snapped up to the grid, Y at index i means T* > t_{i-1}, so the
// projection for index i is the closed form at t_{i-1}.
class AcmOracleProjection : public ProjectionModel {
 public:
  explicit AcmOracleProjection(AcmSimConfig c) : cfg_(std::move(c)) {}
  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    const auto z = baseline_z(s);
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = acm_pi(cfg_, i > 0 ? grid[i - 1] : 0.0, z);
    return out;
  }
  nlohmann::json describe() const override { return {{"method", "oracle-acm-projection"}, {"config", cfg_.to_json()}}; }

 private:
  AcmSimConfig cfg_;
};

// interval (t_{i-1}, t_i] hazard at its midpoint
class AcmOracleHazard : public HazardModel {
 public:
  AcmOracleHazard(AcmSimConfig c, std::vector<double> beta) : cfg_(std::move(c)), beta_(std::move(beta)) {}
  std::vector<double> predict(const SubjectPath& s, const TimeGrid& grid) const override {
    const auto z = baseline_z(s);
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) out[i] = acm_h(cfg_, beta_, grid[i] - 0.5 * grid.step(), z);
    return out;
  }
  nlohmann::json describe() const override { return {{"method", "oracle-acm-hazard"}, {"beta", beta_}}; }

 private:
  AcmSimConfig cfg_;
  std::vector<double> beta_;
};

inline NuisanceFit oracle_nuisances_acm(const AcmSimConfig& c, std::vector<double> beta) {
  NuisanceFit f;
  f.projection = std::make_shared<AcmOracleProjection>(c);
  f.hazard = std::make_shared<AcmOracleHazard>(c, std::move(beta));
  f.metadata = {{"kind", "oracle-acm"}};
  return f;
}

// ---------------------------------------------------------------------------
// Factories

inline NuisanceFactory ridge_pooled_factory(double ridge_penalty = 0.001, HazardBasis basis = {},
                                            double hazard_penalty = 1e-4) {
  return [=](const SurvivalSample& s, std::span<const std::size_t> idx) {
    NuisanceFit f;
    f.projection = fit_projection_ridge(s, idx, ridge_penalty);
    f.hazard = fit_hazard_pooled(s, idx, basis, hazard_penalty);
    f.trained_on.assign(idx.begin(), idx.end());
    f.metadata = {{"kind", "ridge+pooled"}, {"ridge_penalty", ridge_penalty},
                  {"hazard_penalty", hazard_penalty}, {"basis", basis.to_json()}};
    return f;
  };
}

// ridge projection with a boosted hazard
inline NuisanceFactory ridge_boosted_factory(double ridge_penalty = 0.001, bool linear_offset = true,
                                             HazardBasis basis = {}, double hazard_penalty = 1e-4,
                                             bool gcv = false, BoostParams boost = default_hazard_boost()) {
  return [=](const SurvivalSample& s, std::span<const std::size_t> idx) {
    NuisanceFit f;
    f.projection = fit_projection_ridge(s, idx, ridge_penalty, gcv ? default_gcv_grid() : std::vector<double>{});
    f.hazard = fit_hazard_boosted(s, idx, basis, boost, hazard_penalty, linear_offset);
    f.trained_on.assign(idx.begin(), idx.end());
    f.metadata = {{"kind", "ridge+boosted"}, {"ridge_penalty", gcv ? nlohmann::json("gcv") : nlohmann::json(ridge_penalty)},
                  {"linear_offset", linear_offset}, {"hazard_penalty", hazard_penalty},
                  {"basis", basis.to_json()}, {"boost", boost.to_json()}};
    return f;
  };
}

enum class HazardLearner { Pooled, Boosted };

inline NuisanceFactory grid_pi_factory(std::shared_ptr<const HistoricalRegressor> regressor,
                                       HazardLearner hazard = HazardLearner::Pooled,
                                       std::size_t n_t = 20, HazardBasis basis = {},
                                       double hazard_penalty = 1e-4) {
  return [=](const SurvivalSample& s, std::span<const std::size_t> idx) {
    NuisanceFit f;
    f.projection = fit_pi_grid_regression(s, idx, *regressor, n_t);
    if (hazard == HazardLearner::Pooled)
      f.hazard = fit_hazard_pooled(s, idx, basis, hazard_penalty);
    else
      f.hazard = fit_hazard_boosted(s, idx, basis, default_hazard_boost(), hazard_penalty);
    f.trained_on.assign(idx.begin(), idx.end());
    f.metadata = {{"kind", std::string(hazard == HazardLearner::Pooled ? "pooled" : "boosted") + "+grid-" +
                               regressor->name()},
                  {"n_t", n_t}};
    return f;
  };
}

// Oracles ignore the training data; the same fit serves every fold.
inline NuisanceFactory fixed_factory(NuisanceFit fit) {
  return [fit = std::move(fit)](const SurvivalSample&, std::span<const std::size_t>) { return fit; };
}

}  // namespace hazardlean
