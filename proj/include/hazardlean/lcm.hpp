#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "hazardlean/grid.hpp"
#include "hazardlean/nuisance.hpp"

namespace hazardlean {

inline void check_no_overlap(std::size_t n, std::span<const std::size_t> trained_on,
                             std::span<const std::size_t> eval_idx) {
  std::vector<char> in_train(n, 0);
  for (std::size_t j : trained_on) in_train.at(j) = 1;
  for (std::size_t j : eval_idx)
    if (in_train.at(j))
      throw UsageError("subject " + std::to_string(j) +
                       " is in both the training and the evaluation set; request the no-split plan explicitly");
}

/** mean over eval subjects of int g dM, given per-subject g and hazard paths (aligned with eval_idx) */
inline std::vector<double> mean_martingale_integral(const SurvivalSample& sample,
                                                    std::span<const std::size_t> eval_idx,
                                                    std::span<const std::vector<double>> g,
                                                    std::span<const std::vector<double>> hazard) {
  if (eval_idx.empty()) throw UsageError("evaluation set is empty");
  if (g.size() != eval_idx.size() || hazard.size() != eval_idx.size())
    throw DimensionError("residual paths do not align with the evaluation set");
  std::vector<double> acc(sample.q(), 0.0);
  for (std::size_t r = 0; r < eval_idx.size(); ++r) {
    const auto path = stieltjes_integrate(g[r], sample[eval_idx[r]], hazard[r], sample.grid());
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += path[i];
  }
  const double inv = 1.0 / static_cast<double>(eval_idx.size());
  for (double& v : acc) v *= inv;
  return acc;
}

/** V(t) = mean over eval subjects of the sum of g^2 at event indices <= t. */
inline std::vector<double> variance_estimate(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                             std::span<const std::vector<double>> g) {
  if (eval_idx.empty()) throw UsageError("evaluation set is empty");
  if (g.size() != eval_idx.size()) throw DimensionError("residual paths do not align with the evaluation set");
  const std::size_t q = sample.q();
  std::vector<double> jumps(q, 0.0);
  for (std::size_t r = 0; r < eval_idx.size(); ++r) {
    const auto& s = sample[eval_idx[r]];
    if (g[r].size() != q) throw DimensionError("residual path length != q");
    if (s.delta() && s.event_index() >= 1) jumps[s.event_index()] += g[r][s.event_index()] * g[r][s.event_index()];
  }
  std::vector<double> v(q, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    acc += jumps[i];
    v[i] = acc / static_cast<double>(eval_idx.size());
  }
  return v;
}

struct ResidualPaths {
  std::vector<std::vector<double>> g;
  std::vector<std::vector<double>> hazard;
};

// G = X - Pi_hat for each eval subject
inline ResidualPaths additive_residuals(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                        const NuisanceFit& nuisance) {
  ResidualPaths r;
  r.g.reserve(eval_idx.size());
  r.hazard.reserve(eval_idx.size());
  for (std::size_t j : eval_idx) {
    const auto& s = sample[j];
    auto pi = nuisance.projection->predict(s, sample.grid());
    for (std::size_t i = 0; i < pi.size(); ++i) pi[i] = s.x(i) - pi[i];
    r.g.push_back(std::move(pi));
    r.hazard.push_back(nuisance.hazard->predict(s, sample.grid()));
  }
  return r;
}

/** Single split LCM estimate on eval_idx with nuisances fitted elsewhere. */
inline std::vector<double> lcm_sample_split(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                            const NuisanceFit& nuisance, bool allow_overlap = false) {
  if (!allow_overlap) check_no_overlap(sample.n(), nuisance.trained_on, eval_idx);
  const auto r = additive_residuals(sample, eval_idx, nuisance);
  return mean_martingale_integral(sample, eval_idx, r.g, r.hazard);
}

/** Plug-in estimate: X itself as integrand, no residualization. */
inline std::vector<double> lcm_plugin(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                      const HazardModel& hazard) {
  std::vector<std::vector<double>> g, h;
  for (std::size_t j : eval_idx) {
    g.push_back(sample[j].x());
    h.push_back(hazard.predict(sample[j], sample.grid()));
  }
  return mean_martingale_integral(sample, eval_idx, g, h);
}

struct LcmFoldPiece {
  std::vector<double> gamma;
  std::vector<double> var;
  std::vector<std::size_t> eval_idx;
};

struct LcmFit {
  std::vector<double> gamma_hat;
  std::vector<double> var_hat;
  std::size_t n_eff = 0;
  std::vector<LcmFoldPiece> fold_pieces;
  double t_stat = NAN;
  double p_value = NAN;
  bool no_split = false;
  nlohmann::json metadata = nlohmann::json::object();
};

// entrywise mean over pieces in fold order
inline std::vector<double> fold_mean(const std::vector<std::vector<double>>& pieces) {
  std::vector<double> out(pieces.front().size(), 0.0);
  for (const auto& p : pieces)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  const double inv = 1.0 / static_cast<double>(pieces.size());
  for (double& v : out) v *= inv;
  return out;
}

/**
 * K-fold cross-fitted LCM. Fold k nuisances are trained on the complement
 * (or on everything for the no-split plan) and evaluated on fold k.
 */
inline LcmFit lcm_crossfit(const SurvivalSample& sample, const FoldPlan& plan, const NuisanceFactory& factory) {
  if (plan.n() != sample.n()) throw PlanError("fold plan size differs from the sample size");
  LcmFit fit;
  fit.no_split = plan.is_no_split();
  std::vector<std::vector<double>> gs, vs;
  nlohmann::json fold_meta = nlohmann::json::array();
  for (std::size_t k = 0; k < plan.k(); ++k) {
    const auto train = plan.train_indices(k);
    const auto eval = plan.eval_indices(k);
    const auto nuis = factory(sample, train);
    if (!plan.is_no_split()) check_no_overlap(sample.n(), nuis.trained_on, eval);
    const auto r = additive_residuals(sample, eval, nuis);
    LcmFoldPiece piece;
    piece.gamma = mean_martingale_integral(sample, eval, r.g, r.hazard);
    piece.var = variance_estimate(sample, eval, r.g);
    piece.eval_idx = eval;
    gs.push_back(piece.gamma);
    vs.push_back(piece.var);
    fold_meta.push_back({{"fold", k}, {"n_eval", eval.size()}, {"n_train", train.size()}, {"nuisance", nuis.metadata}});
    fit.fold_pieces.push_back(std::move(piece));
  }
  fit.gamma_hat = fold_mean(gs);
  fit.var_hat = fold_mean(vs);
  fit.n_eff = sample.n();
  fit.metadata = {{"k_folds", plan.k()}, {"no_split", fit.no_split}, {"q", sample.q()}, {"folds", fold_meta}};
  return fit;
}

inline LcmFit lcm_crossfit(const SurvivalSample& sample, std::size_t k, const NuisanceFactory& factory,
                           std::uint64_t seed, std::uint64_t replicate = 0) {
  if (k == 1) return lcm_crossfit(sample, FoldPlan::no_split(sample.n()), factory);
  auto rng = make_stream(seed, StreamTag::Folds, replicate);
  return lcm_crossfit(sample, FoldPlan::random(sample.n(), k, rng), factory);
}

// ---------------------------------------------------------------------------
// Law of sup_{t<=1} |B_t|

/** 1 - F_S(x) = 4 sum_{k>=1} (-1)^{k+1} Pbar((2k-1)x), fast once x is not small. */
inline double fs_sf_reflection(double x, std::size_t k_terms = 1000) {
  double s = 0.0;
  for (std::size_t k = 1; k <= k_terms; ++k) {
    const double term = 0.5 * std::erfc(static_cast<double>(2 * k - 1) * x / std::numbers::sqrt2);
    s += (k % 2 == 1) ? term : -term;
    if (term == 0.0) break;
  }
  return std::clamp(4.0 * s, 0.0, 1.0);
}

/**
 * F_S(x); 0 for x <= 0. The theta series below x = 1, the reflection series
 * above it (the theta series needs ~x terms and stalls short of 1 for large x).
 */
inline double fs_cdf(double x, std::size_t k_terms = 1000) {
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x >= 1.0) return 1.0 - fs_sf_reflection(x, k_terms);
  const double c = std::numbers::pi * std::numbers::pi / (8.0 * x * x);
  double s = 0.0;
  for (std::size_t k = 0; k < k_terms; ++k) {
    const double m = static_cast<double>(2 * k + 1);
    const double term = std::exp(-c * m * m) / m;
    s += (k % 2 == 0) ? term : -term;
    if (term == 0.0) break;
  }
  return std::clamp(4.0 / std::numbers::pi * s, 0.0, 1.0);
}

/** 1 - F_S(x) without cancellation in the upper tail */
inline double fs_sf(double x, std::size_t k_terms = 1000) {
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x >= 1.0) return fs_sf_reflection(x, k_terms);
  return 1.0 - fs_cdf(x, k_terms);
}

/** first omitted term of the theta series, a bound on the truncation error */
inline double fs_cdf_remainder(double x, std::size_t k_terms = 1000) {
  if (!(x > 0.0)) return 0.0;
  const double m = static_cast<double>(2 * k_terms + 1);
  return 4.0 / std::numbers::pi * std::exp(-std::numbers::pi * std::numbers::pi * m * m / (8.0 * x * x)) / m;
}

/** z with F_S(z) = 1 - alpha, by bisection on [1e-3, 20]. */
inline double fs_quantile(double alpha, std::size_t k_terms = 1000) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  auto f = [&](double z) { return fs_cdf(z, k_terms) - (1.0 - alpha); };
  auto tol = [](double a, double b) { return std::abs(b - a) < 1e-10; };
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::bisect(f, 1e-3, 20.0, tol, iters);
  return 0.5 * (r.first + r.second);
}

inline double fs_pvalue(double t_stat, std::size_t k_terms = 1000) {
  return fs_sf(t_stat, k_terms);
}

enum class Statistic { Sup, Endpoint };

inline std::string statistic_name(Statistic s) { return s == Statistic::Sup ? "sup" : "endpoint"; }
inline Statistic parse_statistic(const std::string& s) {
  if (s == "sup") return Statistic::Sup;
  if (s == "endpoint") return Statistic::Endpoint;
  throw UsageError("unknown statistic '" + s + "' (sup, endpoint)");
}

struct LctResult {
  LcmFit fit;
  Statistic statistic = Statistic::Sup;
  double alpha = 0.05;
  double t_stat = NAN;
  double p_value = NAN;
  double critical = NAN;
  bool reject = false;
};

/** Standardizes an LCM fit and decides at level alpha. */
inline LctResult lct_decide(LcmFit fit, double alpha, Statistic stat) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  const double v1 = fit.var_hat.back();
  if (!(v1 > 0.0)) throw NumericError("degenerate variance: V(1) = 0, no events with nonzero residual");
  const double rn = std::sqrt(static_cast<double>(fit.n_eff));
  LctResult r;
  r.statistic = stat;
  r.alpha = alpha;
  if (stat == Statistic::Sup) {
    double sup = 0.0;
    for (double g : fit.gamma_hat) sup = std::max(sup, std::abs(g));
    r.t_stat = rn * sup / std::sqrt(v1);
    r.p_value = fs_pvalue(r.t_stat);
    r.critical = fs_quantile(alpha);
  } else {
    r.t_stat = rn * fit.gamma_hat.back() / std::sqrt(v1);
    r.p_value = std::erfc(std::abs(r.t_stat) / std::numbers::sqrt2);
    r.critical = NAN;
  }
  // the p-value is the decision rule; the critical value is reported alongside
  r.reject = r.p_value < alpha;
  fit.t_stat = r.t_stat;
  fit.p_value = r.p_value;
  r.fit = std::move(fit);
  return r;
}

inline LctResult lct_test(const SurvivalSample& sample, const FoldPlan& plan, const NuisanceFactory& factory,
                          double alpha = 0.05, Statistic stat = Statistic::Sup) {
  return lct_decide(lcm_crossfit(sample, plan, factory), alpha, stat);
}

}  // namespace hazardlean
