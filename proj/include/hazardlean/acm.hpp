#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hazardlean/lcm.hpp"

namespace hazardlean {

struct RhoEstimate {
  std::vector<double> rho_tilde;
  std::vector<double> rho_hat;
  double clip_constant = 0.005;
  std::vector<char> valid_mask;  // rho_tilde >= clip_constant

  // first index where clipping binds, q if never
  std::size_t first_invalid() const {
    for (std::size_t i = 0; i < valid_mask.size(); ++i)
      if (!valid_mask[i]) return i;
    return valid_mask.size();
  }
};

inline RhoEstimate rho_from_path(std::vector<double> rho_tilde, double clip) {
  if (!(clip > 0.0)) throw DomainError("clipping constant must be > 0");
  RhoEstimate r;
  r.clip_constant = clip;
  r.rho_hat.resize(rho_tilde.size());
  r.valid_mask.resize(rho_tilde.size());
  for (std::size_t i = 0; i < rho_tilde.size(); ++i) {
    r.valid_mask[i] = rho_tilde[i] >= clip ? 1 : 0;
    r.rho_hat[i] = std::max(rho_tilde[i], clip);
  }
  r.rho_tilde = std::move(rho_tilde);
  return r;
}

/** rho~(t) = mean over eval of Y_t (X_t - pi_t)^2, clipped below at clip. */
inline RhoEstimate empirical_rho(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                 const ProjectionModel& pi_hat, double clip = 0.005) {
  if (eval_idx.empty()) throw UsageError("evaluation set is empty");
  std::vector<double> acc(sample.q(), 0.0);
  for (std::size_t j : eval_idx) {
    const auto& s = sample[j];
    const auto pi = pi_hat.predict(s, sample.grid());
    for (std::size_t i = 0; i <= s.event_index(); ++i) {
      const double e = s.x(i) - pi[i];
      acc[i] += e * e;
    }
  }
  for (double& v : acc) v /= static_cast<double>(eval_idx.size());
  return rho_from_path(std::move(acc), clip);
}

enum class ClipRule { Fixed, Theory };

struct ClipSpec {
  ClipRule rule = ClipRule::Fixed;
  double value = 0.005;

  double constant(std::size_t n_eval) const {
    return rule == ClipRule::Fixed ? value : std::pow(static_cast<double>(n_eval), -1.0 / 3.0);
  }
  std::string name() const {
    return rule == ClipRule::Fixed ? "fixed:" + std::to_string(value) : "theory";
  }
  static ClipSpec parse(const std::string& s) {
    if (s == "theory") return {ClipRule::Theory, 0.0};
    if (s.rfind("fixed:", 0) == 0) {
      const double v = std::stod(s.substr(6));
      if (!(v > 0.0)) throw UsageError("clip value must be > 0");
      return {ClipRule::Fixed, v};
    }
    if (s == "fixed") return {};
    throw UsageError("unknown clip rule '" + s + "' (fixed:<c>, theory)");
  }
};

/**
 * V(t) = mean_i ( int_0^t G dM - int_0^t E G dgamma )^2 using the same
 * jump/left-Riemann convention as every other integral.
 */
inline std::vector<double> acm_variance(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                        std::span<const std::vector<double>> g, std::span<const std::vector<double>> e,
                                        std::span<const std::vector<double>> hazard, std::span<const double> gamma) {
  if (eval_idx.empty()) throw UsageError("evaluation set is empty");
  if (g.size() != eval_idx.size() || e.size() != eval_idx.size() || hazard.size() != eval_idx.size())
    throw DimensionError("acm_variance: paths do not align with the evaluation set");
  const std::size_t q = sample.q();
  if (gamma.size() != q) throw DimensionError("acm_variance: gamma length != q");
  std::vector<double> v(q, 0.0);
  for (std::size_t r = 0; r < eval_idx.size(); ++r) {
    const auto m = stieltjes_integrate(g[r], sample[eval_idx[r]], hazard[r], sample.grid());
    double corr = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      if (i > 0) corr += e[r][i] * g[r][i] * (gamma[i] - gamma[i - 1]);
      const double u = m[i] - corr;
      v[i] += u * u;
    }
  }
  for (double& x : v) x /= static_cast<double>(eval_idx.size());
  return v;
}

struct AcmSplit {
  std::vector<double> gamma;
  std::vector<double> var;
  std::size_t first_invalid = 0;
};

/** Algorithm: G = Y (X - pi)/rho_hat on the eval fold, gamma = mean int G dM. */
inline AcmSplit acm_single_split(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                 const NuisanceFit& nuisance, const RhoEstimate& rho, bool allow_overlap = false) {
  if (!allow_overlap) check_no_overlap(sample.n(), nuisance.trained_on, eval_idx);
  if (rho.rho_hat.size() != sample.q()) throw DimensionError("rho path length != q");
  const std::size_t q = sample.q();
  std::vector<std::vector<double>> g, e, h;
  g.reserve(eval_idx.size());
  e.reserve(eval_idx.size());
  h.reserve(eval_idx.size());
  for (std::size_t j : eval_idx) {
    const auto& s = sample[j];
    auto pi = nuisance.projection->predict(s, sample.grid());
    std::vector<double> ee(q), gg(q);
    for (std::size_t i = 0; i < q; ++i) {
      ee[i] = s.at_risk(i) * (s.x(i) - pi[i]);
      gg[i] = ee[i] / rho.rho_hat[i];
    }
    e.push_back(std::move(ee));
    g.push_back(std::move(gg));
    h.push_back(nuisance.hazard->predict(s, sample.grid()));
  }
  AcmSplit out;
  out.gamma = mean_martingale_integral(sample, eval_idx, g, h);
  out.var = acm_variance(sample, eval_idx, g, e, h, out.gamma);
  out.first_invalid = rho.first_invalid();
  return out;
}

struct AcmFoldPiece {
  std::vector<double> gamma;
  std::vector<double> var;
  std::vector<std::size_t> eval_idx;
  std::size_t first_invalid = 0;
};

struct AcmFit {
  std::vector<double> gamma_check;  // theory path, clipped rho everywhere
  std::vector<double> var_hat;
  std::vector<RhoEstimate> rho_by_fold;
  std::vector<AcmFoldPiece> fold_pieces;
  std::vector<char> defined;      // prefix of indices valid in every fold
  std::vector<double> reported;   // gamma_check, NaN where undefined
  std::vector<double> reported_var;
  std::size_t n_eff = 0;
  bool no_split = false;
  nlohmann::json metadata = nlohmann::json::object();

  bool defined_at(std::size_t i) const { return i < defined.size() && defined[i]; }
};

inline AcmFit acm_crossfit(const SurvivalSample& sample, const FoldPlan& plan, const NuisanceFactory& factory,
                           ClipSpec clip = {}) {
  if (plan.n() != sample.n()) throw PlanError("fold plan size differs from the sample size");
  const std::size_t q = sample.q();
  AcmFit fit;
  fit.no_split = plan.is_no_split();
  fit.n_eff = sample.n();
  std::vector<std::vector<double>> gs, vs;
  std::size_t first_bad = q;
  nlohmann::json fold_meta = nlohmann::json::array();
  for (std::size_t k = 0; k < plan.k(); ++k) {
    const auto train = plan.train_indices(k);
    const auto eval = plan.eval_indices(k);
    const auto nuis = factory(sample, train);
    if (!plan.is_no_split()) check_no_overlap(sample.n(), nuis.trained_on, eval);
    auto rho = empirical_rho(sample, eval, *nuis.projection, clip.constant(eval.size()));
    auto split = acm_single_split(sample, eval, nuis, rho, plan.is_no_split());
    first_bad = std::min(first_bad, split.first_invalid);
    gs.push_back(split.gamma);
    vs.push_back(split.var);
    fold_meta.push_back({{"fold", k},
                         {"n_eval", eval.size()},
                         {"n_train", train.size()},
                         {"clip", rho.clip_constant},
                         {"first_masked_index", split.first_invalid},
                         {"all_masked", split.first_invalid == 0},
                         {"nuisance", nuis.metadata}});
    fit.fold_pieces.push_back({split.gamma, split.var, eval, split.first_invalid});
    fit.rho_by_fold.push_back(std::move(rho));
  }
  fit.gamma_check = fold_mean(gs);
  fit.var_hat = fold_mean(vs);
  fit.defined.assign(q, 0);
  fit.reported.assign(q, std::numeric_limits<double>::quiet_NaN());
  fit.reported_var.assign(q, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < first_bad; ++i) {
    fit.defined[i] = 1;
    fit.reported[i] = fit.gamma_check[i];
    fit.reported_var[i] = fit.var_hat[i];
  }
  fit.metadata = {{"k_folds", plan.k()},
                  {"no_split", fit.no_split},
                  {"clip", clip.name()},
                  {"first_undefined_index", first_bad},
                  {"variance", "surmised"},
                  {"folds", fold_meta}};
  return fit;
}

inline AcmFit acm_crossfit(const SurvivalSample& sample, std::size_t k, const NuisanceFactory& factory,
                           std::uint64_t seed, std::uint64_t replicate = 0, ClipSpec clip = {}) {
  if (k == 1) return acm_crossfit(sample, FoldPlan::no_split(sample.n()), factory, clip);
  auto rng = make_stream(seed, StreamTag::Folds, replicate);
  return acm_crossfit(sample, FoldPlan::random(sample.n(), k, rng), factory, clip);
}

// ---------------------------------------------------------------------------
// Aalen additive least squares

struct AalenFit {
  std::vector<std::string> names;
  Eigen::MatrixXd cumulative;  // q x p, NaN from the first masked increment on
  std::vector<char> defined;
  std::vector<std::size_t> at_risk;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < names.size(); ++c)
      if (names[c] == name) return c;
    throw UsageError("no Aalen coefficient named " + name);
  }
  double at(std::size_t i, const std::string& name) const {
    return cumulative(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(column(name)));
  }
};

/**
 * dB(t_i) = (D'D)^{-1} D' dN(t_i) over at-risk rows D = (1, X, Z) (or just
 * the intercept). Increments with fewer than min_at_risk rows or a singular
 * design are masked and everything after them is undefined.
 */
inline AalenFit aalen_additive_fit(const SurvivalSample& sample, std::span<const std::size_t> eval_idx,
                                   bool covariates = true, std::size_t min_at_risk = 0) {
  if (eval_idx.empty()) throw UsageError("evaluation set is empty");
  const std::size_t q = sample.q(), d = sample.d();
  const std::size_t p = covariates ? 2 + d : 1;
  if (min_at_risk == 0) min_at_risk = 3 * p;
  AalenFit fit;
  fit.names.push_back("intercept");
  if (covariates) {
    fit.names.push_back("x");
    for (std::size_t k = 0; k < d; ++k) fit.names.push_back("z" + std::to_string(k + 1));
  }
  fit.cumulative = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p));
  fit.defined.assign(q, 1);
  fit.at_risk.assign(q, 0);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  bool dead = false;
  Eigen::VectorXd row(static_cast<Eigen::Index>(p));
  for (std::size_t i = 1; i < q; ++i) {
    Eigen::MatrixXd dtd = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    Eigen::VectorXd dtn = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    std::size_t m = 0;
    for (std::size_t j : eval_idx) {
      const auto& s = sample[j];
      if (!s.at_risk(i)) continue;
      ++m;
      row(0) = 1.0;
      if (covariates) {
        row(1) = s.x(i);
        for (std::size_t k = 0; k < d; ++k) row(static_cast<Eigen::Index>(2 + k)) = s.z(i, k);
      }
      dtd.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0);
      if (s.event_increment(i) > 0) dtn += row;
    }
    fit.at_risk[i] = m;
    if (!dead) {
      bool ok = m >= min_at_risk;
      if (ok) {
        Eigen::MatrixXd full = dtd.selfadjointView<Eigen::Lower>();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(full);
        const auto dv = ldlt.vectorD();
        ok = ldlt.info() == Eigen::Success && dv.minCoeff() > 1e-10 * std::max(1.0, dv.cwiseAbs().maxCoeff());
        if (ok) acc += ldlt.solve(dtn);
      }
      if (!ok) dead = true;
    }
    if (dead) {
      fit.defined[i] = 0;
      fit.cumulative.row(static_cast<Eigen::Index>(i)).setConstant(std::numeric_limits<double>::quiet_NaN());
    } else {
      fit.cumulative.row(static_cast<Eigen::Index>(i)) = acc.transpose();
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Monte Carlo ground truth

struct AcmOracle {
  std::vector<double> gamma;  // on the grid
  std::vector<double> se;     // batch-means standard error
  std::vector<double> rho;    // rho(t_i) = E[Y_{t_i} (X - pi_{t_i})^2]
  std::size_t mc_size = 0;
  std::size_t batches = 0;

  // rho matched to grid data with events snapped up: index i uses t_{i-1}
  std::vector<double> rho_grid_aligned() const {
    std::vector<double> r(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) r[i] = rho[i > 0 ? i - 1 : 0];
    return r;
  }
};

/**
 * gamma_t = int_0^t E[G_s (hfull_s - h_s)] ds with G = Y (X - pi)/rho.
 * Y_s is integrated out through the conditional survival exp(-s^2 rate).
 * Batch b supplies the numerator and the remaining batches supply rho.
 */
inline AcmOracle acm_oracle(const AcmSimConfig& c, std::span<const double> beta, const TimeGrid& grid,
                            std::size_t mc_size = 200000, std::uint64_t seed = 7, std::size_t batches = 20,
                            std::size_t sub = 4) {
  if (batches < 2 || mc_size < 2 * batches) throw ConfigError("acm_oracle: mc_size too small for the batches");
  const std::size_t q = grid.size();
  const std::size_t per = mc_size / batches;
  std::vector<double> xs(per * batches), rates(per * batches);
  std::vector<std::vector<double>> zs(per * batches);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    auto rng = make_stream(seed, StreamTag::Oracle, c.replicate, j);
    auto s = draw_acm_subject(c, beta, grid, rng);
    xs[j] = s.x;
    zs[j] = s.z;
    rates[j] = acm_rate(c, beta, s.x, s.z);
  }
  const std::size_t total = per * batches;
  std::vector<std::vector<double>> gb(batches, std::vector<double>(q, 0.0));

  auto moments = [&](double t, std::size_t lo, std::size_t hi, double& rho, double& num) {
    rho = 0.0;
    num = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
      const double surv = std::exp(-t * t * rates[j]);
      const double pi = acm_pi(c, t, zs[j]);
      const double r = xs[j] - pi;
      rho += surv * r * r;
      num += surv * r * (acm_hfull(c, beta, t, xs[j], zs[j]) - acm_h(c, beta, t, zs[j]));
    }
  };

  const double w = grid.step() / static_cast<double>(sub);
  std::vector<double> acc(batches, 0.0), rb(batches), nb(batches);
  for (std::size_t l = 1; l < q; ++l) {
    for (std::size_t m = 0; m < sub; ++m) {
      const double t = grid[l - 1] + (static_cast<double>(m) + 0.5) * w;
      double rsum = 0.0;
      for (std::size_t b = 0; b < batches; ++b) {
        moments(t, b * per, (b + 1) * per, rb[b], nb[b]);
        rsum += rb[b];
      }
      // numerator from batch b, rho from the other batches
      for (std::size_t b = 0; b < batches; ++b) {
        const double rho_out = (rsum - rb[b]) / static_cast<double>(total - per);
        acc[b] += w * (nb[b] / static_cast<double>(per)) / rho_out;
      }
    }
    for (std::size_t b = 0; b < batches; ++b) gb[b][l] = acc[b];
  }
  AcmOracle o;
  o.mc_size = per * batches;
  o.batches = batches;
  o.gamma.assign(q, 0.0);
  o.se.assign(q, 0.0);
  for (std::size_t i = 0; i < q; ++i) {
    double m = 0.0;
    for (std::size_t b = 0; b < batches; ++b) m += gb[b][i];
    m /= static_cast<double>(batches);
    double ss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) ss += (gb[b][i] - m) * (gb[b][i] - m);
    o.gamma[i] = m;
    o.se[i] = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  }
  o.rho.assign(q, 0.0);
  for (std::size_t i = 0; i < q; ++i) {
    double r, n;
    moments(grid[i], 0, total, r, n);
    o.rho[i] = r / static_cast<double>(total);
  }
  return o;
}

inline AcmOracle acm_oracle(const AcmSimConfig& c, const TimeGrid& grid, std::size_t mc_size = 200000,
                            std::uint64_t seed = 7) {
  const auto beta = draw_acm_beta(c);
  return acm_oracle(c, beta, grid, mc_size, seed);
}

/**
 * Grid ACM for the Cox engine under the null: sum_l E[G_l dN_l] with the
 * exact projection, by Monte Carlo with batch means.
 */
inline AcmOracle acm_oracle(const CoxSimConfig& c, double beta1, std::size_t mc_size = 20000,
                            std::uint64_t seed = 7, std::size_t batches = 20) {
  if (c.rho0 != 0.0) throw ConfigError("the Cox ACM oracle needs the exact projection, available only for rho0 = 0");
  const TimeGrid grid(c.q);
  const CoxKernels kern(c, grid);
  const std::size_t q = c.q, per = mc_size / batches;
  if (per < 4) throw ConfigError("acm_oracle: mc_size too small for the batches");
  const CoxOracleProjection proj(c, grid);
  // first pass: rho on the grid
  std::vector<SubjectPath> subs;
  subs.reserve(per * batches);
  for (std::size_t j = 0; j < per * batches; ++j) {
    auto rng = make_stream(seed, StreamTag::Oracle, 1, j);
    subs.push_back(to_subject_path(draw_cox_subject(c, grid, kern, beta1, rng)));
  }
  std::vector<std::vector<double>> resid(subs.size());
  std::vector<double> rho(q, 0.0);
  for (std::size_t j = 0; j < subs.size(); ++j) {
    auto pi = proj.predict(subs[j], grid);
    for (std::size_t i = 0; i < q; ++i) pi[i] = subs[j].at_risk(i) * (subs[j].x(i) - pi[i]);
    for (std::size_t i = 0; i < q; ++i) rho[i] += pi[i] * pi[i];
    resid[j] = std::move(pi);
  }
  for (double& v : rho) v = std::max(v / static_cast<double>(subs.size()), 1e-12);
  std::vector<std::vector<double>> gb(batches, std::vector<double>(q, 0.0));
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t j = b * per; j < (b + 1) * per; ++j) {
      const auto& s = subs[j];
      if (!s.delta() || s.event_index() < 1) continue;
      const std::size_t e = s.event_index();
      const double v = resid[j][e] / rho[e] / static_cast<double>(per);
      for (std::size_t i = e; i < q; ++i) gb[b][i] += v;
    }
  }
  AcmOracle o;
  o.mc_size = per * batches;
  o.batches = batches;
  o.gamma.assign(q, 0.0);
  o.se.assign(q, 0.0);
  o.rho = rho;
  for (std::size_t i = 0; i < q; ++i) {
    double m = 0.0, ss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) m += gb[b][i];
    m /= static_cast<double>(batches);
    for (std::size_t b = 0; b < batches; ++b) ss += (gb[b][i] - m) * (gb[b][i] - m);
    o.gamma[i] = m;
    o.se[i] = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  }
  return o;
}

}  // namespace hazardlean
