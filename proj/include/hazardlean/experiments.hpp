#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "hazardlean/acm.hpp"
#include "hazardlean/io.hpp"
#include "hazardlean/parallel.hpp"

namespace hazardlean {

enum class StudyKind { H0Pvalues, PowerCurve, AcmRmse, EndpointVsSup, PluginBias };

inline std::string study_name(StudyKind k) {
  switch (k) {
    case StudyKind::H0Pvalues: return "h0-pvalues";
    case StudyKind::PowerCurve: return "power-curve";
    case StudyKind::AcmRmse: return "acm-rmse";
    case StudyKind::EndpointVsSup: return "endpoint-vs-sup";
    case StudyKind::PluginBias: return "plugin-bias";
  }
  return "?";
}

inline StudyKind parse_study(const std::string& s) {
  for (auto k : {StudyKind::H0Pvalues, StudyKind::PowerCurve, StudyKind::AcmRmse, StudyKind::EndpointVsSup,
                 StudyKind::PluginBias})
    if (study_name(k) == s) return k;
  throw UsageError("unknown study '" + s + "'");
}

struct StudySpec {
  StudyKind study = StudyKind::H0Pvalues;
  std::vector<CoxSimConfig> cox_settings;  // n, seed, replicate are filled per unit
  std::vector<AcmSimConfig> acm_settings;
  std::vector<std::size_t> n_list{500};
  std::size_t replicates = 200;
  std::size_t k_folds = 5;
  std::string nuisance = "ridge+pooled";  // LCT studies: ridge+pooled | oracle
  std::vector<std::string> estimators;    // ACM study: aalen, x-acm, n-acm, x-acm-oracle, x-acm-linear
  double alpha = 0.05;
  double t_report = 67.0 / 127.0;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t oracle_mc = 200000;
  bool keep_paths = false;
  std::vector<std::size_t> poison;  // unit indices whose result is replaced by NaN
  double max_failure_fraction = 0.05;

  nlohmann::json to_json() const {
    nlohmann::json cs = nlohmann::json::array(), as = nlohmann::json::array();
    for (const auto& c : cox_settings) cs.push_back(c.to_json());
    for (const auto& a : acm_settings) as.push_back(a.to_json());
    return {{"study", study_name(study)},
            {"cox_settings", cs},
            {"acm_settings", as},
            {"n_list", n_list},
            {"replicates", replicates},
            {"k_folds", k_folds},
            {"nuisance", nuisance},
            {"estimators", estimators},
            {"alpha", alpha},
            {"t_report", t_report},
            {"seed", seed},
            {"oracle_mc", oracle_mc},
            {"poison", poison},
            {"max_failure_fraction", max_failure_fraction}};
  }
};

struct StudyRecord {
  std::string setting;
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::string estimator;
  bool ok = true;
  bool masked = false;
  std::string error;
  std::vector<double> values;  // aligned with StudyResult::value_names
  std::vector<double> path;    // optional full path
};

struct StudyResult {
  StudySpec spec;
  std::vector<std::string> value_names;
  std::vector<StudyRecord> records;
  Table summary;
  std::vector<StudyRecord> failures;
  nlohmann::json metadata = nlohmann::json::object();
  double runtime_seconds = 0.0;

  Table records_table() const {
    Table t;
    t.columns = {"setting", "n", "replicate", "estimator", "status"};
    for (const auto& v : value_names) t.columns.push_back(v);
    for (const auto& r : records) {
      std::vector<std::string> row{r.setting, std::to_string(r.n), std::to_string(r.replicate), r.estimator,
                                   r.ok ? (r.masked ? "masked" : "ok") : "failed"};
      for (double v : r.values) row.push_back(fmt_double(v));
      t.add(std::move(row));
    }
    return t;
  }

  Table failure_table() const {
    Table t;
    t.columns = {"setting", "n", "replicate", "estimator", "error"};
    for (const auto& r : failures) {
      std::string e = r.error;
      std::replace(e.begin(), e.end(), ',', ';');
      std::replace(e.begin(), e.end(), '\n', ' ');
      t.add({r.setting, std::to_string(r.n), std::to_string(r.replicate), r.estimator, e});
    }
    return t;
  }
};

class StudyAborted : public NumericError {
 public:
  using NumericError::NumericError;
};

// ---------------------------------------------------------------------------
// summaries

/** Kolmogorov distance between the empirical law of p and U(0,1). */
inline double ks_uniform(std::vector<double> p) {
  if (p.empty()) return NAN;
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double u = std::clamp(p[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

inline double ecdf_at(const std::vector<double>& sorted, double x) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

inline std::string cox_setting_label(const CoxSimConfig& c) {
  return "kx=" + kernel_name(c.kernel_x) + ";ky=" + kernel_name(c.kernel_y) + ";beta2=" + fmt_double(c.beta2) +
         ";rho0=" + fmt_double(c.rho0);
}

inline std::string acm_setting_label(const AcmSimConfig& c) {
  return setting_name(c.setting) + ";d=" + std::to_string(c.d);
}

struct GroupKey {
  std::string setting;
  std::size_t n;
  std::string estimator;
  bool operator<(const GroupKey& o) const {
    return std::tie(setting, n, estimator) < std::tie(o.setting, o.n, o.estimator);
  }
};

// groups in first-appearance order
inline std::vector<std::pair<GroupKey, std::vector<const StudyRecord*>>> group_records(
    const std::vector<StudyRecord>& recs) {
  std::vector<std::pair<GroupKey, std::vector<const StudyRecord*>>> out;
  std::map<GroupKey, std::size_t> at;
  for (const auto& r : recs) {
    GroupKey k{r.setting, r.n, r.estimator};
    auto it = at.find(k);
    if (it == at.end()) {
      at[k] = out.size();
      out.push_back({k, {}});
      it = at.find(k);
    }
    out[it->second].second.push_back(&r);
  }
  return out;
}

inline std::size_t value_index(const StudyResult& r, const std::string& name) {
  for (std::size_t i = 0; i < r.value_names.size(); ++i)
    if (r.value_names[i] == name) return i;
  throw UsageError("no value column " + name);
}

/** Rebuilds the summary table from the records alone. */
inline Table summarize(const StudyResult& res) {
  Table t;
  const auto groups = group_records(res.records);
  if (res.spec.study == StudyKind::AcmRmse) {
    t.columns = {"setting", "n", "estimator", "count", "masked", "failed", "bias", "bias_se", "rmse", "scaled_rmse"};
    const auto ie = value_index(res, "error");
    for (const auto& [k, rs] : groups) {
      std::size_t cnt = 0, masked = 0, failed = 0;
      double s = 0.0, s2 = 0.0;
      for (const auto* r : rs) {
        if (!r->ok) { ++failed; continue; }
        if (r->masked) { ++masked; continue; }
        ++cnt;
        s += r->values[ie];
        s2 += r->values[ie] * r->values[ie];
      }
      const double m = cnt ? s / static_cast<double>(cnt) : NAN;
      const double var = cnt > 1 ? (s2 - static_cast<double>(cnt) * m * m) / static_cast<double>(cnt - 1) : NAN;
      const double rmse = cnt ? std::sqrt(s2 / static_cast<double>(cnt)) : NAN;
      t.add({k.setting, std::to_string(k.n), k.estimator, std::to_string(cnt), std::to_string(masked),
             std::to_string(failed), fmt_double(m), fmt_double(std::sqrt(var / static_cast<double>(cnt))),
             fmt_double(rmse), fmt_double(std::sqrt(static_cast<double>(k.n)) * rmse)});
    }
  } else if (res.spec.study == StudyKind::PluginBias) {
    t.columns = {"setting", "n", "estimator", "count", "failed", "mean_gamma1", "se", "sd"};
    const auto ig = value_index(res, "gamma1");
    for (const auto& [k, rs] : groups) {
      std::size_t cnt = 0, failed = 0;
      double s = 0.0, s2 = 0.0;
      for (const auto* r : rs) {
        if (!r->ok) { ++failed; continue; }
        ++cnt;
        s += r->values[ig];
        s2 += r->values[ig] * r->values[ig];
      }
      const double m = cnt ? s / static_cast<double>(cnt) : NAN;
      const double sd = cnt > 1 ? std::sqrt((s2 - static_cast<double>(cnt) * m * m) / static_cast<double>(cnt - 1)) : NAN;
      t.add({k.setting, std::to_string(k.n), k.estimator, std::to_string(cnt), std::to_string(failed), fmt_double(m),
             fmt_double(sd / std::sqrt(static_cast<double>(cnt))), fmt_double(sd)});
    }
  } else {
    t.columns = {"setting", "n", "statistic", "count", "failed", "rejection_rate", "rate_se", "ks"};
    const auto ip = value_index(res, "p_sup"), ie = value_index(res, "p_endpoint");
    for (const auto& [k, rs] : groups) {
      for (const auto& [stat, col] : {std::pair<std::string, std::size_t>{"sup", ip}, {"endpoint", ie}}) {
        std::vector<double> p;
        std::size_t failed = 0;
        for (const auto* r : rs) {
          if (!r->ok) { ++failed; continue; }
          p.push_back(r->values[col]);
        }
        double rej = 0.0;
        for (double v : p) rej += v < res.spec.alpha ? 1.0 : 0.0;
        const double cnt = static_cast<double>(p.size());
        const double rate = p.empty() ? NAN : rej / cnt;
        t.add({k.setting, std::to_string(k.n), stat, std::to_string(p.size()), std::to_string(failed),
               fmt_double(rate), fmt_double(std::sqrt(rate * (1.0 - rate) / cnt)), fmt_double(ks_uniform(p))});
      }
    }
  }
  return t;
}

/** ECDF of p-values on a 0.01 grid, one block per (setting, n, statistic). */
inline Table pvalue_ecdf_table(const StudyResult& res, const std::string& setting_filter = "") {
  Table t;
  t.columns = {"setting", "n", "statistic", "p", "ecdf"};
  const auto ip = value_index(res, "p_sup"), ie = value_index(res, "p_endpoint");
  for (const auto& [k, rs] : group_records(res.records)) {
    if (!setting_filter.empty() && k.setting != setting_filter) continue;
    for (const auto& [stat, col] : {std::pair<std::string, std::size_t>{"sup", ip}, {"endpoint", ie}}) {
      std::vector<double> p;
      for (const auto* r : rs)
        if (r->ok) p.push_back(r->values[col]);
      std::sort(p.begin(), p.end());
      if (p.empty()) continue;
      for (int g = 0; g <= 100; ++g) {
        const double x = g / 100.0;
        t.add({k.setting, std::to_string(k.n), stat, fmt_double(x), fmt_double(ecdf_at(p, x))});
      }
    }
  }
  return t;
}

/** Pointwise mean and 5%/95% quantiles of stored paths by estimator. */
inline Table path_band_table(const StudyResult& res, const TimeGrid& grid) {
  Table t;
  t.columns = {"setting", "n", "estimator", "t", "mean", "q05", "q95"};
  for (const auto& [k, rs] : group_records(res.records)) {
    std::vector<const std::vector<double>*> ps;
    for (const auto* r : rs)
      if (r->ok && r->path.size() == grid.size()) ps.push_back(&r->path);
    if (ps.empty()) continue;
    std::vector<double> col(ps.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double m = 0.0;
      for (std::size_t j = 0; j < ps.size(); ++j) m += (col[j] = (*ps[j])[i]);
      m /= static_cast<double>(ps.size());
      std::sort(col.begin(), col.end());
      auto qt = [&](double a) { return col[static_cast<std::size_t>(a * static_cast<double>(col.size() - 1) + 0.5)]; };
      t.add({k.setting, std::to_string(k.n), k.estimator, fmt_double(grid[i]), fmt_double(m), fmt_double(qt(0.05)),
             fmt_double(qt(0.95))});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// study runners

namespace detail {

struct Unit {
  std::size_t setting, n_pos, replicate;
};

inline std::vector<Unit> make_units(std::size_t settings, std::size_t ns, std::size_t reps) {
  std::vector<Unit> u;
  u.reserve(settings * ns * reps);
  for (std::size_t s = 0; s < settings; ++s)
    for (std::size_t k = 0; k < ns; ++k)
      for (std::size_t r = 0; r < reps; ++r) u.push_back({s, k, r});
  return u;
}

// Runs every unit, isolates failures, and flattens records in unit order.
inline void run_units(StudyResult& res, const std::vector<Unit>& units,
                      const std::function<std::vector<StudyRecord>(const Unit&)>& body,
                      const std::function<std::vector<StudyRecord>(const Unit&, const std::string&)>& on_fail) {
  std::vector<std::vector<StudyRecord>> out(units.size());
  std::vector<char> poisoned(units.size(), 0);
  for (std::size_t p : res.spec.poison)
    if (p < units.size()) poisoned[p] = 1;
  parallel_for(units.size(), res.spec.threads, [&](std::size_t i) {
    try {
      auto recs = body(units[i]);
      if (poisoned[i])
        for (auto& r : recs)
          for (double& v : r.values) v = NAN;
      for (auto& r : recs) {
        if (!r.ok || r.masked) continue;
        for (double v : r.values)
          if (!std::isfinite(v)) {
            r.ok = false;
            r.error = "non-finite result";
          }
      }
      out[i] = std::move(recs);
    } catch (const std::exception& e) {
      out[i] = on_fail(units[i], e.what());
    }
  });
  std::size_t total = 0;
  for (auto& v : out)
    for (auto& r : v) {
      ++total;
      if (!r.ok) {
        res.failures.push_back(r);
        r.values.assign(res.value_names.size(), NAN);
        r.path.clear();
      }
      res.records.push_back(std::move(r));
    }
  if (total > 0 && static_cast<double>(res.failures.size()) > res.spec.max_failure_fraction * static_cast<double>(total))
    throw StudyAborted("study aborted: " + std::to_string(res.failures.size()) + " of " + std::to_string(total) +
                       " replicate results failed; first error: " + res.failures.front().error);
}

}  // namespace detail

/** Nuisance factory for one Cox dataset. */
inline NuisanceFactory cox_factory(const std::string& nuisance, const CoxSimConfig& c, double beta1) {
  if (nuisance == "ridge+pooled") return ridge_pooled_factory();
  if (nuisance == "oracle") return fixed_factory(oracle_nuisances_cox(c, beta1));
  throw UsageError("unknown nuisance '" + nuisance + "' (ridge+pooled, oracle)");
}

/**
 * X-LCT replicates over Cox settings and sample sizes. Each record carries
 * the sup and endpoint p-values of the same fit.
 */
inline StudyResult run_lct_study(const StudySpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  StudyResult res;
  res.spec = spec;
  res.value_names = {"t_stat_sup", "p_sup", "t_stat_endpoint", "p_endpoint", "gamma1", "var1"};
  if (spec.cox_settings.empty() && spec.replicates > 0) throw UsageError("study has no Cox settings");
  // beta1 is calibrated once per (setting, n) and shared by the replicates
  std::vector<std::vector<double>> beta1(spec.cox_settings.size(), std::vector<double>(spec.n_list.size()));
  std::vector<std::vector<NuisanceFit>> oracle(spec.cox_settings.size());
  for (std::size_t s = 0; s < spec.cox_settings.size() && spec.replicates > 0; ++s)
    for (std::size_t k = 0; k < spec.n_list.size(); ++k) {
      auto c = spec.cox_settings[s];
      c.n = spec.n_list[k];
      c.seed = spec.seed;
      beta1[s][k] = c.beta1 > 0 ? c.beta1 : calibrate_beta1(c);
      if (spec.nuisance == "oracle") oracle[s].push_back(oracle_nuisances_cox(c, beta1[s][k]));
    }
  const auto units = detail::make_units(spec.cox_settings.size(), spec.n_list.size(), spec.replicates);
  auto label = [&](const detail::Unit& u) { return cox_setting_label(spec.cox_settings[u.setting]); };
  detail::run_units(
      res, units,
      [&](const detail::Unit& u) {
        auto c = spec.cox_settings[u.setting];
        c.n = spec.n_list[u.n_pos];
        c.seed = spec.seed;
        c.replicate = u.replicate;
        c.beta1 = beta1[u.setting][u.n_pos];
        const auto sample = simulate_cox_dataset(c);
        const double b1 = sample.metadata()["beta1"].get<double>();
        NuisanceFactory factory;
        if (spec.nuisance == "oracle")
          factory = b1 == c.beta1 ? fixed_factory(oracle[u.setting][u.n_pos]) : cox_factory("oracle", c, b1);
        else
          factory = cox_factory(spec.nuisance, c, b1);
        auto fit = lcm_crossfit(sample, spec.k_folds, factory, spec.seed, u.replicate);
        const auto sup = lct_decide(fit, spec.alpha, Statistic::Sup);
        const auto end = lct_decide(fit, spec.alpha, Statistic::Endpoint);
        StudyRecord r{label(u), c.n, u.replicate, "x-lct", true, false, "", {}, {}};
        r.values = {sup.t_stat, sup.p_value, end.t_stat, end.p_value, fit.gamma_hat.back(), fit.var_hat.back()};
        if (spec.keep_paths) r.path = fit.gamma_hat;
        return std::vector<StudyRecord>{std::move(r)};
      },
      [&](const detail::Unit& u, const std::string& err) {
        return std::vector<StudyRecord>{
            {label(u), spec.n_list[u.n_pos], u.replicate, "x-lct", false, false, err, {}, {}}};
      });
  nlohmann::json b = nlohmann::json::array();
  for (std::size_t s = 0; s < beta1.size(); ++s)
    for (std::size_t k = 0; k < spec.n_list.size(); ++k)
      b.push_back({{"setting", cox_setting_label(spec.cox_settings[s])}, {"n", spec.n_list[k]}, {"beta1", beta1[s][k]}});
  res.metadata = {{"beta1", b}};
  res.summary = summarize(res);
  res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline StudyResult run_h0_study(StudySpec spec) {
  for (const auto& c : spec.cox_settings)
    if (c.rho0 != 0.0) throw UsageError("an H0 study needs rho0 = 0 in every setting");
  if (spec.study != StudyKind::EndpointVsSup) spec.study = StudyKind::H0Pvalues;
  return run_lct_study(spec);
}

inline StudyResult run_power_study(StudySpec spec) {
  spec.study = StudyKind::PowerCurve;
  return run_lct_study(spec);
}

/**
 * Plug-in, no-split and cross-fitted LCM estimates of gamma on H0 data.
 * The plug-in hazard is fitted on all subjects.
 */
inline StudyResult run_plugin_bias_study(StudySpec spec) {
  spec.study = StudyKind::PluginBias;
  const auto t0 = std::chrono::steady_clock::now();
  StudyResult res;
  res.spec = spec;
  res.value_names = {"gamma1"};
  std::vector<std::vector<double>> beta1(spec.cox_settings.size(), std::vector<double>(spec.n_list.size()));
  for (std::size_t s = 0; s < spec.cox_settings.size() && spec.replicates > 0; ++s)
    for (std::size_t k = 0; k < spec.n_list.size(); ++k) {
      auto c = spec.cox_settings[s];
      c.n = spec.n_list[k];
      c.seed = spec.seed;
      beta1[s][k] = c.beta1 > 0 ? c.beta1 : calibrate_beta1(c);
    }
  // Nonparametric hazard: boosted trees over a time-only offset, with depth
  // and tree count tuned once per (setting, n) by 5-fold CV on replicate 0.
  // The projection is ridge with per-time GCV penalties.
  std::vector<std::vector<BoostParams>> boost(spec.cox_settings.size(), std::vector<BoostParams>(spec.n_list.size()));
  res.metadata["hazard_tuning"] = nlohmann::json::array();
  for (std::size_t s = 0; s < spec.cox_settings.size() && spec.replicates > 0; ++s)
    for (std::size_t k = 0; k < spec.n_list.size(); ++k) {
      auto c = spec.cox_settings[s];
      c.n = spec.n_list[k];
      c.seed = spec.seed;
      c.replicate = 0;
      c.beta1 = beta1[s][k];
      const auto pilot = simulate_cox_dataset(c);
      auto rng = make_stream(spec.seed, StreamTag::Pilot, s, k);
      const auto plan = FoldPlan::random(pilot.n(), 5, rng);
      const auto tun = tune_hazard_boost(pilot, all_indices(pilot.n()), plan, {1, 2, 3}, {10, 20, 40, 80, 160, 320},
                                         {}, default_hazard_boost(), 1e-4, false);
      boost[s][k] = tun.best;
      res.metadata["hazard_tuning"].push_back(
          {{"setting", cox_setting_label(spec.cox_settings[s])}, {"n", c.n}, {"tuning", tun.to_json()}});
    }
  const auto units = detail::make_units(spec.cox_settings.size(), spec.n_list.size(), spec.replicates);
  const std::vector<std::string> names{"plug-in", "double-no-split", "x-lcm"};
  auto label = [&](const detail::Unit& u) { return cox_setting_label(spec.cox_settings[u.setting]); };
  detail::run_units(
      res, units,
      [&](const detail::Unit& u) {
        auto c = spec.cox_settings[u.setting];
        c.n = spec.n_list[u.n_pos];
        c.seed = spec.seed;
        c.replicate = u.replicate;
        c.beta1 = beta1[u.setting][u.n_pos];
        const auto sample = simulate_cox_dataset(c);
        const auto all = all_indices(sample.n());
        const auto& bp = boost[u.setting][u.n_pos];
        const auto factory = ridge_boosted_factory(0.001, false, {}, 1e-4, true, bp);
        std::vector<std::vector<double>> paths;
        paths.push_back(lcm_plugin(sample, all, *fit_hazard_boosted(sample, all, {}, bp, 1e-4, false)));
        paths.push_back(lcm_crossfit(sample, FoldPlan::no_split(sample.n()), factory).gamma_hat);
        paths.push_back(lcm_crossfit(sample, spec.k_folds, factory, spec.seed, u.replicate).gamma_hat);
        std::vector<StudyRecord> out;
        for (std::size_t e = 0; e < names.size(); ++e) {
          StudyRecord r{label(u), c.n, u.replicate, names[e], true, false, "", {paths[e].back()}, {}};
          if (spec.keep_paths) r.path = paths[e];
          out.push_back(std::move(r));
        }
        return out;
      },
      [&](const detail::Unit& u, const std::string& err) {
        std::vector<StudyRecord> out;
        for (const auto& nm : names) out.push_back({label(u), spec.n_list[u.n_pos], u.replicate, nm, false, false, err, {}, {}});
        return out;
      });
  res.summary = summarize(res);
  res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline NuisanceFactory acm_learned_factory() {
  return grid_pi_factory(std::make_shared<BoostedTreeRegressor>(default_pi_boost()), HazardLearner::Pooled);
}

/**
 * ACM estimators at t_report against the Monte Carlo oracle. The oracle is
 * computed once per setting with the replicate-0 coefficient draw; the target
 * at t_report does not depend on the draw in the partially additive designs.
 */
inline StudyResult run_acm_study(StudySpec spec) {
  spec.study = StudyKind::AcmRmse;
  const auto t0 = std::chrono::steady_clock::now();
  StudyResult res;
  res.spec = spec;
  res.value_names = {"estimate", "truth", "error"};
  if (spec.estimators.empty()) spec.estimators = res.spec.estimators = {"aalen", "x-acm", "n-acm"};
  for (const auto& e : spec.estimators)
    if (e != "aalen" && e != "x-acm" && e != "n-acm" && e != "x-acm-oracle" && e != "x-acm-linear")
      throw UsageError("unknown ACM estimator '" + e + "'");
  std::vector<double> truth(spec.acm_settings.size(), NAN), truth_se(spec.acm_settings.size(), NAN);
  std::size_t ti = 0;
  for (std::size_t s = 0; s < spec.acm_settings.size() && spec.replicates > 0; ++s) {
    auto c = spec.acm_settings[s];
    c.seed = spec.seed;
    c.replicate = 0;
    const TimeGrid grid(c.q);
    ti = grid.floor_index(spec.t_report);
    const auto o = acm_oracle(c, grid, spec.oracle_mc, spec.seed);
    truth[s] = o.gamma[ti];
    truth_se[s] = o.se[ti];
  }
  const auto units = detail::make_units(spec.acm_settings.size(), spec.n_list.size(), spec.replicates);
  auto label = [&](const detail::Unit& u) { return acm_setting_label(spec.acm_settings[u.setting]); };
  detail::run_units(
      res, units,
      [&](const detail::Unit& u) {
        auto c = spec.acm_settings[u.setting];
        c.n = spec.n_list[u.n_pos];
        c.seed = spec.seed;
        c.replicate = u.replicate;
        const auto sample = simulate_acm_dataset(c);
        const double th = truth[u.setting];
        std::vector<StudyRecord> out;
        for (const auto& e : spec.estimators) {
          StudyRecord r{label(u), c.n, u.replicate, e, true, false, "", {}, {}};
          double est = NAN;
          try {
            if (e == "aalen") {
              const auto a = aalen_additive_fit(sample, all_indices(sample.n()));
              r.masked = !a.defined[ti];
              est = a.at(ti, "x");
            } else {
              NuisanceFactory f;
              if (e == "x-acm-oracle")
                f = fixed_factory(oracle_nuisances_acm(c, draw_acm_beta(c)));
              else if (e == "x-acm-linear")
                f = grid_pi_factory(std::make_shared<LinearRegressor>(), HazardLearner::Pooled);
              else
                f = acm_learned_factory();
              const auto fit = e == "n-acm" ? acm_crossfit(sample, FoldPlan::no_split(sample.n()), f)
                                            : acm_crossfit(sample, spec.k_folds, f, spec.seed, u.replicate);
              r.masked = !fit.defined_at(ti);
              est = fit.reported[ti];
            }
          } catch (const std::exception& ex) {
            r.ok = false;
            r.error = ex.what();
          }
          r.values = {est, th, est - th};
          if (r.masked) r.values = {NAN, th, NAN};
          out.push_back(std::move(r));
        }
        return out;
      },
      [&](const detail::Unit& u, const std::string& err) {
        std::vector<StudyRecord> out;
        for (const auto& e : spec.estimators)
          out.push_back({label(u), spec.n_list[u.n_pos], u.replicate, e, false, false, err, {}, {}});
        return out;
      });
  nlohmann::json tj = nlohmann::json::array();
  for (std::size_t s = 0; s < truth.size(); ++s)
    tj.push_back({{"setting", acm_setting_label(spec.acm_settings[s])}, {"truth", truth[s]}, {"truth_se", truth_se[s]}});
  res.metadata = {{"oracle", tj}, {"t_index", ti}};
  res.summary = summarize(res);
  res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline StudyResult run_study(const StudySpec& spec) {
  switch (spec.study) {
    case StudyKind::H0Pvalues:
    case StudyKind::EndpointVsSup: return run_h0_study(spec);
    case StudyKind::PowerCurve: return run_power_study(spec);
    case StudyKind::AcmRmse: return run_acm_study(spec);
    case StudyKind::PluginBias: return run_plugin_bias_study(spec);
  }
  throw UsageError("unknown study");
}

// ---------------------------------------------------------------------------
// reproduce presets

/** SHA-1 of "blob <size>\0<content>", as git hashes file contents. */
inline std::string git_blob_hash(const std::string& content) {
  const std::string head = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, head.data(), head.size()) != 1 ||
      EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha1 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig2.1", "fig2.2", "fig2.4", "fig2.5", "fig4.1"};
  return ids;
}

inline std::vector<CoxSimConfig> cox_kernel_settings(std::vector<double> beta2s, std::vector<double> rho0s,
                                                     std::vector<HistKernel> kernels) {
  std::vector<CoxSimConfig> out;
  for (double r : rho0s)
    for (auto k : kernels)
      for (double b : beta2s) {
        CoxSimConfig c;
        c.kernel_x = c.kernel_y = k;
        c.beta2 = b;
        c.rho0 = r;
        out.push_back(c);
      }
  return out;
}

/** Study spec behind a figure id at a given scale. */
inline StudySpec figure_preset(const std::string& id, const std::string& scale, std::uint64_t seed) {
  if (scale != "desk" && scale != "full") throw UsageError("scale must be desk or full");
  const bool full = scale == "full";
  const std::vector<HistKernel> all_k{HistKernel::Zero, HistKernel::Constant, HistKernel::Gaussian, HistKernel::Sine};
  StudySpec s;
  s.seed = seed;
  if (id == "fig2.1" || id == "fig2.2") {
    s.study = StudyKind::PluginBias;
    s.cox_settings = cox_kernel_settings({-1.0}, {0.0}, {HistKernel::Constant});
    s.n_list = {500};
    s.replicates = full ? 1000 : (id == "fig2.1" ? 300 : 100);
    s.keep_paths = id == "fig2.2";
  } else if (id == "fig2.4") {
    s.study = StudyKind::H0Pvalues;
    s.cox_settings = cox_kernel_settings({-1.0, 1.0}, {0.0}, all_k);
    s.n_list = full ? std::vector<std::size_t>{100, 500, 1000, 2000} : std::vector<std::size_t>{100, 500, 2000};
    s.replicates = full ? 500 : 100;
  } else if (id == "fig2.5") {
    s.study = StudyKind::PowerCurve;
    s.cox_settings = full ? cox_kernel_settings({-1.0, 1.0}, {0.0, 5.0, 10.0}, all_k)
                          : cox_kernel_settings({-1.0}, {0.0, 5.0, 10.0}, all_k);
    s.n_list = full ? std::vector<std::size_t>{100, 500, 1000, 2000} : std::vector<std::size_t>{500, 1000};
    s.replicates = full ? 400 : 100;
  } else if (id == "fig4.1") {
    s.study = StudyKind::AcmRmse;
    for (auto st : {AcmSetting::Lin, AcmSetting::Par})
      for (std::size_t d : {4, 16}) {
        AcmSimConfig a;
        a.setting = st;
        a.d = d;
        s.acm_settings.push_back(a);
      }
    s.n_list = {200, 600, 1800};
    s.k_folds = 4;
    s.estimators = {"aalen", "x-acm", "n-acm"};
    s.replicates = full ? 500 : 40;
  } else {
    std::string valid;
    for (const auto& v : figure_ids()) valid += (valid.empty() ? "" : ", ") + v;
    throw UsageError("unknown figure id '" + id + "'; valid ids: " + valid);
  }
  return s;
}

struct OutputFile {
  std::string name;
  std::string content;
};

/** Files written for a figure; deterministic given the result. */
inline std::vector<OutputFile> figure_outputs(const std::string& id, const StudyResult& res) {
  std::vector<OutputFile> files;
  files.push_back({"records.csv", res.records_table().to_csv()});
  files.push_back({"summary.csv", res.summary.to_csv()});
  files.push_back({"failures.csv", res.failure_table().to_csv()});
  if (id == "fig2.4" || id == "fig2.5") {
    for (const auto& c : res.spec.cox_settings) {
      const auto lab = cox_setting_label(c);
      std::string fname = "ecdf_" + kernel_name(c.kernel_x) + "_beta2_" + fmt_double(c.beta2) + "_rho0_" + fmt_double(c.rho0) + ".csv";
      files.push_back({fname, pvalue_ecdf_table(res, lab).to_csv()});
    }
  }
  if (id == "fig2.2") files.push_back({"path_bands.csv", path_band_table(res, TimeGrid(res.spec.cox_settings.front().q)).to_csv()});
  return files;
}

inline nlohmann::json reproduce(const std::string& id, const std::string& scale, std::uint64_t seed,
                                std::size_t threads, const fs::path& out_dir) {
  auto spec = figure_preset(id, scale, seed);
  spec.threads = threads;
  const auto res = run_study(spec);
  const auto dir = out_dir / id;
  fs::create_directories(dir);
  const std::string spec_text = spec.to_json().dump(2);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : figure_outputs(id, res)) {
    write_text(dir / f.name, f.content);
    files.push_back({{"name", f.name}, {"sha1", git_blob_hash(f.content)}, {"bytes", f.content.size()}});
  }
  nlohmann::json manifest = {{"figure", id},
                             {"scale", scale},
                             {"seed", seed},
                             {"replicate_seeds", "stream(seed, replicate, subject)"},
                             {"spec", spec.to_json()},
                             {"inputs_sha1", git_blob_hash(spec_text)},
                             {"study_metadata", res.metadata},
                             {"failures", res.failures.size()},
                             {"files", files}};
  write_json(dir / "manifest.json", manifest);
  // kept apart so the manifest is byte-identical across runs
  write_json(dir / "runtime.json", {{"figure", id}, {"runtime_seconds", res.runtime_seconds}, {"threads", threads}});
  return manifest;
}

}  // namespace hazardlean
