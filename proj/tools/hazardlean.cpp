// hazardlean command-line front end
#include <iostream>

#include "CLI11.hpp"
#include "hazardlean/experiments.hpp"

using namespace hazardlean;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out_dir = ".";
  std::string format = "json";
};

fs::path resolve(const Globals& g, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : fs::path(g.out_dir) / path;
}

void emit(const Globals& g, const nlohmann::json& j, const Table& t) {
  if (g.format == "csv")
    std::cout << t.to_csv();
  else
    std::cout << j.dump(2) << "\n";
}

// oracle[:<json config>] falls back to the dataset's own sidecar config
nlohmann::json oracle_config(const std::string& spec, const SurvivalSample& s) {
  if (spec.size() > 7) {
    const auto j = nlohmann::json::parse(read_text(spec.substr(7)));
    if (j.contains("metadata")) return j["metadata"];
    return j;
  }
  if (s.metadata().empty()) throw UsageError("oracle nuisances need the dataset's JSON sidecar or oracle:<config>");
  return s.metadata();
}

NuisanceFactory lct_factory(const std::string& nuisance, const SurvivalSample& s) {
  if (nuisance == "ridge+pooled") return ridge_pooled_factory();
  if (nuisance.rfind("oracle", 0) == 0) {
    const auto meta = oracle_config(nuisance, s);
    if (meta.value("engine", std::string()) != "cox") throw UsageError("lct oracle needs a Cox engine config");
    auto c = CoxSimConfig::from_json(meta.contains("config") ? meta["config"] : meta);
    const double b1 = meta.value("beta1", c.beta1);
    if (c.q != s.q()) throw UsageError("oracle config grid differs from the dataset");
    return fixed_factory(oracle_nuisances_cox(c, b1 > 0 ? b1 : calibrate_beta1(c)));
  }
  throw UsageError("unknown nuisance '" + nuisance + "' (ridge+pooled, oracle[:<config>])");
}

NuisanceFactory acm_factory(const std::string& nuisance, const SurvivalSample& s) {
  if (nuisance == "boosted") return acm_learned_factory();
  if (nuisance == "linear") return grid_pi_factory(std::make_shared<LinearRegressor>(), HazardLearner::Pooled);
  if (nuisance == "ridge+pooled") return ridge_pooled_factory();
  if (nuisance.rfind("oracle", 0) == 0) {
    const auto meta = oracle_config(nuisance, s);
    const auto engine = meta.value("engine", std::string());
    if (engine.rfind("acm-", 0) != 0) throw UsageError("acm oracle needs an ACM engine config");
    auto c = AcmSimConfig::from_json(meta.contains("config") ? meta["config"] : meta);
    std::vector<double> beta = meta.contains("beta") ? meta["beta"].get<std::vector<double>>() : draw_acm_beta(c);
    return fixed_factory(oracle_nuisances_acm(c, std::move(beta)));
  }
  throw UsageError("unknown nuisance '" + nuisance + "' (boosted, linear, ridge+pooled, oracle[:<config>])");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hazardlean: local covariance tests and Aalen covariance measures for survival data"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may also follow the subcommand
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "base directory for relative output paths")->capture_default_str();
  app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a dataset");
  std::string engine = "cox", kx = "constant", ky = "constant", sim_out = "data.csv";
  std::size_t n = 500, d = 0, q = 128, replicate = 0;
  double beta2 = -1.0, rho0 = 0.0, beta1 = 0.0;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--engine", engine)->check(CLI::IsMember({"cox", "acm-lin", "acm-par", "acm-bincox"}))->capture_default_str();
  sim->add_option("--n", n)->capture_default_str();
  sim->add_option("--d", d, "covariate dimension (cox: 1, acm default 4)");
  sim->add_option("--q", q)->capture_default_str();
  sim->add_option("--kernel-x", kx)->check(CLI::IsMember({"zero", "constant", "gaussian", "sine"}))->capture_default_str();
  sim->add_option("--kernel-y", ky)->check(CLI::IsMember({"zero", "constant", "gaussian", "sine"}))->capture_default_str();
  sim->add_option("--beta2", beta2)->capture_default_str();
  sim->add_option("--rho0", rho0)->capture_default_str();
  sim->add_option("--beta1", beta1, "Weibull scale; 0 calibrates on a pilot")->capture_default_str();
  sim->add_option("--replicate", replicate)->capture_default_str();
  sim->add_option("--seed", sim_seed, "overrides the global seed");
  sim->add_option("--out", sim_out, "CSV path; a .json sidecar is written next to it")->capture_default_str();

  // fit-nuisance
  auto* fitn = app.add_subcommand("fit-nuisance", "fit nuisance models on a dataset and write them as JSON");
  std::string fit_data, method = "ridge-hist", fit_out = "nuisance.json";
  std::optional<double> penalty;
  std::size_t pi_grid = 20;
  fitn->add_option("--data", fit_data)->required();
  fitn->add_option("--method", method)->check(CLI::IsMember({"ridge-hist", "pooled-hazard", "boosted"}))->capture_default_str();
  fitn->add_option("--penalty", penalty, "ridge 0.001 / hazard 1e-4 by default");
  fitn->add_option("--pi-grid-size", pi_grid)->check(CLI::PositiveNumber)->capture_default_str();
  fitn->add_option("--out", fit_out)->capture_default_str();

  // lct
  auto* lct = app.add_subcommand("lct", "cross-fitted local covariance test");
  std::string lct_data, statistic = "sup", lct_nuis = "ridge+pooled", lct_out = "lct.json";
  std::size_t lct_k = 5;
  double alpha = 0.05;
  lct->add_option("--data", lct_data)->required();
  lct->add_option("--k-folds", lct_k, "1 = no sample splitting")->check(CLI::PositiveNumber)->capture_default_str();
  lct->add_option("--alpha", alpha)->capture_default_str();
  lct->add_option("--statistic", statistic)->check(CLI::IsMember({"sup", "endpoint"}))->capture_default_str();
  lct->add_option("--nuisance", lct_nuis, "ridge+pooled | oracle[:<config.json>]")->capture_default_str();
  lct->add_option("--out", lct_out, "JSON path; the path CSV is written next to it")->capture_default_str();

  // acm
  auto* acm = app.add_subcommand("acm", "cross-fitted Aalen covariance measure");
  std::string acm_data, acm_nuis = "boosted", clip = "fixed:0.005", acm_out = "acm.json";
  std::size_t acm_k = 4;
  double t_report = 67.0 / 127.0;
  acm->add_option("--data", acm_data)->required();
  acm->add_option("--k-folds", acm_k, "1 = no sample splitting")->check(CLI::PositiveNumber)->capture_default_str();
  acm->add_option("--nuisance", acm_nuis, "boosted | linear | ridge+pooled | oracle[:<config.json>]")->capture_default_str();
  acm->add_option("--clip", clip, "fixed:<c> | theory")->capture_default_str();
  acm->add_option("--t-report", t_report)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  acm->add_option("--out", acm_out)->capture_default_str();

  // reproduce
  auto* rep = app.add_subcommand("reproduce", "run a figure preset");
  std::string figure, scale = "desk";
  rep->add_option("figure", figure, "fig2.1 fig2.2 fig2.4 fig2.5 fig4.1")->required();
  rep->add_option("--scale", scale)->check(CLI::IsMember({"desk", "full"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      const std::uint64_t seed = sim_seed.value_or(g.seed);
      const auto out = resolve(g, sim_out);
      SurvivalSample s = [&] {
        if (engine == "cox") {
          CoxSimConfig c;
          c.n = n;
          c.d = d == 0 ? 1 : d;
          c.q = q;
          c.kernel_x = parse_kernel(kx);
          c.kernel_y = parse_kernel(ky);
          c.beta2 = beta2;
          c.rho0 = rho0;
          c.beta1 = beta1;
          c.seed = seed;
          c.replicate = replicate;
          return simulate_cox_dataset(c);
        }
        AcmSimConfig c;
        c.setting = parse_setting(engine);
        c.n = n;
        c.d = d == 0 ? 4 : d;
        c.q = q;
        c.seed = seed;
        c.replicate = replicate;
        return simulate_acm_dataset(c);
      }();
      write_sample(out, s);
      const nlohmann::json j = {{"csv", out.string()}, {"sidecar", sidecar_path(out).string()},
                                {"n", s.n()}, {"events", s.event_count()}, {"metadata", s.metadata()}};
      Table t;
      t.columns = {"csv", "n", "events"};
      t.add({out.string(), std::to_string(s.n()), std::to_string(s.event_count())});
      emit(g, j, t);
    } else if (*fitn) {
      const auto s = read_sample(fit_data);
      const auto all = all_indices(s.n());
      nlohmann::json j;
      if (method == "ridge-hist") {
        j = fit_projection_ridge(s, all, penalty.value_or(0.001))->describe();
      } else if (method == "pooled-hazard") {
        j = fit_hazard_pooled(s, all, {}, penalty.value_or(1e-4))->describe();
      } else {
        const auto f = grid_pi_factory(std::make_shared<BoostedTreeRegressor>(default_pi_boost()),
                                       HazardLearner::Boosted, pi_grid, {}, penalty.value_or(1e-4))(s, all);
        j = {{"projection", f.projection->describe()}, {"hazard", f.hazard->describe()}};
      }
      j["trained_on"] = s.n();
      const auto out = resolve(g, fit_out);
      write_json(out, j);
      Table t;
      t.columns = {"method", "out"};
      t.add({method, out.string()});
      emit(g, {{"method", method}, {"out", out.string()}}, t);
    } else if (*lct) {
      const auto s = read_sample(lct_data);
      const auto factory = lct_factory(lct_nuis, s);
      const auto fit = lcm_crossfit(s, lct_k, factory, g.seed, 0);
      const auto r = lct_decide(fit, alpha, parse_statistic(statistic));
      const auto out = resolve(g, lct_out);
      auto csv = out;
      csv.replace_extension(".csv");
      const auto tab = path_table(s.grid(), {{"gamma", &r.fit.gamma_hat}, {"var", &r.fit.var_hat}});
      write_text(csv, tab.to_csv());
      nlohmann::json j = {{"gamma_path", r.fit.gamma_hat},
                          {"var_path", r.fit.var_hat},
                          {"t_stat", r.t_stat},
                          {"p_value", r.p_value},
                          {"decision", r.reject ? "reject" : "accept"},
                          {"statistic", statistic},
                          {"alpha", alpha},
                          {"critical_value", std::isfinite(r.critical) ? nlohmann::json(r.critical) : nlohmann::json(nullptr)},
                          {"n", s.n()},
                          {"seed", g.seed},
                          {"fit", r.fit.metadata}};
      write_json(out, j);
      Table t;
      t.columns = {"t_stat", "p_value", "decision"};
      t.add({fmt_double(r.t_stat), fmt_double(r.p_value), r.reject ? "reject" : "accept"});
      nlohmann::json brief = {{"t_stat", r.t_stat}, {"p_value", r.p_value}, {"decision", r.reject ? "reject" : "accept"},
                              {"out", out.string()}, {"csv", csv.string()}};
      emit(g, brief, t);
    } else if (*acm) {
      const auto s = read_sample(acm_data);
      const auto factory = acm_factory(acm_nuis, s);
      const auto fit = acm_crossfit(s, acm_k, factory, g.seed, 0, ClipSpec::parse(clip));
      const std::size_t ti = s.grid().floor_index(t_report);
      const auto out = resolve(g, acm_out);
      auto csv = out;
      csv.replace_extension(".csv");
      std::vector<double> defined(fit.defined.begin(), fit.defined.end());
      const auto tab = path_table(s.grid(), {{"gamma", &fit.reported}, {"var", &fit.reported_var}, {"defined", &defined}});
      write_text(csv, tab.to_csv());
      nlohmann::json rho = nlohmann::json::array();
      for (const auto& r : fit.rho_by_fold) rho.push_back({{"rho_tilde", r.rho_tilde}, {"valid", r.valid_mask}});
      nlohmann::json j = {{"gamma_path", json_path(fit.reported)},
                          {"var_path", json_path(fit.reported_var)},
                          {"gamma_unmasked", fit.gamma_check},
                          {"masks", {{"defined", fit.defined}, {"rho_by_fold", rho}}},
                          {"fold_meta", fit.metadata},
                          {"t_report", s.grid()[ti]},
                          {"gamma_at_t_report", std::isfinite(fit.reported[ti]) ? nlohmann::json(fit.reported[ti]) : nlohmann::json(nullptr)},
                          {"se_at_t_report", std::isfinite(fit.reported_var[ti]) ? nlohmann::json(std::sqrt(fit.reported_var[ti] / static_cast<double>(s.n()))) : nlohmann::json(nullptr)},
                          {"seed", g.seed}};
      write_json(out, j);
      Table t;
      t.columns = {"t_report", "gamma", "defined"};
      t.add({fmt_double(s.grid()[ti]), fmt_double(fit.reported[ti]), fit.defined[ti] ? "1" : "0"});
      emit(g, {{"t_report", s.grid()[ti]}, {"gamma", j["gamma_at_t_report"]}, {"out", out.string()}, {"csv", csv.string()}}, t);
    } else if (*rep) {
      const auto m = reproduce(figure, scale, g.seed, g.threads, fs::path(g.out_dir));
      Table t;
      t.columns = {"file", "sha1"};
      for (const auto& f : m["files"]) t.add({f["name"].get<std::string>(), f["sha1"].get<std::string>()});
      emit(g, m, t);
    }
  } catch (const StudyAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const CalibrationError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "usage error: bad JSON: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
