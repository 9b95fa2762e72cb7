#include <gtest/gtest.h>

#include <cmath>

#include "hazardlean/lcm.hpp"
#include "hazardlean/nuisance.hpp"
#include "hazardlean/simulate.hpp"

using namespace hazardlean;

namespace {

// n subjects, d = 1, never failing; z iid uniform, x from the callback
template <class F>
SurvivalSample censored_sample(std::size_t n, std::size_t q, std::uint64_t seed, F xfun) {
  std::vector<SubjectPath> subs;
  for (std::size_t j = 0; j < n; ++j) {
    auto rng = make_stream(seed, StreamTag::MonteCarlo, 0, j);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(q), 1);
    for (std::size_t i = 0; i < q; ++i) z(static_cast<Eigen::Index>(i), 0) = 2.0 * rng.uniform() - 1.0;
    std::vector<double> x(q);
    for (std::size_t i = 0; i < q; ++i) x[i] = xfun(z, i, rng);
    subs.emplace_back(std::move(z), std::move(x), q - 1, false);
  }
  return SurvivalSample(TimeGrid(q), std::move(subs));
}

std::vector<std::size_t> iota_idx(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// same subject with z and x replaced from row `from` on
SubjectPath perturb_from(const SubjectPath& s, std::size_t from, double shift) {
  Eigen::MatrixXd z = s.z();
  auto x = s.x();
  for (std::size_t i = from; i < s.q(); ++i) {
    z.row(static_cast<Eigen::Index>(i)).array() += shift;
    x[i] += shift;
  }
  return SubjectPath(z, x, s.event_index(), s.delta());
}

SurvivalSample small_cox(std::size_t n, std::uint64_t seed) {
  CoxSimConfig c;
  c.n = n;
  c.q = 32;
  c.seed = seed;
  return simulate_cox_dataset(c);
}

}  // namespace

TEST(RidgeProjection, RecoversRealizableLinearHistory) {
  const std::size_t q = 6;
  const auto s = censored_sample(400, q, 1, [](const Eigen::MatrixXd& z, std::size_t i, Xoshiro256&) {
    return i == 0 ? 0.5 : 1.0 + 2.0 * z(static_cast<Eigen::Index>(i - 1), 0);
  });
  const auto m = fit_projection_ridge(s, iota_idx(s.n()), 1e-9);
  const auto& fits = m->fits();
  EXPECT_NEAR(fits[0].intercept, 0.5, 1e-9);
  for (std::size_t i = 1; i < q; ++i) {
    ASSERT_EQ(fits[i].weights.size(), i);
    EXPECT_NEAR(fits[i].intercept, 1.0, 1e-6);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NEAR(fits[i].weights[j], j + 1 == i ? 2.0 : 0.0, 1e-6);
  }
  const auto pred = m->predict(s[3], s.grid());
  for (std::size_t i = 0; i < q; ++i) EXPECT_NEAR(pred[i], s[3].x(i), 1e-6);
}

TEST(RidgeProjection, IndependentCovariateGivesFlatFit) {
  const std::size_t q = 5;
  const auto s = censored_sample(3000, q, 2, [](const Eigen::MatrixXd&, std::size_t, Xoshiro256& r) {
    return r.uniform();
  });
  const auto m = fit_projection_ridge(s, iota_idx(s.n()), 0.001);
  for (std::size_t i = 1; i < q; ++i) {
    EXPECT_NEAR(m->fits()[i].intercept, 0.5, 0.03);
    // se of a slope here is about 0.29 / sqrt(3000 * 1/3)
    for (double w : m->fits()[i].weights) EXPECT_LT(std::abs(w), 0.04);
  }
}

TEST(RidgeProjection, LargePenaltyShrinksToMean) {
  const std::size_t q = 5;
  const auto s = censored_sample(200, q, 3, [](const Eigen::MatrixXd& z, std::size_t i, Xoshiro256&) {
    return i == 0 ? 0.0 : 3.0 * z(0, 0);
  });
  const auto m = fit_projection_ridge(s, iota_idx(s.n()), 1e12);
  for (std::size_t i = 1; i < q; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < s.n(); ++j) mean += s[j].x(i) / static_cast<double>(s.n());
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(m->predict(s[j], s.grid())[i], mean, 1e-6);
  }
  EXPECT_THROW(fit_projection_ridge(s, iota_idx(s.n()), -1.0), DomainError);
}

TEST(RidgeProjection, GcvPicksSmallPenaltyForSignalAndLargeForNoise) {
  const std::size_t q = 5;
  const auto sig = censored_sample(300, q, 4, [](const Eigen::MatrixXd& z, std::size_t i, Xoshiro256& r) {
    return i == 0 ? 0.0 : z(static_cast<Eigen::Index>(i - 1), 0) + 0.1 * (r.uniform() - 0.5);
  });
  const auto noise = censored_sample(300, q, 5, [](const Eigen::MatrixXd&, std::size_t, Xoshiro256& r) {
    return r.uniform();
  });
  const auto ms = fit_projection_ridge(sig, iota_idx(300), 0.0, default_gcv_grid());
  const auto mn = fit_projection_ridge(noise, iota_idx(300), 0.0, default_gcv_grid());
  EXPECT_EQ(ms->describe()["penalty"], "gcv");
  for (std::size_t i = 1; i < q; ++i) {
    EXPECT_LT(ms->fits()[i].penalty, mn->fits()[i].penalty) << "time " << i;
    EXPECT_NEAR(ms->fits()[i].weights[i - 1], 1.0, 0.05);
  }
}

TEST(HistoryAudit, PredictionsUseOnlyEarlierRows) {
  const auto s = small_cox(150, 7);
  const auto idx = iota_idx(s.n());
  std::vector<std::shared_ptr<const ProjectionModel>> projs{fit_projection_ridge(s, idx, 0.001)};
  std::vector<std::shared_ptr<const HazardModel>> hazards{fit_hazard_pooled(s, idx),
                                                          fit_hazard_boosted(s, idx, {}, default_hazard_boost(), 1e-4, false)};
  for (std::size_t j : {0u, 5u, 77u}) {
    const auto& subj = s[j];
    for (std::size_t cut = 1; cut < s.q(); cut += 6) {
      const auto alt = perturb_from(subj, cut, 0.7);
      for (const auto& p : projs) {
        // pi at index i may use Z rows < i
        const auto a = p->predict(subj, s.grid()), b = p->predict(alt, s.grid());
        for (std::size_t i = 0; i <= cut; ++i) EXPECT_EQ(a[i], b[i]) << "projection i=" << i;
      }
      for (const auto& h : hazards) {
        const auto a = h->predict(subj, s.grid()), b = h->predict(alt, s.grid());
        for (std::size_t i = 0; i <= cut; ++i) EXPECT_EQ(a[i], b[i]) << "hazard i=" << i;
      }
    }
  }
}

TEST(CrossFitting, NuisancesIgnoreHeldOutSubjects) {
  const auto s = small_cox(120, 8);
  auto rng = make_stream(8, StreamTag::Folds, 0);
  const auto plan = FoldPlan::random(s.n(), 3, rng);
  const auto train = plan.train_indices(1);
  // rewrite every evaluation subject
  std::vector<SubjectPath> subs = s.subjects();
  for (std::size_t j : plan.eval_indices(1)) subs[j] = perturb_from(subs[j], 0, 5.0);
  const SurvivalSample alt(s.grid(), subs, s.metadata());
  auto factory = ridge_pooled_factory();
  const auto a = factory(s, train), b = factory(alt, train);
  EXPECT_EQ(a.projection->describe(), b.projection->describe());
  EXPECT_EQ(a.hazard->describe(), b.hazard->describe());
  EXPECT_EQ(a.trained_on, train);
  // and the fold pieces of lcm_crossfit see no overlap
  const auto fit = lcm_crossfit(s, plan, factory);
  ASSERT_EQ(fit.fold_pieces.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(fit.fold_pieces[k].eval_idx, plan.eval_indices(k));
  EXPECT_THROW(lcm_sample_split(s, plan.eval_indices(1), factory(s, iota_idx(s.n()))), UsageError);
}

TEST(PooledHazard, InterceptOnlyIsOccurrenceExposureRate) {
  const auto s = small_cox(300, 9);
  const auto idx = iota_idx(s.n());
  const auto m = fit_hazard_pooled(s, idx, HazardBasis::intercept_only());
  double events = 0, rows = 0;
  for (std::size_t j = 0; j < s.n(); ++j) {
    // person-period rows start at index 1, so an event at 0 is outside the likelihood
    events += (s[j].delta() && s[j].event_index() >= 1) ? 1.0 : 0.0;
    rows += static_cast<double>(s[j].event_index());
  }
  EXPECT_NEAR(std::exp(m->intercept()), events / (rows * s.grid().step()), 1e-6 * events / rows);
}

TEST(PooledHazard, RecoversWeibullShape) {
  // hazard 6 t^2 with the event in (t_e, t_{e+1}]: log h at row e is log 6 + 2 log t_{e+1}
  const TimeGrid g(64);
  std::vector<double> cum(64, 0.0);
  for (std::size_t i = 1; i < 64; ++i) cum[i] = cum[i - 1] + 6.0 * g[i] * g[i] * g.step();
  std::vector<SubjectPath> subs;
  for (std::size_t j = 0; j < 4000; ++j) {
    auto rng = make_stream(10, StreamTag::MonteCarlo, 0, j);
    const auto d = sample_survival_inverse_hazard(cum, rng);
    subs.emplace_back(Eigen::MatrixXd::Zero(64, 1), std::vector<double>(64, 0.0), d.event_index, d.delta);
  }
  const SurvivalSample s(g, std::move(subs));
  auto b = HazardBasis::intercept_only();
  b.log_time = true;
  const auto m = fit_hazard_pooled(s, iota_idx(s.n()), b, 0.0);
  ASSERT_EQ(m->coefficients().size(), 1u);
  EXPECT_NEAR(m->coefficients()[0], 2.0, 0.15);
  EXPECT_NEAR(m->intercept(), std::log(6.0), 0.2);
}

TEST(PooledHazard, InSampleMartingaleHasMeanZero) {
  const auto s = small_cox(200, 11);
  const auto idx = iota_idx(s.n());
  for (const auto& basis : {HazardBasis::intercept_only(), HazardBasis{}}) {
    const auto m = fit_hazard_pooled(s, idx, basis);
    std::vector<std::vector<double>> g, h;
    for (std::size_t j : idx) {
      g.emplace_back(s.q(), 1.0);
      h.push_back(m->predict(s[j], s.grid()));
    }
    const auto path = mean_martingale_integral(s, idx, g, h);
    EXPECT_NEAR(path.back(), 0.0, 1e-6);
  }
}

TEST(Oracle, LogisticProjectionExamples) {
  EXPECT_DOUBLE_EQ(oracle_pi_logistic(0.5, 0.0), 0.5);
  EXPECT_NEAR(oracle_pi_logistic(0.5, std::log(3.0)), 0.25, 1e-15);
  EXPECT_NEAR(oracle_pi_logistic(0.2, -std::log(4.0)), 0.5, 1e-15);
  EXPECT_THROW(oracle_pi_logistic(0.0, 1.0), DomainError);
  EXPECT_THROW(oracle_pi_logistic(1.0, 1.0), DomainError);
}

TEST(Oracle, LogisticProjectionMatchesTwoAtomPosterior) {
  // X in {0, 1}; survival to t has weight exp(-Lambda_x(t))
  for (double pi0 : {0.1, 0.5, 0.9})
    for (double l0 : {0.0, 0.3, 2.0})
      for (double l1 : {0.0, 0.7, 5.0}) {
        const double w1 = pi0 * std::exp(-l1), w0 = (1.0 - pi0) * std::exp(-l0);
        EXPECT_NEAR(oracle_pi_logistic(pi0, l1 - l0), w1 / (w0 + w1), 1e-12);
      }
}

TEST(Oracle, BinaryAcmProjectionMatchesMonteCarlo) {
  AcmSimConfig c;
  c.setting = AcmSetting::BinCox;
  const TimeGrid g(c.q);
  const std::vector<double> beta(c.d, 0.0), z{0.4, 0.0, 0.0, 0.0};
  // subjects pinned at z: empirical E[X | T* > t]
  std::size_t at_risk = 0;
  double xsum = 0.0;
  const double t = 0.8;
  for (std::size_t j = 0; j < 40000; ++j) {
    auto rng = make_stream(13, StreamTag::MonteCarlo, 0, j);
    const double x = rng.uniform() < expit(c.alpha * z[0]) ? 1.0 : 0.0;
    boost::random::exponential_distribution<double> ex(1.0);
    const double ts = std::sqrt(ex(rng) / acm_rate(c, beta, x, z));
    if (ts > t) {
      ++at_risk;
      xsum += x;
    }
  }
  const double p = xsum / static_cast<double>(at_risk);
  EXPECT_NEAR(acm_pi(c, t, z), p, 4.0 * std::sqrt(p * (1 - p) / static_cast<double>(at_risk)));
  // exposure raises the hazard, so survivors are less exposed
  EXPECT_LT(acm_pi(c, t, z), expit(c.alpha * z[0]));
}

TEST(Oracle, CoxProjectionVanishesForZeroKernel) {
  CoxSimConfig c;
  c.kernel_x = HistKernel::Zero;
  c.q = 32;
  const TimeGrid g(c.q);
  const CoxOracleProjection p(c, g);
  const auto s = small_cox(5, 14);
  for (std::size_t j = 0; j < s.n(); ++j)
    for (double v : p.predict(s[j], s.grid())) EXPECT_EQ(v, 0.0);
  c.rho0 = 1.0;
  EXPECT_THROW(oracle_nuisances_cox(c, 1.0, 10, 4), ConfigError);
}

TEST(Oracle, ProjectionResidualIsOrthogonalToHistory) {
  // E[(X - Pi) * any Z function | at risk] = 0 for the additive oracle
  AcmSimConfig c;
  c.setting = AcmSetting::Par;
  c.n = 20000;
  const auto s = simulate_acm_dataset(c);
  const auto nuis = oracle_nuisances_acm(c, draw_acm_beta(c));
  for (std::size_t i : {1u, 40u, 100u}) {
    double acc = 0.0, acc2 = 0.0, cnt = 0.0;
    for (std::size_t j = 0; j < s.n(); ++j) {
      if (!s[j].at_risk(i)) continue;
      const double r = (s[j].x(i) - nuis.pi_hat(s[j], s.grid(), i)) * std::tanh(s[j].z(0, 0));
      acc += r;
      acc2 += r * r;
      cnt += 1;
    }
    const double mean = acc / cnt, se = std::sqrt((acc2 / cnt - mean * mean) / cnt);
    EXPECT_LT(std::abs(mean), 4.0 * se) << "index " << i;
  }
}

TEST(BoostTuning, PrefersSignalOverInterceptAndIsDeterministic) {
  const auto s = small_cox(200, 15);
  const auto idx = iota_idx(s.n());
  auto rng = make_stream(15, StreamTag::Pilot, 0);
  const auto plan = FoldPlan::random(s.n(), 5, rng);
  const auto a = tune_hazard_boost(s, idx, plan, {1, 2}, {0, 10, 40}, {}, default_hazard_boost(), 1e-4, false);
  const auto b = tune_hazard_boost(s, idx, plan, {1, 2}, {0, 10, 40}, {}, default_hazard_boost(), 1e-4, false);
  EXPECT_EQ(a.to_json(), b.to_json());
  ASSERT_EQ(a.deviance.size(), 2u);
  // zero trees is the time-only offset for every depth
  EXPECT_DOUBLE_EQ(a.deviance[0][0], a.deviance[1][0]);
  double best = INFINITY;
  for (const auto& row : a.deviance)
    for (double v : row) best = std::min(best, v);
  EXPECT_LT(best, a.deviance[0][0]);
  EXPECT_THROW(tune_hazard_boost(s, idx, FoldPlan::no_split(s.n()), {1}, {1}), PlanError);
}
