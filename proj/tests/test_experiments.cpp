#include <gtest/gtest.h>

#include "hazardlean/experiments.hpp"

using namespace hazardlean;

namespace {

StudySpec small_h0(std::size_t reps, std::size_t threads) {
  StudySpec s;
  s.study = StudyKind::H0Pvalues;
  s.cox_settings = cox_kernel_settings({-1.0}, {0.0}, {HistKernel::Constant, HistKernel::Zero});
  for (auto& c : s.cox_settings) c.q = 24;
  s.n_list = {60};
  s.replicates = reps;
  s.k_folds = 2;
  s.seed = 17;
  s.threads = threads;
  return s;
}

}  // namespace

TEST(Studies, EmptyStudyKeepsSchema) {
  const auto r = run_study(small_h0(0, 1));
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.summary.columns,
            (std::vector<std::string>{"setting", "n", "statistic", "count", "failed", "rejection_rate", "rate_se", "ks"}));
  EXPECT_EQ(r.records_table().to_csv(), "setting,n,replicate,estimator,status,t_stat_sup,p_sup,t_stat_endpoint,p_endpoint,gamma1,var1\n");
  StudySpec a;
  a.study = StudyKind::AcmRmse;
  a.acm_settings = {AcmSimConfig{}};
  a.replicates = 0;
  EXPECT_EQ(run_study(a).summary.columns.size(), 10u);
}

TEST(Studies, ThreadCountDoesNotChangeRecords) {
  const auto a = run_study(small_h0(6, 1));
  const auto b = run_study(small_h0(6, 3));
  EXPECT_EQ(a.records.size(), 12u);
  EXPECT_EQ(a.records_table().to_csv(), b.records_table().to_csv());
  EXPECT_EQ(a.summary.to_csv(), b.summary.to_csv());
  EXPECT_EQ(a.metadata, b.metadata);
}

TEST(Studies, PoisonedReplicateIsIsolated) {
  auto spec = small_h0(6, 2);
  spec.max_failure_fraction = 0.5;
  const auto clean = run_study(spec);
  spec.poison = {2};
  const auto dirty = run_study(spec);
  ASSERT_EQ(dirty.failures.size(), 1u);
  EXPECT_EQ(dirty.failures[0].replicate, 2u);
  EXPECT_EQ(dirty.failures[0].error, "non-finite result");
  for (std::size_t i = 0; i < clean.records.size(); ++i) {
    if (i == 2) {
      EXPECT_FALSE(dirty.records[i].ok);
      continue;
    }
    EXPECT_EQ(dirty.records[i].values, clean.records[i].values);
  }
  // the summary counts it as failed and takes nothing from it
  const auto& row = dirty.summary.rows[0];
  EXPECT_EQ(row[3], "5");
  EXPECT_EQ(row[4], "1");
  for (const auto& r : dirty.summary.rows)
    for (const auto& cell : r) EXPECT_EQ(cell.find("nan"), std::string::npos);
  spec.poison = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_THROW(run_study(spec), StudyAborted);
}

TEST(Studies, SummaryIsRecomputableFromRecords) {
  const auto r = run_study(small_h0(8, 1));
  EXPECT_EQ(summarize(r).to_csv(), r.summary.to_csv());
  // rejection rate by hand
  for (const auto& row : r.summary.rows) {
    if (row[2] != "sup") continue;
    double rej = 0, cnt = 0;
    for (const auto& rec : r.records)
      if (rec.setting == row[0] && rec.ok) {
        cnt += 1;
        rej += rec.values[1] < 0.05 ? 1 : 0;
      }
    EXPECT_EQ(row[5], fmt_double(rej / cnt));
  }
}

TEST(Studies, KsAndEcdfHelpers) {
  EXPECT_NEAR(ks_uniform({0.5}), 0.5, 1e-15);
  EXPECT_NEAR(ks_uniform({0.125, 0.375, 0.625, 0.875}), 0.125, 1e-15);
  EXPECT_TRUE(std::isnan(ks_uniform({})));
  const std::vector<double> s{0.1, 0.2, 0.2, 0.9};
  EXPECT_EQ(ecdf_at(s, 0.05), 0.0);
  EXPECT_EQ(ecdf_at(s, 0.2), 0.75);
  EXPECT_EQ(ecdf_at(s, 1.0), 1.0);
}

TEST(Reproduce, ContentHashIsGitBlobSha1) {
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Reproduce, OutputsAreByteIdenticalAcrossRuns) {
  auto spec = small_h0(4, 1);
  const auto a = run_study(spec);
  spec.threads = 2;
  const auto b = run_study(spec);
  const auto fa = figure_outputs("fig2.4", a), fb = figure_outputs("fig2.4", b);
  ASSERT_EQ(fa.size(), fb.size());
  // records, summary, failures and one ECDF file per kernel setting
  EXPECT_EQ(fa.size(), 3u + spec.cox_settings.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_EQ(fa[i].name, fb[i].name);
    EXPECT_EQ(git_blob_hash(fa[i].content), git_blob_hash(fb[i].content)) << fa[i].name;
  }
  EXPECT_EQ(fa[3].name, "ecdf_constant_beta2_-1_rho0_0.csv");
}

TEST(Reproduce, PresetsAndUnknownIds) {
  for (const auto& id : figure_ids()) EXPECT_NO_THROW(figure_preset(id, "desk", 1));
  EXPECT_EQ(figure_preset("fig2.4", "full", 1).replicates, 500u);
  try {
    figure_preset("fig9", "desk", 1);
    FAIL() << "no throw";
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    for (const auto& id : figure_ids()) EXPECT_NE(msg.find(id), std::string::npos);
  }
  EXPECT_THROW(figure_preset("fig2.4", "huge", 1), UsageError);
  EXPECT_THROW(parse_study("nothing"), UsageError);
}

TEST(Studies, H0StudyRejectsAlternatives) {
  auto spec = small_h0(1, 1);
  spec.cox_settings[0].rho0 = 5.0;
  EXPECT_THROW(run_h0_study(spec), UsageError);
}
