#include "riskbo/campaign.hpp"
#include "riskbo/encodings.hpp"
#include "support/helpers.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace riskbo;
using riskbo::testing::synthetic;
using riskbo::testing::TempDir;

namespace {

ModelSpec model(SurrogateKind s, AcquisitionKind a)
{
  ModelSpec m;
  m.surrogate = SurrogateSpec::defaults(s);
  m.surrogate.gp_iterations = 30;
  if (s == SurrogateKind::random_forest) m.surrogate.n_estimators = 10;
  m.surrogate.epochs = 15;
  m.surrogate.hidden_dim = 16;
  m.surrogate.mc_samples = 10;
  m.acquisition.kind = a;
  return m;
}

CampaignConfig config(std::size_t n_init, std::size_t b, std::size_t k, std::size_t seeds)
{
  CampaignConfig c;
  c.n_init = n_init;
  c.batch_size = b;
  c.n_cycles = k;
  c.seeds = CampaignConfig::default_seeds(seeds);
  return c;
}

LandscapeContext context(Landscape l)
{
  LandscapeContext ctx{l, full_pool_split(l), {}};
  ctx.encodings.emplace("onehot", encode_one_hot(ctx.landscape));
  return ctx;
}

} // namespace

TEST(Campaign, ZeroCyclesIsTheSeedPool)
{
  auto ctx = context(synthetic(SyntheticModel::additive, 3, 4, 1));
  const auto c = config(10, 5, 0, 1);
  const auto r = run_campaign(c, model(SurrogateKind::gp, AcquisitionKind::ei), 7, ctx.landscape, ctx.split,
                              ctx.encodings.at("onehot"));
  ASSERT_EQ(r.acquired.size(), 1u);
  EXPECT_EQ(r.acquired[0], seed_pool(c, ctx.split, 7));
  ASSERT_EQ(r.payoff_curve.size(), 1u);
  double best = 0;
  for (auto i : r.acquired[0]) best = std::max(best, ctx.landscape.norm_fitness()[i]);
  EXPECT_EQ(r.final_fitness(), best);
}

TEST(Campaign, BudgetAndDistinctAcquisitions)
{
  auto ctx = context(synthetic(SyntheticModel::additive, 5, 4, 3));
  const auto c = config(96, 96, 4, 1);
  EXPECT_EQ(c.budget(), 480u);
  const auto r = run_campaign(c, model(SurrogateKind::random_forest, AcquisitionKind::greedy), 0, ctx.landscape,
                              ctx.split, ctx.encodings.at("onehot"));
  ASSERT_FALSE(r.failed) << r.diagnostic;
  EXPECT_EQ(r.acquired[0].size(), 96u);
  std::size_t later = 0;
  for (std::size_t k = 1; k < r.acquired.size(); ++k) later += r.acquired[k].size();
  EXPECT_EQ(later, 384u);
  std::set<std::size_t> all;
  for (const auto& b : r.acquired) all.insert(b.begin(), b.end());
  EXPECT_EQ(all.size(), 480u);
  for (std::size_t k = 1; k < r.payoff_curve.size(); ++k) EXPECT_GE(r.payoff_curve[k], r.payoff_curve[k - 1]);
}

TEST(Campaign, BudgetBeyondPoolIsRejected)
{
  auto ctx = context(synthetic(SyntheticModel::additive, 2, 4, 3));
  EXPECT_THROW(run_random_baseline(config(10, 4, 2, 1), 0, ctx.landscape, ctx.split), SizeError);
}

TEST(Campaign, PairedWithBaselineAndDeterministic)
{
  auto ctx = context(synthetic(SyntheticModel::nk, 4, 3, 5, 1));
  const auto c = config(8, 4, 3, 1);
  const auto m = model(SurrogateKind::gp, AcquisitionKind::ucb);
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto a = run_campaign(c, m, seed, ctx.landscape, ctx.split, ctx.encodings.at("onehot"));
    const auto b = run_campaign(c, m, seed, ctx.landscape, ctx.split, ctx.encodings.at("onehot"));
    const auto base = run_random_baseline(c, seed, ctx.landscape, ctx.split);
    EXPECT_EQ(a.acquired, b.acquired);
    EXPECT_EQ(a.payoff_curve, b.payoff_curve);
    EXPECT_EQ(a.acquired[0], base.acquired[0]);
    EXPECT_EQ(a.payoff_curve[0], base.payoff_curve[0]);
  }
  EXPECT_NE(seed_pool(c, ctx.split, 0), seed_pool(c, ctx.split, 1));
}

TEST(Baseline, ExhaustingThePoolFindsTheOptimum)
{
  auto ctx = context(synthetic(SyntheticModel::random, 3, 4, 11));
  const auto r = run_random_baseline(config(4, 10, 6, 1), 3, ctx.landscape, ctx.split);
  EXPECT_EQ(r.total_acquired(), 64u);
  EXPECT_EQ(r.final_fitness(), 1.0);
}

// Final payoff of a random baseline is the max of m draws without
// replacement; its expectation follows from order statistics of the pool.
TEST(Baseline, MatchesOrderStatisticOracle)
{
  auto ctx = context(synthetic(SyntheticModel::random, 4, 4, 21));
  const auto c = config(4, 4, 3, 1);
  const std::size_t m = c.budget(), N = ctx.landscape.size();
  std::vector<double> v = ctx.landscape.norm_fitness();
  std::sort(v.begin(), v.end());
  // P(max is the j-th smallest) = C(j-1, m-1) / C(N, m)
  double expected = 0, lg_total = std::lgamma(N + 1.0) - std::lgamma(m + 1.0) - std::lgamma(N - m + 1.0);
  for (std::size_t j = m; j <= N; ++j) {
    const double lg = std::lgamma(double(j)) - std::lgamma(double(m)) - std::lgamma(double(j - m + 1));
    expected += v[j - 1] * std::exp(lg - lg_total);
  }
  double mean = 0;
  const int seeds = 500;
  for (int s = 0; s < seeds; ++s) mean += run_random_baseline(c, s, ctx.landscape, ctx.split).final_fitness();
  mean /= seeds;
  EXPECT_NEAR(mean, expected, 0.02);
  // Continuous-uniform approximation of the same quantity.
  EXPECT_NEAR(expected, double(m) / (m + 1), 0.03);
}

TEST(Campaign, GpEiBeatsRandomOnAdditiveLandscape)
{
  auto ctx = context(synthetic(SyntheticModel::additive, 4, 4, 2));
  const auto c = config(16, 8, 5, 8);
  const auto m = model(SurrogateKind::gp, AcquisitionKind::ei);
  double bo = 0, rnd = 0;
  for (auto s : c.seeds) {
    const auto r = run_campaign(c, m, s, ctx.landscape, ctx.split, ctx.encodings.at("onehot"));
    ASSERT_FALSE(r.failed) << r.diagnostic;
    bo += r.final_fitness();
    rnd += run_random_baseline(c, s, ctx.landscape, ctx.split).final_fitness();
  }
  EXPECT_GT(bo, rnd);
}

TEST(Campaign, TrainingFailureIsRecorded)
{
  auto ctx = context(synthetic(SyntheticModel::additive, 3, 4, 1));
  const auto r = run_campaign(config(1, 2, 2, 1), model(SurrogateKind::gp, AcquisitionKind::ei), 0, ctx.landscape,
                              ctx.split, ctx.encodings.at("onehot"));
  EXPECT_TRUE(r.failed);
  EXPECT_NE(r.diagnostic.find("cycle 1"), std::string::npos);
  EXPECT_EQ(r.payoff_curve.size(), 1u);
}

TEST(RunRecord, JsonRoundTrip)
{
  RunRecord r;
  r.model = "gp/ei/onehot";
  r.hyperparams = "lr=0.01";
  r.landscape = "x";
  r.seed = 42;
  r.acquired = {{1, 2}, {5}};
  r.payoff_curve = {0.25, 0.5};
  r.failed = true;
  r.diagnostic = "boom";
  r.config_digest = "abc";
  const auto back = run_record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.model, r.model);
  EXPECT_EQ(back.hyperparams, r.hyperparams);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.acquired, r.acquired);
  EXPECT_EQ(back.payoff_curve, r.payoff_curve);
  EXPECT_EQ(back.failed, r.failed);
  EXPECT_EQ(back.diagnostic, r.diagnostic);
  EXPECT_EQ(back.config_digest, r.config_digest);
}

TEST(RunGrid, CountsAndResumes)
{
  TempDir dir;
  auto ctx = context(synthetic(SyntheticModel::additive, 3, 4, 1));
  const auto c = config(8, 4, 2, 3);
  std::vector<ModelSpec> models{model(SurrogateKind::random_forest, AcquisitionKind::greedy),
                                model(SurrogateKind::gp, AcquisitionKind::ucb)};
  std::vector<const LandscapeContext*> ls{&ctx};
  GridSummary first;
  {
    RunStore store(dir.path());
    first = run_grid(models, ls, c, &store, 2);
  }
  EXPECT_EQ(first.records.size(), 9u);
  EXPECT_EQ(first.completed, 9u);
  EXPECT_EQ(first.skipped, 0u);
  std::size_t baselines = 0;
  for (const auto& r : first.records) baselines += r.is_baseline;
  EXPECT_EQ(baselines, 3u);

  RunStore store(dir.path());
  EXPECT_EQ(store.records().size(), 9u);
  const auto second = run_grid(models, ls, c, &store, 2);
  EXPECT_EQ(second.completed, 0u);
  EXPECT_EQ(second.skipped, 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(second.records[i].payoff_curve, first.records[i].payoff_curve);

  // Thread count does not change results.
  const auto serial = run_grid(models, ls, c, nullptr, 1);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(serial.records[i].acquired, first.records[i].acquired);

  // A changed campaign config invalidates the stored records.
  auto c2 = c;
  c2.n_cycles = 1;
  EXPECT_EQ(run_grid(models, ls, c2, &store, 1).completed, 9u);
}

TEST(RunGrid, MissingEncodingIsAConfigError)
{
  auto ctx = context(synthetic(SyntheticModel::additive, 3, 4, 1));
  auto m = model(SurrogateKind::gp, AcquisitionKind::ei);
  m.encoding = "esm2";
  EXPECT_THROW(run_grid({m}, {&ctx}, config(4, 2, 1, 1)), ConfigError);
}

TEST(RunStore, TruncatedTailIsDroppedCorruptMiddleIsFatal)
{
  TempDir dir;
  RunRecord r;
  r.model = "random";
  r.landscape = "syn";
  r.is_baseline = true;
  r.acquired = {{0}};
  r.payoff_curve = {0.5};
  r.config_digest = "d";
  const std::string good = to_json(r).dump();
  dir.write("syn.jsonl", good + "\n" + good.substr(0, good.size() / 2));
  {
    RunStore store(dir.path());
    EXPECT_EQ(store.records().size(), 1u);
    EXPECT_TRUE(store.contains(RunStore::key("random", "syn", 0, "d")));
  }
  dir.write("syn.jsonl", "{not json}\n" + good + "\n");
  EXPECT_THROW(RunStore{dir.path()}, Error);
}
