#include "riskbo/landscape_analysis.hpp"
#include "support/helpers.hpp"

#include <gtest/gtest.h>

using namespace riskbo;
using riskbo::testing::small_landscape;
using riskbo::testing::synthetic;

namespace {

std::vector<double> bimodal(std::size_t n_each, double a, double b, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v;
  for (std::size_t i = 0; i < n_each; ++i) {
    v.push_back(a + n(rng));
    v.push_back(b + n(rng));
  }
  return v;
}

double between_class_variance(const std::vector<double>& v, double t)
{
  double s0 = 0, s1 = 0;
  std::size_t n0 = 0, n1 = 0;
  for (double x : v)
    if (x >= t) s1 += x, ++n1;
    else s0 += x, ++n0;
  if (!n0 || !n1) return 0;
  const double w0 = double(n0) / v.size(), w1 = double(n1) / v.size();
  const double d = s0 / n0 - s1 / n1;
  return w0 * w1 * d * d;
}

} // namespace

TEST(Otsu, TwoPointMasses)
{
  const std::vector<double> v{0, 0, 0, 1, 1, 1};
  const auto r = otsu_threshold(v);
  EXPECT_GT(r.threshold, 0.0);
  EXPECT_LT(r.threshold, 1.0);
  EXPECT_EQ(r.active_pct, 50.0);
  EXPECT_THROW(otsu_threshold(std::vector<double>(5, 2.0)), DegenerateError);
}

TEST(Otsu, MatchesExhaustiveSweep)
{
  const auto v = bimodal(2000, 0, 10, 3);
  const auto r = otsu_threshold(v);
  EXPECT_NEAR(r.threshold, 5.0, 1.0);
  auto s = v;
  std::sort(s.begin(), s.end());
  double best = 0, best_t = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double t = 0.5 * (s[i - 1] + s[i]);
    const double bcv = between_class_variance(v, t);
    if (bcv > best) best = bcv, best_t = t;
  }
  EXPECT_NEAR(best_t, 5.0, 1.0);
  EXPECT_GE(between_class_variance(v, r.threshold), 0.999 * best);
  EXPECT_NEAR(r.active_pct, 50.0, 1.0);
}

TEST(Otsu, ActivePercentageInRange)
{
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(200);
    for (auto& x : v) x = e(rng);
    const auto r = otsu_threshold(v);
    EXPECT_GT(r.active_pct, 0.0);
    EXPECT_LT(r.active_pct, 100.0);
  }
}

TEST(Moments, SymmetricAndNormalSample)
{
  EXPECT_NEAR(moments(std::vector<double>{-1, 0, 1}).skewness, 0.0, 1e-15);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v(1'000'000);
  for (auto& x : v) x = n(rng);
  const auto m = moments(v);
  EXPECT_LT(std::abs(m.skewness), 0.02);
  EXPECT_LT(std::abs(m.kurtosis), 0.02);
  EXPECT_THROW(moments(std::vector<double>{1, 1, 1}), DegenerateError);
}

TEST(Moments, AffineInvariantAndMatchesExponential)
{
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(200'000);
  for (auto& x : v) x = e(rng);
  const auto m = moments(v);
  // Exponential: skewness 2, excess kurtosis 6.
  EXPECT_NEAR(m.skewness, 2.0, 0.1);
  EXPECT_NEAR(m.kurtosis, 6.0, 0.6);
  std::vector<double> w(v);
  for (auto& x : w) x = 3 * x - 7;
  const auto mw = moments(w);
  EXPECT_NEAR(mw.skewness, m.skewness, 1e-9);
  EXPECT_NEAR(mw.kurtosis, m.kurtosis, 1e-9);
  for (auto& x : w) x = -x;
  EXPECT_NEAR(moments(w).skewness, -m.skewness, 1e-9);
}

TEST(Kde, ModeCounts)
{
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v(5000);
  for (auto& x : v) x = n(rng);
  EXPECT_EQ(kde_peaks(v), 1u);
  EXPECT_EQ(kde_peaks(bimodal(2500, 0, 10, 5)), 2u);
  EXPECT_THROW(kde_peaks(std::vector<double>{1, 2, 3}), DegenerateError);
}

// The truncated evaluation matches a direct sum over every sample.
TEST(Kde, DensityMatchesDirectSum)
{
  const auto v = bimodal(300, 0, 4, 6);
  std::vector<double> grid;
  const auto d = kde_density(v, &grid);
  ASSERT_EQ(d.size(), kKdeGrid);
  const double n = static_cast<double>(v.size());
  const double mean = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double h = std::sqrt(ss / (n - 1)) * std::pow(n, -0.2);
  for (std::size_t g = 0; g < kKdeGrid; g += 37) {
    double s = 0;
    for (double x : v) s += std::exp(-0.5 * std::pow((grid[g] - x) / h, 2));
    s /= n * h * std::sqrt(2 * std::numbers::pi);
    EXPECT_NEAR(d[g], s, 1e-12);
  }
  EXPECT_EQ(grid.front(), *std::min_element(v.begin(), v.end()));
  EXPECT_NEAR(grid.back(), *std::max_element(v.begin(), v.end()), 1e-12);
}

TEST(Cauchy, RecoversLocation)
{
  std::mt19937_64 rng(10);
  std::cauchy_distribution<double> c(2.0, 1.0);
  std::vector<double> v(100'000);
  for (auto& x : v) x = c(rng);
  const auto fit = cauchy_peak(v);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.location, 2.0, 0.05);
  EXPECT_NEAR(fit.scale, 1.0, 0.05);

  std::vector<double> sym;
  for (int i = 1; i <= 50; ++i) {
    sym.push_back(i * 0.1);
    sym.push_back(-i * 0.1);
  }
  EXPECT_LT(std::abs(cauchy_peak(sym).location), 0.05);
}

// The fitted point is a stationary point of the likelihood.
TEST(Cauchy, IsLikelihoodMaximum)
{
  std::mt19937_64 rng(3);
  std::cauchy_distribution<double> c(-1.0, 0.3);
  std::vector<double> v(500);
  for (auto& x : v) x = c(rng);
  const auto fit = cauchy_peak(v);
  const double ll = detail::cauchy_loglik(v, fit.location, std::log(fit.scale));
  for (double d : {-1e-3, 1e-3}) {
    EXPECT_LE(detail::cauchy_loglik(v, fit.location + d, std::log(fit.scale)), ll);
    EXPECT_LE(detail::cauchy_loglik(v, fit.location, std::log(fit.scale) + d), ll);
  }
}

TEST(LocalOptima, Examples)
{
  auto l = small_landscape({{"AA", 1}, {"AC", 0}, {"CA", 0}, {"CC", 1}});
  EXPECT_EQ(local_optima(l, build_neighbor_index(l)), 2u);
  auto add = synthetic(SyntheticModel::additive, 3, 4, 9);
  EXPECT_EQ(local_optima(add, build_neighbor_index(add)), 1u);
  // Isolated variants are not optima.
  auto iso = small_landscape({{"AA", 1}, {"CC", 2}});
  EXPECT_EQ(local_optima(iso, build_neighbor_index(iso)), 0u);
}

TEST(LocalOptima, MatchesBruteForce)
{
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto l = synthetic(SyntheticModel::nk, 4, 3, seed, 2);
    std::size_t brute = 0;
    const auto& s = l.sequences();
    for (std::size_t i = 0; i < l.size(); ++i) {
      bool peak = true, any = false;
      for (std::size_t j = 0; j < l.size(); ++j) {
        std::size_t d = 0;
        for (std::size_t p = 0; p < s[i].size(); ++p) d += s[i][p] != s[j][p];
        if (d != 1) continue;
        any = true;
        peak &= l.raw_fitness()[i] > l.raw_fitness()[j];
      }
      brute += peak && any;
    }
    EXPECT_EQ(local_optima(l, build_neighbor_index(l)), brute);
  }
}

TEST(Ruggedness, AdditiveIsSmoothRandomIsRugged)
{
  auto add = synthetic(SyntheticModel::additive, 3, 4, 2);
  EXPECT_LT(ruggedness(add, build_neighbor_index(add)).value, 1e-6);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rnd = synthetic(SyntheticModel::random, 3, 4, seed);
    EXPECT_GT(ruggedness(rnd, build_neighbor_index(rnd)).value, 1.0) << seed;
  }
}

TEST(Ruggedness, DeficientDesignIsRegularized)
{
  // Positions 1 and 2 always mutate together, so their effects are confounded.
  auto l = small_landscape({{"AAA", 0}, {"ACC", 1}, {"CAA", 2}, {"CCC", 3.5}}, "AC", "AAA");
  const auto r = ruggedness(l, build_neighbor_index(l));
  EXPECT_TRUE(r.regularized);
  EXPECT_TRUE(std::isfinite(r.value));
}

TEST(Epistasis, HandClassifiedQuadruples)
{
  auto mag = small_landscape({{"AA", 0}, {"CA", 1}, {"AC", 1}, {"CC", 3}}, "AC", "AA");
  const auto m = epistasis(mag);
  EXPECT_EQ(m.n_quadruples, 1u);
  EXPECT_EQ(m.magnitude_pct, 100.0);
  EXPECT_EQ(m.non_magnitude_pct, 0.0);

  auto sign = small_landscape({{"AA", 0}, {"CA", 1}, {"AC", -1}, {"CC", -3}}, "AC", "AA");
  const auto s = epistasis(sign);
  EXPECT_EQ(s.magnitude_pct, 0.0);
  EXPECT_EQ(s.non_magnitude_pct, 100.0);

  auto singles = small_landscape({{"AAA", 0}, {"CAA", 1}, {"ACA", 2}, {"AAC", 3}}, "AC", "AAA");
  const auto z = epistasis(singles);
  EXPECT_EQ(z.n_quadruples, 0u);
  EXPECT_EQ(z.magnitude_pct + z.non_magnitude_pct, 0.0);

  auto add = synthetic(SyntheticModel::additive, 3, 4, 6);
  const auto a = epistasis(add);
  EXPECT_GT(a.n_quadruples, 0u);
  EXPECT_EQ(a.n_epistatic, 0u);
  EXPECT_EQ(a.magnitude_pct + a.non_magnitude_pct, 0.0);
}

TEST(Epistasis, PercentagesSumToHundred)
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto l = synthetic(SyntheticModel::random, 3, 4, seed);
    const auto e = epistasis(l);
    ASSERT_GT(e.n_epistatic, 0u);
    EXPECT_NEAR(e.magnitude_pct + e.non_magnitude_pct, 100.0, 1e-9);
  }
}

TEST(Profile, AdditiveConstructionAndShuffleInvariance)
{
  auto add = synthetic(SyntheticModel::additive, 3, 4, 12);
  const auto p = profile(add);
  EXPECT_EQ(p.local_optima, 1.0);
  EXPECT_LT(p.ruggedness, 1e-6);
  EXPECT_EQ(p.magnitude_epistasis_pct + p.non_magnitude_epistasis_pct, 0.0);
  EXPECT_GE(p.active_pct, 0.0);
  EXPECT_LE(p.active_pct, 100.0);
  EXPECT_EQ(p.properties().size(), 9u);

  auto rnd = synthetic(SyntheticModel::nk, 4, 3, 2, 1);
  std::vector<std::string> seqs = rnd.sequences();
  std::vector<double> fit = rnd.raw_fitness();
  std::vector<std::size_t> perm(seqs.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  std::vector<std::string> s2;
  std::vector<double> f2;
  for (auto i : perm) s2.push_back(seqs[i]), f2.push_back(fit[i]);
  const Landscape shuffled(rnd.name(), s2, f2, rnd.alphabet(), rnd.wild_type());
  const auto a = profile(rnd), b = profile(shuffled);
  const auto pa = a.properties(), pb = b.properties();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (std::isnan(pa[i].second)) EXPECT_TRUE(std::isnan(pb[i].second));
    else EXPECT_NEAR(pa[i].second, pb[i].second, 1e-9 * (1 + std::abs(pa[i].second))) << pa[i].first;
  }
}

TEST(Profile, FlagsDegenerateProperties)
{
  // Too few values for the KDE and the Cauchy fit; the rest still computes.
  auto tiny = small_landscape({{"AA", 1}, {"AC", 0}, {"CA", 0.5}, {"CC", 2}});
  const auto p = profile(tiny);
  EXPECT_EQ(p.flags.size(), 2u);
  EXPECT_TRUE(std::isnan(p.kde_peaks));
  EXPECT_TRUE(std::isnan(p.cauchy_peak));
  EXPECT_FALSE(std::isnan(p.active_pct));
  EXPECT_EQ(p.local_optima, 2.0); // AA and CC
}
