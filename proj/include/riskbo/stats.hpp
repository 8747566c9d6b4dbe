#pragma once

// Rankings, rank agreement, bootstrap significance, property correlations
// and Pareto fronts over a MetricTable.

#include "riskbo/landscape_analysis.hpp"
#include "riskbo/metrics.hpp"

#include <limits>

namespace riskbo {

struct KendallResult
{
  double tau = 0.0;
  double p_value = 1.0;
};

namespace detail {

// Sum over tie groups of a sorted sequence: t(t-1)/2, t(t-1)(2t+5), t(t-1), t(t-1)(t-2).
struct TieSums
{
  double pairs = 0.0, v = 0.0, t1 = 0.0, t2 = 0.0;
};

inline TieSums tie_sums(const std::vector<double>& sorted)
{
  TieSums s;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    s.pairs += t * (t - 1.0) / 2.0;
    s.v += t * (t - 1.0) * (2.0 * t + 5.0);
    s.t1 += t * (t - 1.0);
    s.t2 += t * (t - 1.0) * (t - 2.0);
    i = j;
  }
  return s;
}

// Merge sort counting strict inversions.
inline std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi)
{
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

} // namespace detail

// Kendall tau-b in O(n log n) (Knight's algorithm). Two-sided p-value from
// the normal approximation with tie-adjusted variance.
inline KendallResult kendall_tau(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size()) throw SizeError("kendall_tau: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw SizeError("kendall_tau needs at least 2 observations");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw SizeError("kendall_tau: non-finite input");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });

  std::vector<double> sa(n), sb(n);
  for (std::size_t i = 0; i < n; ++i) {
    sa[i] = a[order[i]];
    sb[i] = b[order[i]];
  }
  double joint = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sa[j] == sa[i] && sb[j] == sb[i]) ++j;
    const double t = static_cast<double>(j - i);
    joint += t * (t - 1.0) / 2.0;
    i = j;
  }
  const auto ta = detail::tie_sums(sa);
  std::vector<double> buf(n);
  const auto discordant = static_cast<double>(detail::count_inversions(sb, buf, 0, n));
  const auto tb = detail::tie_sums(sb); // sb is now sorted

  const double nd = static_cast<double>(n);
  const double n0 = nd * (nd - 1.0) / 2.0;
  const double s = n0 - ta.pairs - tb.pairs + joint - 2.0 * discordant;
  const double denom = (n0 - ta.pairs) * (n0 - tb.pairs);
  if (!(denom > 0.0)) throw DegenerateError("Kendall tau undefined: a ranking is entirely tied");

  KendallResult r;
  r.tau = s / std::sqrt(denom);
  double var = (nd * (nd - 1.0) * (2.0 * nd + 5.0) - ta.v - tb.v) / 18.0 + ta.t1 * tb.t1 / (2.0 * nd * (nd - 1.0));
  if (n > 2) var += ta.t2 * tb.t2 / (9.0 * nd * (nd - 1.0) * (nd - 2.0));
  r.p_value = var > 0.0 ? std::erfc(std::abs(s) / std::sqrt(var) / std::numbers::sqrt2) : 1.0;
  return r;
}

inline constexpr const char* kAllScope = "All datasets";

struct RankingEntry
{
  std::string model;
  double value = 0.0;
};

struct Ranking
{
  Metric metric = Metric::final_fitness;
  Statistic stat;
  std::string scope;
  std::vector<RankingEntry> entries; // best first
};

namespace detail {

inline void order_entries(std::vector<RankingEntry>& e, Metric metric)
{
  const bool higher = higher_is_better(metric);
  std::sort(e.begin(), e.end(), [&](const RankingEntry& x, const RankingEntry& y) {
    if (x.value != y.value) return higher ? x.value > y.value : x.value < y.value;
    return x.model < y.model;
  });
}

// Index of the best entry among values (ties to the smallest model id).
inline std::size_t best_index(const std::vector<std::string>& models, const std::vector<double>& values, bool higher)
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const bool better = higher ? values[i] > values[best] : values[i] < values[best];
    if (better || (values[i] == values[best] && models[i] < models[best])) best = i;
  }
  return best;
}

} // namespace detail

// scope: a landscape name, or std::nullopt for the equal-weight average over
// all landscapes.
inline Ranking rank_models(const MetricTable& table, Metric metric, Statistic stat,
                           const std::optional<std::string>& scope = std::nullopt)
{
  const auto models = table.models();
  if (models.empty()) throw CoverageError("no metric rows to rank");
  const auto agg = aggregate(table, metric, stat);
  std::vector<std::string> landscapes;
  if (scope) landscapes = {*scope};
  else landscapes = table.landscapes();

  Ranking r;
  r.metric = metric;
  r.stat = stat;
  r.scope = scope ? *scope : kAllScope;
  for (const auto& m : models) {
    double sum = 0.0;
    for (const auto& l : landscapes) {
      auto it = agg.find({m, l});
      if (it == agg.end()) throw CoverageError("model '" + m + "' has no runs on landscape '" + l + "'");
      sum += it->second;
    }
    r.entries.push_back({m, sum / static_cast<double>(landscapes.size())});
  }
  detail::order_entries(r.entries, metric);
  return r;
}

// Kendall tau between mean-based and CVaR-based aggregates of all models.
inline KendallResult rank_agreement(const MetricTable& table, Metric metric, double alpha = 0.1,
                                    const std::optional<std::string>& scope = std::nullopt)
{
  const auto by_mean = rank_models(table, metric, Statistic::mean(), scope);
  const auto by_cvar = rank_models(table, metric, Statistic::cvar_at(alpha), scope);
  std::map<std::string, double> cv;
  for (const auto& e : by_cvar.entries) cv[e.model] = e.value;
  std::vector<double> a, b;
  for (const auto& e : by_mean.entries) {
    a.push_back(e.value);
    b.push_back(cv.at(e.model));
  }
  return kendall_tau(a, b);
}

struct AgreementRow
{
  std::string scope;
  KendallResult result;
};

inline std::vector<AgreementRow> rank_agreement_table(const MetricTable& table, Metric metric, double alpha = 0.1)
{
  std::vector<AgreementRow> rows;
  for (const auto& l : table.landscapes()) rows.push_back({l, rank_agreement(table, metric, alpha, l)});
  rows.push_back({kAllScope, rank_agreement(table, metric, alpha)});
  return rows;
}

struct BootstrapReport
{
  std::string scheme;   // naive | out_of_bag
  std::string quantity; // what the samples measure
  double point = 0.0;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::size_t n_bootstrap = 0;

  // A percentile interval that contains 0 is not significant.
  bool significant() const { return lower > 0.0 || upper < 0.0; }
};

inline nlohmann::json to_json(const BootstrapReport& r)
{
  return {{"scheme", r.scheme},         {"quantity", r.quantity}, {"point", r.point},
          {"median", r.median},         {"lower", r.lower},       {"upper", r.upper},
          {"level", r.level},           {"n_bootstrap", r.n_bootstrap},
          {"significant", r.significant()}};
}

// Percentile interval with linear interpolation between order statistics.
inline std::pair<double, double> percentile_interval(std::vector<double> samples, double level)
{
  if (samples.empty()) throw SizeError("percentile interval of no samples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  std::sort(samples.begin(), samples.end());
  const double tail = (1.0 - level) / 2.0;
  return {detail::quantile_sorted(samples, tail), detail::quantile_sorted(samples, 1.0 - tail)};
}

inline void fill_summary(BootstrapReport& r, const std::vector<double>& samples)
{
  std::tie(r.lower, r.upper) = percentile_interval(samples, r.level);
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  r.median = detail::quantile_sorted(s, 0.5);
  r.n_bootstrap = samples.size();
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers write only to
// slot i, so results do not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn)
{
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct BootstrapOptions
{
  std::size_t n_bootstrap = 1000;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  double level = 0.95;
  std::size_t jobs = 1;
};

namespace detail {

// Per-model runs on one landscape, keyed by seed.
struct LandscapeRuns
{
  std::vector<std::string> models;
  std::vector<std::map<std::uint64_t, const MetricRow*>> runs;
};

inline LandscapeRuns collect_runs(const MetricTable& table, const std::string& landscape)
{
  std::map<std::string, std::map<std::uint64_t, const MetricRow*>> by_model;
  for (const auto& r : table.rows)
    if (r.landscape == landscape) by_model[r.model][r.seed] = &r;
  if (by_model.empty()) throw CoverageError("no metric rows for landscape '" + landscape + "'");
  LandscapeRuns out;
  for (auto& [m, runs] : by_model) {
    out.models.push_back(m);
    out.runs.push_back(std::move(runs));
  }
  return out;
}

// Seeds present for every model, ascending.
inline std::vector<std::uint64_t> shared_seeds(const LandscapeRuns& data)
{
  std::vector<std::uint64_t> seeds;
  for (const auto& [s, row] : data.runs[0]) {
    bool everywhere = true;
    for (const auto& runs : data.runs) everywhere = everywhere && runs.count(s);
    if (everywhere) seeds.push_back(s);
  }
  return seeds;
}

inline std::uint64_t hash_id(std::string_view a, std::string_view b = {})
{
  return Digest().update(a).update(b).value();
}

} // namespace detail

// Cost savings from choosing the top model by CVaR instead of by mean
// final fitness. Each bootstrap sample redraws the seeds with replacement
// and applies the same draw to every model, which keeps runs paired by seed.
// Positive savings mean the CVaR choice is cheaper.
inline BootstrapReport bootstrap_naive(const MetricTable& table, const std::string& landscape,
                                       const BootstrapOptions& opt = {})
{
  const auto data = detail::collect_runs(table, landscape);
  const std::size_t M = data.models.size();
  const auto seeds = detail::shared_seeds(data);
  if (seeds.size() < 2) throw SizeError("bootstrap needs at least 2 seeds shared by all models");
  const std::size_t n = seeds.size();
  std::vector<std::vector<double>> fit(M, std::vector<double>(n)), cost(M, std::vector<double>(n));
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t i = 0; i < n; ++i) {
      const auto* row = data.runs[m].at(seeds[i]);
      fit[m][i] = row->final_fitness;
      cost[m][i] = row->cost_usd;
    }

  auto savings = [&](const std::vector<std::vector<double>>& f, const std::vector<std::vector<double>>& c) {
    std::vector<double> mean_f(M), cvar_f(M);
    for (std::size_t m = 0; m < M; ++m) {
      mean_f[m] = mean_of(f[m]);
      cvar_f[m] = cvar(f[m], opt.alpha, Tail::lower);
    }
    const auto by_mean = detail::best_index(data.models, mean_f, true);
    const auto by_cvar = detail::best_index(data.models, cvar_f, true);
    return mean_of(c[by_mean]) - mean_of(c[by_cvar]);
  };

  BootstrapReport r;
  r.scheme = "naive";
  r.quantity = "cost_savings_usd";
  r.level = opt.level;
  r.point = savings(fit, cost);

  std::vector<double> samples(opt.n_bootstrap);
  parallel_for(opt.n_bootstrap, opt.jobs, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(opt.seed, b, detail::hash_id(landscape)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::vector<double>> f(M, std::vector<double>(n)), c(M, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = pick(rng);
      for (std::size_t m = 0; m < M; ++m) {
        f[m][i] = fit[m][j];
        c[m][i] = cost[m][j];
      }
    }
    samples[b] = savings(f, c);
  });
  fill_summary(r, samples);
  return r;
}

struct OobReport
{
  BootstrapReport average;
  BootstrapReport worst;
  std::size_t n_partitions = 0;
  bool enumerated = true;
};

inline constexpr std::size_t kDefaultPartitionCap = 10000;

// Binomial coefficient, saturating at the max of size_t.
inline std::size_t binomial(std::size_t n, std::size_t k)
{
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t num = n - k + i;
    if (r > std::numeric_limits<std::size_t>::max() / num) return std::numeric_limits<std::size_t>::max();
    r = r * num / i; // exact: r * num is divisible by i at this step
  }
  return r;
}

// Out-of-bag evaluation: rank models on a rank_fraction share of the seeds
// and compare the selected models' costs on the held-out seeds, over all
// partitions (or `cap` uniformly sampled ones when there are more).
inline OobReport bootstrap_oob(const MetricTable& table, const std::string& landscape, double rank_fraction = 0.8,
                               std::size_t cap = kDefaultPartitionCap, const BootstrapOptions& opt = {})
{
  const auto data = detail::collect_runs(table, landscape);
  const std::size_t M = data.models.size();
  const auto seeds = detail::shared_seeds(data);
  const std::size_t n = seeds.size();
  if (n < 5) throw SizeError("out-of-bag bootstrap needs at least 5 seeds shared by all models");
  if (!(rank_fraction > 0.0 && rank_fraction < 1.0)) throw ConfigError("rank_fraction must lie in (0, 1)");
  const auto n_rank = static_cast<std::size_t>(std::llround(rank_fraction * static_cast<double>(n)));
  if (n_rank < 1 || n_rank >= n) throw ConfigError("rank_fraction leaves an empty ranking or evaluation set");
  const std::size_t n_eval = n - n_rank;
  if (cap == 0) throw ConfigError("partition cap must be positive");

  std::vector<std::vector<double>> fit(M, std::vector<double>(n)), cost(M, std::vector<double>(n));
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t i = 0; i < n; ++i) {
      const auto* row = data.runs[m].at(seeds[i]);
      fit[m][i] = row->final_fitness;
      cost[m][i] = row->cost_usd;
    }

  // Evaluation index sets, in lexicographic order when enumerated.
  const std::size_t total = binomial(n, n_eval);
  std::vector<std::vector<std::size_t>> partitions;
  OobReport out;
  if (total <= cap) {
    std::vector<std::size_t> idx(n_eval);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
      partitions.push_back(idx);
      std::size_t i = n_eval;
      while (i > 0 && idx[i - 1] == n - n_eval + (i - 1)) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < n_eval; ++j) idx[j] = idx[j - 1] + 1;
    }
  } else {
    out.enumerated = false;
    partitions.resize(cap);
    for (std::size_t p = 0; p < cap; ++p) {
      std::mt19937_64 rng(derive_seed(opt.seed, 0x00b, p));
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), std::size_t{0});
      for (std::size_t i = 0; i < n_eval; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(all[i], all[pick(rng)]);
      }
      partitions[p].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_eval));
      std::sort(partitions[p].begin(), partitions[p].end());
    }
  }
  out.n_partitions = partitions.size();

  std::vector<double> avg(partitions.size()), worst(partitions.size());
  parallel_for(partitions.size(), opt.jobs, [&](std::size_t p) {
    std::vector<char> is_eval(n, 0);
    for (auto i : partitions[p]) is_eval[i] = 1;
    std::vector<double> mean_f(M), cvar_f(M), rank_f;
    for (std::size_t m = 0; m < M; ++m) {
      rank_f.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (!is_eval[i]) rank_f.push_back(fit[m][i]);
      mean_f[m] = mean_of(rank_f);
      cvar_f[m] = cvar(rank_f, opt.alpha, Tail::lower);
    }
    const auto a = detail::best_index(data.models, mean_f, true);
    const auto c = detail::best_index(data.models, cvar_f, true);
    auto eval_stats = [&](std::size_t m) {
      double sum = 0.0, mx = -std::numeric_limits<double>::infinity();
      for (auto i : partitions[p]) {
        sum += cost[m][i];
        mx = std::max(mx, cost[m][i]);
      }
      return std::pair{sum / static_cast<double>(n_eval), mx};
    };
    const auto [avg_a, max_a] = eval_stats(a);
    const auto [avg_c, max_c] = eval_stats(c);
    avg[p] = avg_a - avg_c;
    worst[p] = max_a - max_c;
  });

  for (auto* r : {&out.average, &out.worst}) {
    r->scheme = "out_of_bag";
    r->level = opt.level;
  }
  out.average.quantity = "average_cost_savings_usd";
  out.worst.quantity = "worst_case_cost_savings_usd";
  out.average.point = mean_of(avg);
  out.worst.point = mean_of(worst);
  fill_summary(out.average, avg);
  fill_summary(out.worst, worst);
  return out;
}

struct CorrelationCell
{
  Metric metric = Metric::final_fitness;
  std::string stat;
  std::string property;
  double tau = std::numeric_limits<double>::quiet_NaN(); // NaN when undefined
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_defined = 0; // bootstrap samples with a defined tau
  bool significant() const { return n_defined > 0 && (lower > 0.0 || upper < 0.0); }
};

inline constexpr std::array<Metric, 3> kCorrelationMetrics = {Metric::final_fitness, Metric::delta_g_auc,
                                                               Metric::cost};

namespace detail {

// Kendall tau over landscapes with a finite property value; NaN when fewer
// than 3 remain or the tau is undefined.
inline KendallResult tau_or_missing(const std::vector<double>& property, const std::vector<double>& values)
{
  std::vector<double> a, b;
  for (std::size_t i = 0; i < property.size(); ++i)
    if (std::isfinite(property[i]) && std::isfinite(values[i])) {
      a.push_back(property[i]);
      b.push_back(values[i]);
    }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (a.size() < 3) return {nan, nan};
  try {
    return kendall_tau(a, b);
  } catch (const DegenerateError&) {
    return {nan, nan};
  }
}

} // namespace detail

// Kendall tau between each landscape property and the per-landscape
// model-average of mean and CVaR performance, with seed-bootstrap CIs.
inline std::vector<CorrelationCell> property_correlations(const std::vector<LandscapeProfile>& profiles,
                                                          const MetricTable& table, const BootstrapOptions& opt = {})
{
  const auto table_landscapes = table.landscapes();
  std::vector<const LandscapeProfile*> used;
  for (const auto& p : profiles)
    if (std::binary_search(table_landscapes.begin(), table_landscapes.end(), p.name)) used.push_back(&p);
  if (used.size() < 3) throw SizeError("property correlations need at least 3 profiled landscapes with runs");
  const std::size_t L = used.size();

  // groups[l][m] = rows of model m on landscape l
  std::vector<std::vector<std::vector<const MetricRow*>>> groups(L);
  std::vector<std::vector<std::string>> group_models(L);
  for (std::size_t l = 0; l < L; ++l) {
    std::map<std::string, std::vector<const MetricRow*>> by_model;
    for (const auto& r : table.rows)
      if (r.landscape == used[l]->name) by_model[r.model].push_back(&r);
    for (auto& [m, rows] : by_model) {
      group_models[l].push_back(m);
      groups[l].push_back(std::move(rows));
    }
  }

  const std::array<Statistic, 2> stats = {Statistic::mean(), Statistic::cvar_at(opt.alpha)};
  const std::size_t n_series = kCorrelationMetrics.size() * stats.size();
  // Per-landscape model-averaged value for each (metric, stat) series.
  auto series_values = [&](auto&& pick_rows) {
    std::vector<std::vector<double>> out(n_series, std::vector<double>(L));
    std::vector<double> vals;
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t mi = 0; mi < kCorrelationMetrics.size(); ++mi)
        for (std::size_t si = 0; si < stats.size(); ++si) {
          double sum = 0.0;
          for (std::size_t m = 0; m < groups[l].size(); ++m) {
            vals.clear();
            for (const auto* row : pick_rows(l, m)) vals.push_back(row->get(kCorrelationMetrics[mi]));
            sum += stats[si].apply(vals, kCorrelationMetrics[mi]);
          }
          out[mi * stats.size() + si][l] = sum / static_cast<double>(groups[l].size());
        }
    return out;
  };

  const auto prop_names = used[0]->properties();
  const std::size_t P = prop_names.size();
  std::vector<std::vector<double>> props(P, std::vector<double>(L));
  for (std::size_t l = 0; l < L; ++l) {
    const auto pr = used[l]->properties();
    for (std::size_t p = 0; p < P; ++p) props[p][l] = pr[p].second;
  }

  const auto point = series_values([&](std::size_t l, std::size_t m) -> const std::vector<const MetricRow*>& {
    return groups[l][m];
  });

  // samples[b][series][p]
  std::vector<std::vector<std::vector<double>>> samples(opt.n_bootstrap);
  parallel_for(opt.n_bootstrap, opt.jobs, [&](std::size_t b) {
    std::vector<std::vector<std::vector<const MetricRow*>>> resampled(L);
    for (std::size_t l = 0; l < L; ++l) {
      resampled[l].resize(groups[l].size());
      for (std::size_t m = 0; m < groups[l].size(); ++m) {
        const auto& src = groups[l][m];
        std::mt19937_64 rng(derive_seed(opt.seed, b, detail::hash_id(used[l]->name, group_models[l][m])));
        std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
        for (std::size_t i = 0; i < src.size(); ++i) resampled[l][m].push_back(src[pick(rng)]);
      }
    }
    const auto vals = series_values([&](std::size_t l, std::size_t m) -> const std::vector<const MetricRow*>& {
      return resampled[l][m];
    });
    samples[b].assign(n_series, std::vector<double>(P));
    for (std::size_t s = 0; s < n_series; ++s)
      for (std::size_t p = 0; p < P; ++p) samples[b][s][p] = detail::tau_or_missing(props[p], vals[s]).tau;
  });

  std::vector<CorrelationCell> cells;
  for (std::size_t s = 0; s < n_series; ++s)
    for (std::size_t p = 0; p < P; ++p) {
      CorrelationCell c;
      c.metric = kCorrelationMetrics[s / stats.size()];
      c.stat = stats[s % stats.size()].name();
      c.property = prop_names[p].first;
      const auto k = detail::tau_or_missing(props[p], point[s]);
      c.tau = k.tau;
      c.p_value = k.p_value;
      std::vector<double> defined;
      for (const auto& smp : samples)
        if (std::isfinite(smp[s][p])) defined.push_back(smp[s][p]);
      c.n_defined = defined.size();
      if (!defined.empty()) std::tie(c.lower, c.upper) = percentile_interval(defined, opt.level);
      cells.push_back(std::move(c));
    }
  return cells;
}

struct PropertyAgreement
{
  std::string property;
  KendallResult result; // NaN tau when undefined
};

inline std::vector<PropertyAgreement> agreement_property_correlation(const std::map<std::string, double>& agreement,
                                                                     const std::vector<LandscapeProfile>& profiles)
{
  std::vector<const LandscapeProfile*> used;
  std::vector<double> values;
  for (const auto& p : profiles)
    if (auto it = agreement.find(p.name); it != agreement.end()) {
      used.push_back(&p);
      values.push_back(it->second);
    }
  if (used.size() < 3) throw SizeError("agreement correlation needs at least 3 landscapes");
  std::vector<PropertyAgreement> out;
  const auto names = used[0]->properties();
  for (std::size_t p = 0; p < names.size(); ++p) {
    std::vector<double> prop;
    for (const auto* u : used) prop.push_back(u->properties()[p].second);
    out.push_back({names[p].first, detail::tau_or_missing(prop, values)});
  }
  return out;
}

struct ParetoPoint
{
  std::string id;
  double performance = 0.0;
  double risk = 0.0;
};

struct ParetoDirections
{
  bool performance_higher_better = true;
  bool risk_higher_better = true; // e.g. CVaR of fitness
};

// Points not strictly dominated, sorted by performance ascending (ties by id).
inline std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points, ParetoDirections dir = {})
{
  if (points.empty()) throw SizeError("pareto_front of an empty set");
  // Map both axes to higher-is-better.
  auto gx = [&](const ParetoPoint& p) { return dir.performance_higher_better ? p.performance : -p.performance; };
  auto gy = [&](const ParetoPoint& p) { return dir.risk_higher_better ? p.risk : -p.risk; };
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (gx(points[a]) != gx(points[b])) return gx(points[a]) > gx(points[b]);
    return gy(points[a]) > gy(points[b]);
  });

  std::vector<ParetoPoint> front;
  double best_y = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    // Group of equal x; its best y comes first.
    std::size_t j = i;
    const double group_y = gy(points[order[i]]);
    while (j < order.size() && gx(points[order[j]]) == gx(points[order[i]])) ++j;
    if (group_y > best_y)
      for (std::size_t k = i; k < j && gy(points[order[k]]) == group_y; ++k) front.push_back(points[order[k]]);
    best_y = std::max(best_y, group_y);
    i = j;
  }
  std::sort(front.begin(), front.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    return a.performance != b.performance ? a.performance < b.performance : a.id < b.id;
  });
  return front;
}

} // namespace riskbo
