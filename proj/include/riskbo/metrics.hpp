#pragma once

// Per-run performance, cold-start, risk and cost metrics.

#include "riskbo/campaign.hpp"

namespace riskbo {

enum class Tail
{
  lower, // low values are bad (fitness, delta-G AUC)
  upper  // high values are bad (cost)
};

// Empirical alpha-quantile: the ceil(alpha * n)-th smallest value.
inline double value_at_risk(std::span<const double> values, double alpha)
{
  if (values.empty()) throw SizeError("VaR of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t k = ceil_count(alpha, v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

// Expected shortfall. Lower tail: mean of the values <= VaR_alpha. Upper
// tail mirrors through negation: mean of the values >= the ceil(alpha n)-th
// largest.
inline double cvar(std::span<const double> values, double alpha, Tail tail = Tail::lower)
{
  if (tail == Tail::upper) {
    std::vector<double> neg(values.size());
    std::transform(values.begin(), values.end(), neg.begin(), [](double x) { return -x; });
    return -cvar(neg, alpha, Tail::lower);
  }
  const double threshold = value_at_risk(values, alpha);
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : values)
    if (x <= threshold) {
      sum += x;
      ++n;
    }
  return sum / static_cast<double>(n);
}

inline double value_at_risk(std::span<const double> values, double alpha, Tail tail)
{
  if (tail == Tail::lower) return value_at_risk(values, alpha);
  std::vector<double> neg(values.size());
  std::transform(values.begin(), values.end(), neg.begin(), [](double x) { return -x; });
  return -value_at_risk(neg, alpha);
}

// Payoff difference for k = 1..K against the paired baseline.
inline std::vector<double> delta_g_curve(const RunRecord& model_run, const RunRecord& baseline_run)
{
  if (model_run.landscape != baseline_run.landscape || model_run.seed != baseline_run.seed)
    throw PairingError("runs differ in landscape or seed");
  if (model_run.payoff_curve.size() != baseline_run.payoff_curve.size())
    throw PairingError("runs differ in number of cycles");
  if (model_run.acquired.empty() || baseline_run.acquired.empty() || model_run.acquired[0] != baseline_run.acquired[0])
    throw PairingError("runs do not share the seed pool");
  std::vector<double> out;
  for (std::size_t k = 1; k < model_run.payoff_curve.size(); ++k)
    out.push_back(model_run.payoff_curve[k] - baseline_run.payoff_curve[k]);
  return out;
}

// Trapezoidal area at unit spacing; a single point is its own area.
inline double delta_g_auc(std::span<const double> curve)
{
  if (curve.empty()) throw SizeError("delta-G curve is empty");
  if (curve.size() == 1) return curve[0];
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < curve.size(); ++k) area += 0.5 * (curve[k] + curve[k + 1]);
  return area;
}

struct CostModel
{
  double unit_cost = 150.0;
  bool includes_seed = true;

  void validate() const
  {
    if (!(unit_cost > 0.0)) throw ConfigError("unit cost must be positive");
  }
};

struct CostResult
{
  double cost = 0.0;
  bool censored = false;
  std::optional<std::size_t> hit_cycle;
};

// Threshold at a fitness percentile of the campaign pool: the
// ceil((1 - p/100) N)-th largest normalized fitness, so exactly that many
// pool members reach it when there are no ties.
inline double fitness_threshold(const Landscape& landscape, const SplitPlan& split, double percentile)
{
  if (!(percentile > 0.0 && percentile < 100.0)) throw ConfigError("percentile must lie in (0, 100)");
  std::vector<double> v;
  v.reserve(split.campaign_pool.size());
  for (auto i : split.campaign_pool) v.push_back(landscape.norm_fitness()[i]);
  if (v.empty()) throw SizeError("empty campaign pool");
  const std::size_t k = ceil_count((100.0 - percentile) / 100.0, v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<>());
  return v[k - 1];
}

inline CostResult cost_to_threshold(const RunRecord& run, double threshold, const CostModel& cost_model)
{
  cost_model.validate();
  std::size_t spent = 0;
  for (std::size_t k = 0; k < run.payoff_curve.size(); ++k) {
    if (k > 0 || cost_model.includes_seed) spent += run.acquired[k].size();
    if (run.payoff_curve[k] >= threshold) return {static_cast<double>(spent) * cost_model.unit_cost, false, k};
  }
  return {static_cast<double>(spent) * cost_model.unit_cost, true, std::nullopt};
}

inline CostResult cost_to_threshold(const RunRecord& run, const Landscape& landscape, const SplitPlan& split,
                                    const CostModel& cost_model, double percentile = 99.0)
{
  return cost_to_threshold(run, fitness_threshold(landscape, split, percentile), cost_model);
}

inline std::size_t count_above_threshold(const RunRecord& run, const Landscape& landscape, double threshold)
{
  std::size_t n = 0;
  for (const auto& batch : run.acquired)
    for (auto i : batch) n += landscape.norm_fitness()[i] >= threshold;
  return n;
}

inline std::size_t count_above_threshold(const RunRecord& run, const Landscape& landscape, const SplitPlan& split,
                                         double percentile = 99.0)
{
  return count_above_threshold(run, landscape, fitness_threshold(landscape, split, percentile));
}

enum class Metric
{
  final_fitness,
  delta_g_auc,
  cost,
  n_above
};

inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::final_fitness, Metric::delta_g_auc, Metric::cost,
                                                      Metric::n_above};

inline std::string to_string(Metric m)
{
  switch (m) {
    case Metric::final_fitness: return "final_fitness";
    case Metric::delta_g_auc: return "delta_g_auc";
    case Metric::cost: return "cost_usd";
    case Metric::n_above: return "n_above_p99";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s)
{
  for (auto m : kAllMetrics)
    if (to_string(m) == s) return m;
  if (s == "cost") return Metric::cost;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

inline bool higher_is_better(Metric m) { return m != Metric::cost; }
inline Tail risk_tail(Metric m) { return higher_is_better(m) ? Tail::lower : Tail::upper; }

struct MetricRow
{
  std::string model;
  std::string landscape;
  std::uint64_t seed = 0;
  double final_fitness = 0.0;
  double delta_g_auc = 0.0;
  double cost_usd = 0.0;
  bool censored = false;
  std::size_t n_above = 0;
  std::vector<double> payoff_curve;
  std::vector<double> delta_g;

  double get(Metric m) const
  {
    switch (m) {
      case Metric::final_fitness: return final_fitness;
      case Metric::delta_g_auc: return delta_g_auc;
      case Metric::cost: return cost_usd;
      case Metric::n_above: return static_cast<double>(n_above);
    }
    return 0.0;
  }
};

struct MetricTable
{
  std::vector<MetricRow> rows;
  std::size_t excluded_failed = 0;

  std::vector<std::string> models() const
  {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.model);
    return {s.begin(), s.end()};
  }
  std::vector<std::string> landscapes() const
  {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.landscape);
    return {s.begin(), s.end()};
  }
};

struct MetricContext
{
  const Landscape* landscape = nullptr;
  const SplitPlan* split = nullptr;
};

// Rows for every non-failed model run that has a paired baseline. Failed
// runs are counted and dropped.
inline MetricTable compute_metric_table(const std::vector<RunRecord>& records,
                                        const std::map<std::string, MetricContext>& contexts,
                                        const CostModel& cost_model = {}, double percentile = 99.0)
{
  std::map<std::pair<std::string, std::uint64_t>, const RunRecord*> baselines;
  for (const auto& r : records)
    if (r.is_baseline) baselines[{r.landscape, r.seed}] = &r;

  std::map<std::string, double> thresholds;
  MetricTable table;
  for (const auto& r : records) {
    if (r.is_baseline) continue;
    if (r.failed) {
      ++table.excluded_failed;
      continue;
    }
    auto ctx = contexts.find(r.landscape);
    if (ctx == contexts.end()) throw CoverageError("no landscape context for '" + r.landscape + "'");
    auto base = baselines.find({r.landscape, r.seed});
    if (base == baselines.end())
      throw PairingError("no baseline for landscape '" + r.landscape + "' seed " + std::to_string(r.seed));
    auto thr = thresholds.find(r.landscape);
    if (thr == thresholds.end())
      thr = thresholds.emplace(r.landscape, fitness_threshold(*ctx->second.landscape, *ctx->second.split, percentile)).first;

    MetricRow row;
    row.model = r.model;
    row.landscape = r.landscape;
    row.seed = r.seed;
    row.final_fitness = r.final_fitness();
    row.payoff_curve = r.payoff_curve;
    row.delta_g = delta_g_curve(r, *base->second);
    row.delta_g_auc = row.delta_g.empty() ? 0.0 : delta_g_auc(row.delta_g);
    const auto c = cost_to_threshold(r, thr->second, cost_model);
    row.cost_usd = c.cost;
    row.censored = c.censored;
    row.n_above = count_above_threshold(r, *ctx->second.landscape, thr->second);
    table.rows.push_back(std::move(row));
  }
  if (table.excluded_failed > 0)
    log_warning("excluded " + std::to_string(table.excluded_failed) + " failed runs from metrics");
  std::sort(table.rows.begin(), table.rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.landscape, a.model, a.seed) < std::tie(b.landscape, b.model, b.seed);
  });
  return table;
}

struct Statistic
{
  enum class Kind
  {
    mean,
    cvar
  } kind = Kind::mean;
  double alpha = 0.1;

  static Statistic mean() { return {Kind::mean, 0.1}; }
  static Statistic cvar_at(double alpha = 0.1) { return {Kind::cvar, alpha}; }

  std::string name() const
  {
    if (kind == Kind::mean) return "mean";
    std::ostringstream os;
    os << "cvar" << alpha;
    return os.str();
  }

  double apply(std::span<const double> values, Metric metric) const
  {
    if (values.empty()) throw SizeError("statistic of an empty sample");
    if (kind == Kind::mean) return mean_of(values);
    return cvar(values, alpha, risk_tail(metric));
  }
};

using ModelLandscapeKey = std::pair<std::string, std::string>; // (model, landscape)

// Mean or CVaR over seeds per (model, landscape). Censored costs enter at
// their full-budget value.
inline std::map<ModelLandscapeKey, double> aggregate(const MetricTable& table, Metric metric, Statistic stat)
{
  std::map<ModelLandscapeKey, std::vector<double>> groups;
  for (const auto& r : table.rows) groups[{r.model, r.landscape}].push_back(r.get(metric));
  std::map<ModelLandscapeKey, double> out;
  for (const auto& [k, v] : groups) out[k] = stat.apply(v, metric);
  return out;
}

} // namespace riskbo
