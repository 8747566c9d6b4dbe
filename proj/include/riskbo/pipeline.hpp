#pragma once

// Benchmark configuration and the profile / tune / run / report commands.
// The executable in tools/ is a thin flag parser over this header.

#include "riskbo/stats.hpp"

#include <cstdio>
#include <iomanip>

namespace riskbo {

enum ExitCode : int
{
  kExitOk = 0,
  kExitValidation = 1,
  kExitPartial = 2
};

struct LandscapeSource
{
  std::string name; // defaults to the file stem
  std::string path; // empty for synthetic landscapes
  std::string alphabet = std::string(kAminoAcids);
  std::map<std::string, std::string> embeddings; // encoding label -> CSV path
  std::optional<SyntheticSpec> synthetic;
};

struct BenchmarkConfig
{
  std::vector<LandscapeSource> landscapes;
  std::vector<SurrogateKind> surrogates{kAllSurrogates.begin(), kAllSurrogates.end()};
  std::vector<AcquisitionKind> acquisitions{kAllAcquisitions.begin(), kAllAcquisitions.end()};
  std::vector<std::string> encodings{"onehot"};
  CampaignConfig campaign;
  CostModel cost;
  double percentile = 99.0;
  double alpha = 0.1;
  std::size_t n_bootstrap = 1000;
  double oob_rank_fraction = 0.8;
  std::size_t oob_cap = kDefaultPartitionCap;
  bool full_pool = false; // campaign over every variant, no tuning hold-out
  std::uint64_t seed = 0;  // split and bootstrap seed

  // Execution settings; they do not change results and stay out of the digest.
  std::string out = "riskbo_out";
  std::size_t jobs = 1;
  std::size_t top = 0; // 0 = full rankings
  bool tune = false;

  std::vector<ModelSpec> models() const { return model_grid(surrogates, acquisitions, encodings); }

  nlohmann::json to_json() const
  {
    nlohmann::json ls = nlohmann::json::array();
    for (const auto& l : landscapes) {
      nlohmann::json j{{"name", l.name}};
      if (l.synthetic) {
        j["synthetic"] = {{"model", to_string(l.synthetic->model)}, {"length", l.synthetic->length},
                          {"alphabet", l.synthetic->alphabet},      {"k", l.synthetic->k},
                          {"seed", l.synthetic->seed}};
      } else {
        j["path"] = l.path;
        j["alphabet"] = l.alphabet;
        j["embeddings"] = l.embeddings;
      }
      ls.push_back(std::move(j));
    }
    std::vector<std::string> s, a;
    for (auto k : surrogates) s.push_back(to_string(k));
    for (auto k : acquisitions) a.push_back(to_string(k));
    return {{"landscapes", ls},
            {"surrogates", s},
            {"acquisitions", a},
            {"encodings", encodings},
            {"campaign",
             {{"n_init", campaign.n_init},
              {"batch_size", campaign.batch_size},
              {"n_cycles", campaign.n_cycles},
              {"seeds", campaign.seeds},
              {"observation_noise", campaign.observation_noise}}},
            {"cost", {{"unit_cost", cost.unit_cost}, {"includes_seed", cost.includes_seed}}},
            {"percentile", percentile},
            {"alpha", alpha},
            {"n_bootstrap", n_bootstrap},
            {"oob_rank_fraction", oob_rank_fraction},
            {"oob_cap", oob_cap},
            {"full_pool", full_pool},
            {"seed", seed}};
  }

  std::string digest() const { return Digest().update(to_json().dump()).hex(); }

  // Checks that referenced files exist and the grid is nonempty.
  void validate() const
  {
    if (landscapes.empty()) throw ConfigError("no landscapes configured (use --data or a config file)");
    if (models().empty()) throw ConfigError("model grid filters select no models");
    std::set<std::string> names;
    for (const auto& l : landscapes) {
      if (!names.insert(l.name).second) throw ConfigError("duplicate landscape name '" + l.name + "'");
      if (!l.synthetic && !std::filesystem::exists(l.path))
        throw ConfigError("landscape file not found: " + l.path);
      for (const auto& [label, path] : l.embeddings)
        if (!std::filesystem::exists(path)) throw ConfigError("embedding file not found: " + path);
      for (const auto& e : encodings)
        if (e != "onehot" && !l.embeddings.count(e))
          throw ConfigError("landscape '" + l.name + "' has no embedding file for encoding '" + e + "'");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(percentile > 0.0 && percentile < 100.0)) throw ConfigError("percentile must lie in (0, 100)");
    if (campaign.seeds.empty()) throw ConfigError("campaign needs at least one seed");
    if (n_bootstrap == 0) throw ConfigError("n_bootstrap must be positive");
    cost.validate();
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline std::string stem_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

} // namespace detail

inline LandscapeSource landscape_from_path(const std::string& path)
{
  LandscapeSource s;
  s.path = path;
  s.name = detail::stem_of(path);
  return s;
}

// Relative paths in a config file resolve against the file's directory.
inline BenchmarkConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {})
{
  detail::check_keys(j,
                     {"landscapes", "synthetic", "surrogates", "acquisitions", "encodings", "campaign", "cost",
                      "percentile", "alpha", "n_bootstrap", "oob_rank_fraction", "oob_cap", "full_pool", "seed",
                      "out", "jobs", "top", "tune"},
                     "config");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return (fp.is_relative() && !base.empty() ? base / fp : fp).string();
  };
  BenchmarkConfig c;
  try {
    for (const auto& l : j.value("landscapes", nlohmann::json::array())) {
      if (l.is_string()) {
        c.landscapes.push_back(landscape_from_path(resolve(l.get<std::string>())));
        continue;
      }
      detail::check_keys(l, {"name", "path", "alphabet", "embeddings"}, "landscape entry");
      auto s = landscape_from_path(resolve(l.at("path").get<std::string>()));
      s.name = l.value("name", s.name);
      s.alphabet = l.value("alphabet", s.alphabet);
      for (const auto& [label, path] : l.value("embeddings", nlohmann::json::object()).items())
        s.embeddings[label] = resolve(path.get<std::string>());
      c.landscapes.push_back(std::move(s));
    }
    for (const auto& sj : j.value("synthetic", nlohmann::json::array())) {
      detail::check_keys(sj, {"name", "model", "length", "alphabet", "k", "seed"}, "synthetic entry");
      SyntheticSpec spec;
      spec.model = parse_synthetic_model(sj.value("model", std::string("additive")));
      spec.length = sj.value("length", spec.length);
      spec.alphabet = sj.value("alphabet", spec.alphabet);
      spec.k = sj.value("k", spec.k);
      spec.seed = sj.value("seed", spec.seed);
      LandscapeSource s;
      s.name = sj.value("name", "synthetic_" + to_string(spec.model) + "_" + std::to_string(c.landscapes.size()));
      spec.name = s.name;
      s.alphabet.clear();
      s.synthetic = spec;
      c.landscapes.push_back(std::move(s));
    }
    if (j.contains("surrogates")) {
      c.surrogates.clear();
      for (const auto& s : j["surrogates"]) c.surrogates.push_back(parse_surrogate_kind(s.get<std::string>()));
    }
    if (j.contains("acquisitions")) {
      c.acquisitions.clear();
      for (const auto& s : j["acquisitions"]) c.acquisitions.push_back(parse_acquisition_kind(s.get<std::string>()));
    }
    if (j.contains("encodings")) c.encodings = j["encodings"].get<std::vector<std::string>>();
    if (j.contains("campaign")) {
      const auto& cj = j["campaign"];
      detail::check_keys(cj, {"n_init", "batch_size", "n_cycles", "seeds", "n_seeds", "observation_noise"}, "campaign");
      c.campaign.n_init = cj.value("n_init", c.campaign.n_init);
      c.campaign.batch_size = cj.value("batch_size", c.campaign.batch_size);
      c.campaign.n_cycles = cj.value("n_cycles", c.campaign.n_cycles);
      c.campaign.observation_noise = cj.value("observation_noise", c.campaign.observation_noise);
      if (cj.contains("seeds") && cj.contains("n_seeds")) throw ConfigError("give either seeds or n_seeds, not both");
      if (cj.contains("seeds")) c.campaign.seeds = cj["seeds"].get<std::vector<std::uint64_t>>();
      if (cj.contains("n_seeds")) c.campaign.seeds = CampaignConfig::default_seeds(cj["n_seeds"].get<std::size_t>());
    }
    if (j.contains("cost")) {
      detail::check_keys(j["cost"], {"unit_cost", "includes_seed"}, "cost");
      c.cost.unit_cost = j["cost"].value("unit_cost", c.cost.unit_cost);
      c.cost.includes_seed = j["cost"].value("includes_seed", c.cost.includes_seed);
    }
    c.percentile = j.value("percentile", c.percentile);
    c.alpha = j.value("alpha", c.alpha);
    c.n_bootstrap = j.value("n_bootstrap", c.n_bootstrap);
    c.oob_rank_fraction = j.value("oob_rank_fraction", c.oob_rank_fraction);
    c.oob_cap = j.value("oob_cap", c.oob_cap);
    c.full_pool = j.value("full_pool", c.full_pool);
    c.seed = j.value("seed", c.seed);
    if (j.contains("out")) c.out = resolve(j["out"].get<std::string>());
    c.jobs = j.value("jobs", c.jobs);
    c.top = j.value("top", c.top);
    c.tune = j.value("tune", c.tune);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

inline BenchmarkConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string format_number(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string header_comment(const BenchmarkConfig& config)
{
  return std::string("# riskbo ") + kVersion + " config=" + config.digest() + "\n";
}

// Writes via a temporary file so readers never see a half-written output.
inline void write_text(const std::filesystem::path& path, const std::string& text)
{
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Landscape loading

inline Landscape load_source(const LandscapeSource& src)
{
  if (src.synthetic) return generate_synthetic(*src.synthetic);
  return load_landscape(src.path, src.name, src.alphabet);
}

inline SplitPlan split_for(const BenchmarkConfig& config, const Landscape& landscape)
{
  return config.full_pool ? full_pool_split(landscape) : make_split(landscape, config.seed);
}

inline std::unique_ptr<LandscapeContext> load_context(const BenchmarkConfig& config, const LandscapeSource& src,
                                                      bool with_encodings)
{
  auto landscape = load_source(src);
  auto split = split_for(config, landscape);
  auto ctx = std::make_unique<LandscapeContext>(LandscapeContext{std::move(landscape), std::move(split), {}});
  if (with_encodings)
    for (const auto& e : config.encodings)
      ctx->encodings.emplace(e, e == "onehot" ? encode_one_hot(ctx->landscape)
                                              : load_embeddings(ctx->landscape, src.embeddings.at(e), e));
  return ctx;
}

// ---------------------------------------------------------------------------
// profile

inline constexpr const char* kProfileHeader =
  "dataset,active_pct,threshold,n,ruggedness,peak_fitness,kurtosis,kde_peaks,local_optima,"
  "magnitude_epistasis,non_magnitude_epistasis,skewness,flags";

inline std::string profile_row(const LandscapeProfile& p)
{
  std::string flags;
  for (const auto& f : p.flags) flags += (flags.empty() ? "" : "; ") + f;
  std::ostringstream os;
  os << csv_field(p.name) << ',' << format_number(p.active_pct) << ',' << format_number(p.otsu_threshold) << ','
     << p.n << ',' << format_number(p.ruggedness) << ',' << format_number(p.cauchy_peak) << ','
     << format_number(p.kurtosis) << ',' << format_number(p.kde_peaks) << ',' << format_number(p.local_optima) << ','
     << format_number(p.magnitude_epistasis_pct) << ',' << format_number(p.non_magnitude_epistasis_pct) << ','
     << format_number(p.skewness) << ',' << csv_field(flags);
  return os.str();
}

inline int cmd_profile(const BenchmarkConfig& config, std::ostream& log = std::cout)
{
  config.validate();
  std::string text = header_comment(config) + kProfileHeader + "\n";
  std::size_t failed = 0;
  for (const auto& src : config.landscapes) {
    try {
      const auto p = profile(load_source(src));
      text += profile_row(p) + "\n";
      log << "profiled " << src.name << " (" << p.n << " variants)\n";
    } catch (const Error& e) {
      ++failed;
      log_warning("profile of '" + src.name + "' failed: " + e.what());
    }
  }
  const auto path = std::filesystem::path(config.out) / "profile.csv";
  write_text(path, text);
  log << "wrote " << path.string() << '\n';
  return failed == 0 ? kExitOk : failed == config.landscapes.size() ? kExitValidation : kExitPartial;
}

// ---------------------------------------------------------------------------
// tune

// Grid-search winners keyed by (landscape, landscape digest, split seed,
// encoding, surrogate), persisted as JSON.
class TuningCache
{
public:
  explicit TuningCache(std::filesystem::path path) : path_(std::move(path))
  {
    if (!std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    try {
      data_ = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error("tuning cache '" + path_.string() + "' is corrupt (" + e.what() + "); delete it to retune");
    }
  }

  static std::string key(const LandscapeContext& ctx, const std::string& encoding, SurrogateKind kind)
  {
    return ctx.landscape.name() + "|" + ctx.landscape.digest() + "|" + std::to_string(ctx.split.split_seed) + "|" +
           encoding + "|" + to_string(kind);
  }

  std::optional<SurrogateSpec> lookup(const std::string& k) const
  {
    std::lock_guard lock(mutex_);
    if (!data_.contains(k)) return std::nullopt;
    return surrogate_from_json(data_[k].at("spec"));
  }

  void store(const std::string& k, const GridSearchResult& r)
  {
    std::lock_guard lock(mutex_);
    data_[k] = {{"spec", riskbo::to_json(r.spec)},
                {"test_rmse", std::isfinite(r.test_rmse) ? nlohmann::json(r.test_rmse) : nlohmann::json(nullptr)},
                {"n_evaluated", r.n_evaluated},
                {"n_failed", r.n_failed}};
    write_text(path_, data_.dump(2) + "\n");
  }

  std::size_t size() const
  {
    std::lock_guard lock(mutex_);
    return data_.size();
  }

private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  nlohmann::json data_ = nlohmann::json::object();
};

inline std::filesystem::path tuning_cache_path(const BenchmarkConfig& config)
{
  return std::filesystem::path(config.out) / "tuning.json";
}

struct TuneSummary
{
  std::size_t tuned = 0, cached = 0, failed = 0;
};

inline TuneSummary tune_contexts(const BenchmarkConfig& config, const std::vector<const LandscapeContext*>& contexts,
                                 TuningCache& cache)
{
  struct Cell
  {
    const LandscapeContext* ctx;
    std::string encoding;
    SurrogateKind kind;
  };
  std::vector<Cell> cells;
  for (const auto* ctx : contexts)
    for (const auto& e : config.encodings)
      for (auto k : config.surrogates) cells.push_back({ctx, e, k});

  TuneSummary s;
  std::atomic<std::size_t> tuned{0}, cached{0}, failed{0};
  parallel_for(cells.size(), config.jobs, [&](std::size_t i) {
    const auto& c = cells[i];
    const auto k = TuningCache::key(*c.ctx, c.encoding, c.kind);
    if (cache.lookup(k)) {
      ++cached;
      return;
    }
    try {
      cache.store(k, grid_search(c.kind, c.ctx->landscape, c.ctx->split, c.ctx->encodings.at(c.encoding),
                                 derive_seed(config.seed, 0x7e5)));
      ++tuned;
    } catch (const Error& e) {
      ++failed;
      log_warning("tuning " + c.ctx->landscape.name() + "/" + c.encoding + "/" + to_string(c.kind) +
                  " failed: " + e.what());
    }
  });
  s.tuned = tuned;
  s.cached = cached;
  s.failed = failed;
  return s;
}

inline int cmd_tune(const BenchmarkConfig& config, std::ostream& log = std::cout)
{
  config.validate();
  if (config.full_pool) throw ConfigError("full_pool campaigns hold out no tuning data; tuning is unavailable");
  std::vector<std::unique_ptr<LandscapeContext>> owned;
  std::vector<const LandscapeContext*> contexts;
  for (const auto& src : config.landscapes) {
    owned.push_back(load_context(config, src, true));
    contexts.push_back(owned.back().get());
  }
  TuningCache cache(tuning_cache_path(config));
  const auto s = tune_contexts(config, contexts, cache);
  log << "tuning: " << s.tuned << " tuned, " << s.cached << " cached, " << s.failed << " failed\n";
  return s.failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// run

inline std::filesystem::path run_store_path(const BenchmarkConfig& config)
{
  return std::filesystem::path(config.out) / "runs";
}

inline int cmd_run(const BenchmarkConfig& config, std::ostream& log = std::cout)
{
  config.validate();
  std::vector<std::unique_ptr<LandscapeContext>> owned;
  std::vector<const LandscapeContext*> contexts;
  for (const auto& src : config.landscapes) {
    owned.push_back(load_context(config, src, true));
    contexts.push_back(owned.back().get());
  }

  SpecResolver resolver;
  std::optional<TuningCache> cache;
  if (!config.full_pool) {
    cache.emplace(tuning_cache_path(config));
    if (config.tune) {
      const auto s = tune_contexts(config, contexts, *cache);
      log << "tuning: " << s.tuned << " tuned, " << s.cached << " cached, " << s.failed << " failed\n";
    }
    for (const auto* ctx : contexts)
      for (const auto& e : config.encodings)
        for (auto k : config.surrogates)
          if (!cache->lookup(TuningCache::key(*ctx, e, k)))
            throw ConfigError("no tuned hyperparameters for " + ctx->landscape.name() + "/" + e + "/" + to_string(k) +
                              "; run `tune` first or pass --tune");
    resolver = [&cache](const ModelSpec& m, const LandscapeContext& ctx) {
      return *cache->lookup(TuningCache::key(ctx, m.encoding, m.surrogate.kind));
    };
  }

  CampaignConfig campaign = config.campaign;
  RunStore store(run_store_path(config));
  const auto summary = run_grid(config.models(), contexts, campaign, &store, config.jobs, resolver, true);
  log << summary.completed << " new runs, " << summary.skipped << " resumed, " << summary.failed << " failed ("
      << config.models().size() << " models x " << contexts.size() << " landscapes x " << campaign.seeds.size()
      << " seeds)\n";
  return summary.failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportInputs
{
  std::vector<std::unique_ptr<LandscapeContext>> contexts;
  std::map<std::string, MetricContext> metric_contexts;
  std::vector<RunRecord> records; // matching the current config only
  std::size_t stale = 0;
};

inline ReportInputs load_report_inputs(const BenchmarkConfig& config)
{
  ReportInputs in;
  const auto store_dir = run_store_path(config);
  if (!std::filesystem::exists(store_dir)) throw ConfigError("no run store at " + store_dir.string());
  RunStore store(store_dir);
  if (store.records().empty()) throw ConfigError("run store at " + store_dir.string() + " is empty");
  for (const auto& src : config.landscapes) {
    in.contexts.push_back(load_context(config, src, false));
    const auto& ctx = *in.contexts.back();
    in.metric_contexts[ctx.landscape.name()] = {&ctx.landscape, &ctx.split};
  }
  std::set<std::string> wanted;
  for (const auto& m : config.models()) wanted.insert(m.id());
  for (const auto& r : store.records()) {
    auto it = std::find_if(in.contexts.begin(), in.contexts.end(),
                           [&](const auto& c) { return c->landscape.name() == r.landscape; });
    const bool in_scope = it != in.contexts.end() && (r.is_baseline || wanted.count(r.model)) &&
                          std::find(config.campaign.seeds.begin(), config.campaign.seeds.end(), r.seed) !=
                            config.campaign.seeds.end();
    if (!in_scope) continue;
    if (r.config_digest !=
        run_digest(config.campaign, (*it)->landscape, (*it)->split, r.model, r.is_baseline ? "" : r.hyperparams)) {
      ++in.stale;
      continue;
    }
    in.records.push_back(r);
  }
  if (in.stale) log_warning("ignored " + std::to_string(in.stale) + " run records from a different configuration");
  if (in.records.empty()) throw ConfigError("run store has no records for this configuration");
  return in;
}

namespace detail {

inline std::string metric_csv(const MetricTable& table, const std::string& header, double percentile)
{
  std::ostringstream os;
  os << header << "model,landscape,seed,final_fitness,delta_g_auc,cost_usd,censored,n_above_p"
     << format_number(percentile) << "\n";
  for (const auto& r : table.rows)
    os << csv_field(r.model) << ',' << csv_field(r.landscape) << ',' << r.seed << ',' << format_number(r.final_fitness)
       << ',' << format_number(r.delta_g_auc) << ',' << format_number(r.cost_usd) << ',' << (r.censored ? 1 : 0)
       << ',' << r.n_above << '\n';
  return os.str();
}

inline std::string curves_csv(const MetricTable& table, const std::string& header)
{
  // Mean payoff and delta-G per (model, landscape, cycle).
  std::map<ModelLandscapeKey, std::vector<const MetricRow*>> groups;
  for (const auto& r : table.rows) groups[{r.model, r.landscape}].push_back(&r);
  std::ostringstream os;
  os << header << "model,landscape,cycle,mean_payoff,mean_delta_g,n_seeds\n";
  for (const auto& [key, rows] : groups) {
    const std::size_t K = rows.front()->payoff_curve.size();
    for (std::size_t k = 0; k < K; ++k) {
      double pay = 0.0, dg = 0.0;
      for (const auto* r : rows) {
        pay += r->payoff_curve[k];
        dg += k == 0 ? 0.0 : r->delta_g[k - 1];
      }
      const double n = static_cast<double>(rows.size());
      os << csv_field(key.first) << ',' << csv_field(key.second) << ',' << k << ',' << format_number(pay / n) << ','
         << format_number(dg / n) << ',' << rows.size() << '\n';
    }
  }
  return os.str();
}

} // namespace detail

inline int cmd_report(const BenchmarkConfig& config, std::ostream& log = std::cout)
{
  config.validate();
  auto in = load_report_inputs(config);
  const auto table = compute_metric_table(in.records, in.metric_contexts, config.cost, config.percentile);
  if (table.rows.empty()) throw ConfigError("no successful model runs to report");
  const auto dir = std::filesystem::path(config.out) / "report";
  const std::string header = header_comment(config);
  std::size_t problems = 0;

  write_text(dir / "metrics.csv", detail::metric_csv(table, header, config.percentile));
  write_text(dir / "curves.csv", detail::curves_csv(table, header));

  std::vector<std::optional<std::string>> scopes{std::nullopt};
  for (const auto& l : table.landscapes()) scopes.emplace_back(l);
  const std::array<Metric, 3> ranked = {Metric::final_fitness, Metric::delta_g_auc, Metric::cost};
  const std::array<Statistic, 2> stats = {Statistic::mean(), Statistic::cvar_at(config.alpha)};

  for (auto metric : ranked)
    for (const auto& stat : stats) {
      std::ostringstream os;
      os << header << "scope,rank,model,value\n";
      for (const auto& scope : scopes) {
        try {
          const auto r = rank_models(table, metric, stat, scope);
          const std::size_t n = config.top ? std::min(config.top, r.entries.size()) : r.entries.size();
          for (std::size_t i = 0; i < n; ++i)
            os << csv_field(r.scope) << ',' << i + 1 << ',' << csv_field(r.entries[i].model) << ','
               << format_number(r.entries[i].value) << '\n';
        } catch (const CoverageError& e) {
          ++problems;
          log_warning("ranking " + to_string(metric) + " on " + scope.value_or(kAllScope) + ": " + e.what());
        }
      }
      write_text(dir / ("ranking_" + to_string(metric) + "_" + stat.name() + ".csv"), os.str());
    }

  std::map<std::string, double> fitness_agreement;
  for (auto metric : ranked) {
    std::ostringstream os;
    os << header << "scope,tau,p_value\n";
    for (const auto& scope : scopes) {
      const std::string name = scope.value_or(kAllScope);
      try {
        const auto k = rank_agreement(table, metric, config.alpha, scope);
        os << csv_field(name) << ',' << format_number(k.tau) << ',' << format_number(k.p_value) << '\n';
        if (metric == Metric::final_fitness && scope) fitness_agreement[*scope] = k.tau;
      } catch (const Error& e) {
        os << csv_field(name) << ",nan,nan\n";
        log_warning("rank agreement " + to_string(metric) + " on " + name + ": " + e.what());
      }
    }
    write_text(dir / ("agreement_" + to_string(metric) + ".csv"), os.str());
  }

  // Pareto fronts on (mean, CVaR) of final fitness; both higher-better.
  {
    std::ostringstream os;
    os << header << "scope,model,mean_final_fitness,cvar_final_fitness,on_front\n";
    for (const auto& scope : scopes) {
      try {
        const auto m = rank_models(table, Metric::final_fitness, stats[0], scope);
        const auto c = rank_models(table, Metric::final_fitness, stats[1], scope);
        std::map<std::string, double> cv;
        for (const auto& e : c.entries) cv[e.model] = e.value;
        std::vector<ParetoPoint> pts;
        for (const auto& e : m.entries) pts.push_back({e.model, e.value, cv.at(e.model)});
        std::set<std::string> front;
        for (const auto& p : pareto_front(pts)) front.insert(p.id);
        std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        for (const auto& p : pts)
          os << csv_field(scope.value_or(kAllScope)) << ',' << csv_field(p.id) << ',' << format_number(p.performance)
             << ',' << format_number(p.risk) << ',' << (front.count(p.id) ? 1 : 0) << '\n';
      } catch (const CoverageError&) {
        // already reported with the rankings
      }
    }
    write_text(dir / "pareto.csv", os.str());
  }

  // Bootstrap cost savings per landscape.
  {
    nlohmann::json boot = {{"version", kVersion}, {"config", config.digest()}, {"landscapes", nlohmann::json::object()}};
    BootstrapOptions opt;
    opt.n_bootstrap = config.n_bootstrap;
    opt.seed = derive_seed(config.seed, 0xb007);
    opt.alpha = config.alpha;
    opt.jobs = config.jobs;
    for (const auto& l : table.landscapes()) {
      nlohmann::json entry;
      try {
        entry["naive"] = to_json(bootstrap_naive(table, l, opt));
      } catch (const Error& e) {
        entry["naive"] = {{"error", e.what()}};
      }
      try {
        const auto oob = bootstrap_oob(table, l, config.oob_rank_fraction, config.oob_cap, opt);
        entry["out_of_bag"] = {{"average", to_json(oob.average)},
                               {"worst_case", to_json(oob.worst)},
                               {"n_partitions", oob.n_partitions},
                               {"enumerated", oob.enumerated}};
      } catch (const Error& e) {
        entry["out_of_bag"] = {{"error", e.what()}};
      }
      boot["landscapes"][l] = std::move(entry);
    }
    write_text(dir / "bootstrap.json", boot.dump(2) + "\n");
  }

  // Property correlations need at least three landscapes.
  if (table.landscapes().size() >= 3) {
    std::vector<LandscapeProfile> profiles;
    for (const auto& c : in.contexts) profiles.push_back(profile(c->landscape));
    BootstrapOptions opt;
    opt.n_bootstrap = config.n_bootstrap;
    opt.seed = derive_seed(config.seed, 0xc0e);
    opt.alpha = config.alpha;
    opt.jobs = config.jobs;
    std::ostringstream os;
    os << header << "metric,stat,property,tau,p_value,ci_lower,ci_upper,significant\n";
    for (const auto& c : property_correlations(profiles, table, opt))
      os << to_string(c.metric) << ',' << c.stat << ',' << c.property << ',' << format_number(c.tau) << ','
         << format_number(c.p_value) << ',' << format_number(c.lower) << ',' << format_number(c.upper) << ','
         << (c.significant() ? 1 : 0) << '\n';
    write_text(dir / "property_correlations.csv", os.str());

    if (fitness_agreement.size() >= 3) {
      std::ostringstream as;
      as << header << "property,tau,p_value\n";
      for (const auto& pa : agreement_property_correlation(fitness_agreement, profiles))
        as << pa.property << ',' << format_number(pa.result.tau) << ',' << format_number(pa.result.p_value) << '\n';
      write_text(dir / "agreement_property_correlation.csv", as.str());
    }
  }

  log << "report: " << table.rows.size() << " runs, " << table.models().size() << " models, "
      << table.landscapes().size() << " landscapes";
  if (table.excluded_failed) log << ", " << table.excluded_failed << " failed runs excluded";
  log << " -> " << dir.string() << '\n';
  return problems ? kExitPartial : kExitOk;
}

} // namespace riskbo
