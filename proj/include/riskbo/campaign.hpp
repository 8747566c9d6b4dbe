#pragma once

// Pool-based campaign simulation: seeded BO runs, paired random baselines,
// a resumable JSON-lines run store, and the parallel grid runner.

#include "riskbo/acquisition.hpp"
#include "riskbo/surrogates.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

namespace riskbo {

struct ModelSpec
{
  SurrogateSpec surrogate;
  AcquisitionSpec acquisition;
  std::string encoding = "onehot";

  // "surrogate/acquisition/encoding", the identity used in every table.
  std::string id() const { return to_string(surrogate.kind) + "/" + to_string(acquisition.kind) + "/" + encoding; }
};

// Cartesian product in surrogate-major order.
inline std::vector<ModelSpec> model_grid(std::span<const SurrogateKind> surrogates,
                                         std::span<const AcquisitionKind> acquisitions,
                                         std::span<const std::string> encodings)
{
  std::vector<ModelSpec> out;
  for (auto s : surrogates)
    for (auto a : acquisitions)
      for (const auto& e : encodings) {
        ModelSpec m;
        m.surrogate = SurrogateSpec::defaults(s);
        m.acquisition.kind = a;
        m.encoding = e;
        out.push_back(m);
      }
  return out;
}

struct CampaignConfig
{
  std::size_t n_init = 96;
  std::size_t batch_size = 96;
  std::size_t n_cycles = 4;
  std::vector<std::uint64_t> seeds = default_seeds(20);
  double observation_noise = 0.0; // std of additive Gaussian label noise, off by default

  static std::vector<std::uint64_t> default_seeds(std::size_t n)
  {
    std::vector<std::uint64_t> s(n);
    std::iota(s.begin(), s.end(), 0);
    return s;
  }

  std::size_t budget() const noexcept { return n_init + batch_size * n_cycles; }

  void validate(std::size_t pool_size) const
  {
    if (n_init < 1) throw ConfigError("n_init must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (budget() > pool_size)
      throw SizeError("budget n_init + b*K = " + std::to_string(budget()) + " exceeds campaign pool of " +
                      std::to_string(pool_size));
    if (!(observation_noise >= 0.0)) throw ConfigError("observation noise must be >= 0");
  }

  std::string digest() const
  {
    Digest d;
    d.update(std::uint64_t{n_init}).update(std::uint64_t{batch_size}).update(std::uint64_t{n_cycles});
    d.update(observation_noise);
    return d.hex();
  }
};

struct RunRecord
{
  std::string model;     // ModelSpec::id(), or "random" for baselines
  std::string hyperparams;
  std::string landscape;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> acquired; // k = 0 is the seed pool
  std::vector<double> payoff_curve;               // running max of normalized fitness
  bool is_baseline = false;
  bool failed = false;
  std::string diagnostic;
  std::string config_digest;

  std::size_t n_cycles() const noexcept { return payoff_curve.empty() ? 0 : payoff_curve.size() - 1; }

  std::size_t total_acquired() const
  {
    std::size_t n = 0;
    for (const auto& a : acquired) n += a.size();
    return n;
  }

  double final_fitness() const { return payoff_curve.empty() ? 0.0 : payoff_curve.back(); }
};

inline constexpr const char* kBaselineModel = "random";

inline nlohmann::json to_json(const RunRecord& r)
{
  nlohmann::json j;
  j["model"] = r.model;
  j["hyperparams"] = r.hyperparams;
  j["landscape"] = r.landscape;
  j["seed"] = r.seed;
  j["is_baseline"] = r.is_baseline;
  j["failed"] = r.failed;
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  j["config_digest"] = r.config_digest;
  j["acquired"] = r.acquired;
  j["payoff_curve"] = r.payoff_curve;
  return j;
}

inline RunRecord run_record_from_json(const nlohmann::json& j)
{
  RunRecord r;
  r.model = j.at("model").get<std::string>();
  r.hyperparams = j.value("hyperparams", std::string{});
  r.landscape = j.at("landscape").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.is_baseline = j.at("is_baseline").get<bool>();
  r.failed = j.value("failed", false);
  r.diagnostic = j.value("diagnostic", std::string{});
  r.config_digest = j.at("config_digest").get<std::string>();
  r.acquired = j.at("acquired").get<std::vector<std::vector<std::size_t>>>();
  r.payoff_curve = j.at("payoff_curve").get<std::vector<double>>();
  return r;
}

// n_init distinct campaign-pool indices drawn uniformly under `seed`. Model
// runs and baselines share this draw, which is what pairs them.
inline std::vector<std::size_t> seed_pool(const CampaignConfig& config, const SplitPlan& split, std::uint64_t seed)
{
  std::vector<std::size_t> pool = split.campaign_pool;
  std::mt19937_64 rng(derive_seed(seed, 0x1417));
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(config.n_init);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace detail {

inline double running_max(const Landscape& landscape, const std::vector<std::size_t>& idx, double current)
{
  for (auto i : idx) current = std::max(current, landscape.norm_fitness()[i]);
  return current;
}

} // namespace detail

inline std::string run_digest(const CampaignConfig& config, const Landscape& landscape, const SplitPlan& split,
                              const std::string& model, const std::string& hyperparams)
{
  Digest d;
  d.update(config.digest()).update(landscape.digest()).update(std::uint64_t{split.split_seed});
  d.update(std::uint64_t{split.campaign_pool.size()});
  d.update(model).update(hyperparams);
  return d.hex();
}

// One seeded campaign. Training failures mark the record as failed instead
// of throwing.
inline RunRecord run_campaign(const CampaignConfig& config, const ModelSpec& model, std::uint64_t seed,
                              const Landscape& landscape, const SplitPlan& split, const EncodingMatrix& encoding)
{
  config.validate(split.campaign_pool.size());
  model.acquisition.validate();
  if (encoding.rows() != landscape.size()) throw ShapeError("encoding rows do not match landscape size");

  RunRecord rec;
  rec.model = model.id();
  rec.hyperparams = model.surrogate.tag();
  rec.landscape = landscape.name();
  rec.seed = seed;
  rec.config_digest = run_digest(config, landscape, split, rec.model, rec.hyperparams);

  std::vector<char> acquired_mask(landscape.size(), 0);
  std::vector<std::size_t> acquired;
  std::vector<double> observed;
  std::mt19937_64 noise_rng(derive_seed(seed, 0x401));
  std::normal_distribution<double> noise(0.0, 1.0);
  auto acquire = [&](const std::vector<std::size_t>& batch) {
    for (auto i : batch) {
      acquired_mask[i] = 1;
      acquired.push_back(i);
      double y = landscape.norm_fitness()[i];
      if (config.observation_noise > 0.0) y += config.observation_noise * noise(noise_rng);
      observed.push_back(y);
    }
    rec.acquired.push_back(batch);
    const double prev = rec.payoff_curve.empty() ? -std::numeric_limits<double>::infinity() : rec.payoff_curve.back();
    rec.payoff_curve.push_back(detail::running_max(landscape, batch, prev));
  };
  acquire(seed_pool(config, split, seed));

  for (std::size_t k = 1; k <= config.n_cycles; ++k) {
    std::vector<std::size_t> candidates;
    candidates.reserve(split.campaign_pool.size() - acquired.size());
    for (auto i : split.campaign_pool)
      if (!acquired_mask[i]) candidates.push_back(i);
    try {
      const Matrix X = gather_rows(encoding.vectors, acquired);
      const Vector y = Eigen::Map<const Vector>(observed.data(), static_cast<Eigen::Index>(observed.size()));
      const auto surrogate = train(model.surrogate, X, y, derive_seed(seed, k, 0x7a));
      const auto pred = surrogate.predict(gather_rows(encoding.vectors, candidates));
      const double f_star = y.maxCoeff();
      const Vector s = score(model.acquisition, pred, f_star, derive_seed(seed, k, 0x75));
      if (!s.allFinite()) throw TrainingError("non-finite acquisition scores");
      const auto picks = select_batch(s, config.batch_size, derive_seed(seed, k, 0x7e));
      std::vector<std::size_t> batch;
      batch.reserve(picks.size());
      for (auto p : picks) batch.push_back(candidates[p]);
      std::sort(batch.begin(), batch.end());
      acquire(batch);
    } catch (const Error& e) {
      rec.failed = true;
      rec.diagnostic = "cycle " + std::to_string(k) + ": " + e.what();
      return rec;
    }
  }
  return rec;
}

inline RunRecord run_random_baseline(const CampaignConfig& config, std::uint64_t seed, const Landscape& landscape,
                                     const SplitPlan& split)
{
  config.validate(split.campaign_pool.size());
  RunRecord rec;
  rec.model = kBaselineModel;
  rec.landscape = landscape.name();
  rec.seed = seed;
  rec.is_baseline = true;
  rec.config_digest = run_digest(config, landscape, split, rec.model, "");

  auto init = seed_pool(config, split, seed);
  std::vector<char> taken(landscape.size(), 0);
  for (auto i : init) taken[i] = 1;
  rec.payoff_curve.push_back(detail::running_max(landscape, init, -std::numeric_limits<double>::infinity()));
  rec.acquired.push_back(std::move(init));

  std::vector<std::size_t> remaining;
  for (auto i : split.campaign_pool)
    if (!taken[i]) remaining.push_back(i);
  std::mt19937_64 rng(derive_seed(seed, 0xba5e));
  std::shuffle(remaining.begin(), remaining.end(), rng);
  for (std::size_t k = 1; k <= config.n_cycles; ++k) {
    const auto first = remaining.begin() + static_cast<std::ptrdiff_t>((k - 1) * config.batch_size);
    std::vector<std::size_t> batch(first, first + static_cast<std::ptrdiff_t>(config.batch_size));
    std::sort(batch.begin(), batch.end());
    rec.payoff_curve.push_back(detail::running_max(landscape, batch, rec.payoff_curve.back()));
    rec.acquired.push_back(std::move(batch));
  }
  return rec;
}

// Append-only JSON-lines store, one file per landscape under a directory.
class RunStore
{
public:
  explicit RunStore(std::filesystem::path dir) : dir_(std::move(dir))
  {
    std::filesystem::create_directories(dir_);
    for (const auto& entry : std::filesystem::directory_iterator(dir_))
      if (entry.path().extension() == ".jsonl") load_file(entry.path());
  }

  static std::string key(const std::string& model, const std::string& landscape, std::uint64_t seed,
                         const std::string& digest)
  {
    return model + "\x1f" + landscape + "\x1f" + std::to_string(seed) + "\x1f" + digest;
  }

  bool contains(const std::string& k) const
  {
    std::lock_guard lock(mutex_);
    return index_.count(k) > 0;
  }

  void append(const RunRecord& r)
  {
    const std::string line = to_json(r).dump() + "\n";
    std::lock_guard lock(mutex_);
    const auto path = dir_ / (sanitize(r.landscape) + ".jsonl");
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot write run store '" + path.string() + "'");
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    index_.insert(key(r.model, r.landscape, r.seed, r.config_digest));
    records_.push_back(r);
  }

  const std::vector<RunRecord>& records() const noexcept { return records_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  static std::string sanitize(std::string s)
  {
    for (auto& c : s)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return s;
  }

private:
  void load_file(const std::filesystem::path& path)
  {
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
      if (!detail::trim(line).empty()) lines.push_back(line);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      try {
        auto r = run_record_from_json(nlohmann::json::parse(lines[i]));
        index_.insert(key(r.model, r.landscape, r.seed, r.config_digest));
        records_.push_back(std::move(r));
      } catch (const std::exception& e) {
        if (i + 1 == lines.size()) {
          log_warning(path.string() + ": dropping truncated final record");
          continue;
        }
        throw Error("run store '" + path.string() + "' is corrupt at record " + std::to_string(i + 1) + " (" +
                    e.what() + "); delete the file to start this landscape over");
      }
    }
  }

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::set<std::string> index_;
  std::vector<RunRecord> records_;
};

// Everything a worker needs for one landscape. Shared read-only.
struct LandscapeContext
{
  Landscape landscape;
  SplitPlan split;
  std::map<std::string, EncodingMatrix> encodings;
};

struct GridSummary
{
  std::size_t completed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  std::vector<RunRecord> records; // every record in scope, new or resumed
};

// Optional hook mapping (model, landscape) to tuned hyperparameters.
using SpecResolver = std::function<SurrogateSpec(const ModelSpec&, const LandscapeContext&)>;

// One record per (model, landscape, seed) plus one baseline per
// (landscape, seed). Completed records already in the store are reused.
inline GridSummary run_grid(const std::vector<ModelSpec>& models, const std::vector<const LandscapeContext*>& landscapes,
                            const CampaignConfig& config, RunStore* store = nullptr, std::size_t jobs = 1,
                            const SpecResolver& resolve = {}, bool progress = false)
{
  struct Job
  {
    std::optional<ModelSpec> model; // empty for the baseline
    const LandscapeContext* ctx;
    std::uint64_t seed;
    std::string key;
  };
  std::vector<Job> todo;
  GridSummary summary;
  std::map<std::string, RunRecord> existing;
  if (store)
    for (const auto& r : store->records())
      existing.emplace(RunStore::key(r.model, r.landscape, r.seed, r.config_digest), r);

  for (const auto* ctx : landscapes) {
    config.validate(ctx->split.campaign_pool.size());
    for (auto seed : config.seeds) {
      Job base{std::nullopt, ctx, seed, {}};
      base.key = RunStore::key(kBaselineModel, ctx->landscape.name(), seed,
                               run_digest(config, ctx->landscape, ctx->split, kBaselineModel, ""));
      todo.push_back(base);
      for (const auto& m : models) {
        if (!ctx->encodings.count(m.encoding))
          throw ConfigError("landscape '" + ctx->landscape.name() + "' has no encoding '" + m.encoding + "'");
        ModelSpec resolved = m;
        if (resolve) resolved.surrogate = resolve(m, *ctx);
        Job j{resolved, ctx, seed, {}};
        j.key = RunStore::key(resolved.id(), ctx->landscape.name(), seed,
                              run_digest(config, ctx->landscape, ctx->split, resolved.id(), resolved.surrogate.tag()));
        todo.push_back(std::move(j));
      }
    }
  }

  std::vector<std::optional<RunRecord>> results(todo.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (auto it = existing.find(todo[i].key); it != existing.end()) {
      results[i] = it->second;
      ++summary.skipped;
    } else {
      pending.push_back(i);
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex io;
  auto worker = [&] {
    for (;;) {
      const std::size_t p = next.fetch_add(1);
      if (p >= pending.size()) return;
      const auto& job = todo[pending[p]];
      RunRecord rec = job.model
        ? run_campaign(config, *job.model, job.seed, job.ctx->landscape, job.ctx->split,
                       job.ctx->encodings.at(job.model->encoding))
        : run_random_baseline(config, job.seed, job.ctx->landscape, job.ctx->split);
      if (store) store->append(rec);
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(io);
        std::cerr << "[" << d << "/" << pending.size() << "] " << rec.landscape << " " << rec.model << " seed "
                  << rec.seed << (rec.failed ? " FAILED: " + rec.diagnostic : "") << '\n';
      }
      results[pending[p]] = std::move(rec);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, pending.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  for (auto& r : results) {
    if (r->failed) ++summary.failed;
    summary.records.push_back(std::move(*r));
  }
  summary.completed = pending.size();
  return summary;
}

} // namespace riskbo
