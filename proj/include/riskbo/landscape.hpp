#pragma once

// Finite fitness landscapes: CSV ingestion, normalization, the
// hyperparameter/campaign split, Hamming-1 neighbors and synthetic generators.

#include "riskbo/core.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <unordered_map>

namespace riskbo {

// Canonical amino-acid ordering used for one-hot columns.
inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";

class Landscape
{
public:
  // Validates and canonicalizes: sequences are sorted lexicographically so
  // every derived quantity is independent of input row order.
  Landscape(std::string name,
            std::vector<std::string> sequences,
            std::vector<double> raw_fitness,
            std::string alphabet = std::string(kAminoAcids),
            std::optional<std::string> wild_type = std::nullopt)
    : name_(std::move(name)), alphabet_(std::move(alphabet)), wild_type_(std::move(wild_type))
  {
    if (sequences.size() != raw_fitness.size())
      throw SchemaError("sequence and fitness counts differ");
    if (sequences.size() < 2)
      throw SizeError("landscape needs at least 2 sequences");
    if (alphabet_.empty())
      throw SchemaError("empty alphabet");

    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sequences[a] < sequences[b];
    });
    sequences_.reserve(order.size());
    raw_.reserve(order.size());
    for (auto i : order) {
      sequences_.push_back(std::move(sequences[i]));
      raw_.push_back(raw_fitness[i]);
    }

    length_ = sequences_.front().size();
    if (length_ == 0) throw SchemaError("empty sequence");
    std::array<int, 256> letter{};
    letter.fill(-1);
    for (std::size_t a = 0; a < alphabet_.size(); ++a)
      letter[static_cast<unsigned char>(alphabet_[a])] = static_cast<int>(a);
    for (std::size_t i = 0; i < sequences_.size(); ++i) {
      const auto& s = sequences_[i];
      if (s.size() != length_)
        throw SchemaError("sequence '" + s + "' has length " + std::to_string(s.size()) +
                          ", expected " + std::to_string(length_));
      for (char c : s)
        if (letter[static_cast<unsigned char>(c)] < 0)
          throw SchemaError(std::string("character '") + c + "' not in alphabet");
      if (i > 0 && sequences_[i - 1] == s) throw SchemaError("duplicate sequence '" + s + "'");
      if (!std::isfinite(raw_[i])) throw SchemaError("non-finite fitness for '" + s + "'");
    }
    if (wild_type_ && wild_type_->size() != length_)
      throw SchemaError("wild type length differs from landscape length");

    const auto [lo, hi] = std::minmax_element(raw_.begin(), raw_.end());
    if (!(*hi > *lo)) throw DegenerateError("landscape '" + name_ + "' has constant fitness");
    norm_.resize(raw_.size());
    const double span = *hi - *lo;
    for (std::size_t i = 0; i < raw_.size(); ++i) norm_[i] = (raw_[i] - *lo) / span;
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return sequences_.size(); }
  std::size_t length() const noexcept { return length_; }
  const std::string& alphabet() const noexcept { return alphabet_; }
  std::size_t alphabet_size() const noexcept { return alphabet_.size(); }
  const std::vector<std::string>& sequences() const noexcept { return sequences_; }
  const std::vector<double>& raw_fitness() const noexcept { return raw_; }
  const std::vector<double>& norm_fitness() const noexcept { return norm_; }
  const std::optional<std::string>& wild_type() const noexcept { return wild_type_; }

  std::optional<std::size_t> find(std::string_view seq) const
  {
    auto it = std::lower_bound(sequences_.begin(), sequences_.end(), seq,
                               [](const std::string& a, std::string_view b) { return a < b; });
    if (it == sequences_.end() || *it != seq) return std::nullopt;
    return static_cast<std::size_t>(it - sequences_.begin());
  }

  std::string digest() const
  {
    Digest d;
    d.update(alphabet_);
    for (std::size_t i = 0; i < size(); ++i) d.update(sequences_[i]).update(raw_[i]);
    return d.hex();
  }

private:
  std::string name_;
  std::vector<std::string> sequences_;
  std::vector<double> raw_;
  std::vector<double> norm_;
  std::string alphabet_;
  std::optional<std::string> wild_type_;
  std::size_t length_ = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line)
{
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_double(std::string_view s)
{
  std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

inline bool truthy(std::string_view s)
{
  auto t = trim(s);
  return t == "1" || t == "true" || t == "True" || t == "TRUE" || t == "yes";
}

} // namespace detail

// Reads `sequence,fitness[,...]` (ProteinGym's `mutated_sequence,DMS_score`
// are accepted as aliases). An optional boolean `wild_type` column marks the
// reference sequence. Duplicate sequences are averaged.
inline Landscape load_landscape(const std::string& path,
                                std::string name = {},
                                std::string alphabet = std::string(kAminoAcids))
{
  std::ifstream in(path);
  if (!in) throw Error("cannot open landscape file '" + path + "'");
  if (name.empty()) {
    auto slash = path.find_last_of('/');
    name = path.substr(slash == std::string::npos ? 0 : slash + 1);
    if (auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) name.resize(dot);
  }

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw ParseError("missing header", lineno);
  if (!header.empty() && header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    header[0].erase(0, 3);

  int seq_col = -1, fit_col = -1, wt_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto h = detail::trim(header[c]);
    if (seq_col < 0 && (h == "sequence" || h == "mutated_sequence")) seq_col = static_cast<int>(c);
    else if (fit_col < 0 && (h == "fitness" || h == "DMS_score")) fit_col = static_cast<int>(c);
    else if (h == "wild_type") wt_col = static_cast<int>(c);
  }
  if (seq_col < 0 || fit_col < 0)
    throw ParseError("header must contain 'sequence' and 'fitness' columns", lineno);

  std::map<std::string, std::pair<double, int>> acc;
  std::optional<std::string> wild_type;
  std::size_t rows = 0;
  const auto need = static_cast<std::size_t>(std::max({seq_col, fit_col, wt_col})) + 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() < need) throw ParseError("expected at least " + std::to_string(need) + " fields", lineno);
    auto seq = detail::trim(fields[static_cast<std::size_t>(seq_col)]);
    if (seq.empty()) throw ParseError("empty sequence", lineno);
    auto fit = detail::parse_double(fields[static_cast<std::size_t>(fit_col)]);
    if (!fit || !std::isfinite(*fit))
      throw ParseError("bad fitness value '" + fields[static_cast<std::size_t>(fit_col)] + "'", lineno);
    for (char c : seq)
      if (alphabet.find(c) == std::string::npos)
        throw ParseError(std::string("character '") + c + "' not in alphabet", lineno);
    if (wt_col >= 0 && detail::truthy(fields[static_cast<std::size_t>(wt_col)])) wild_type = seq;
    auto& slot = acc[seq];
    slot.first += *fit;
    slot.second += 1;
    ++rows;
  }
  if (rows < 2) throw SizeError("landscape file '" + path + "' has fewer than 2 rows");

  std::vector<std::string> seqs;
  std::vector<double> fitness;
  std::size_t duplicates = 0;
  for (auto& [s, v] : acc) {
    if (v.second > 1) duplicates += static_cast<std::size_t>(v.second - 1);
    seqs.push_back(s);
    fitness.push_back(v.first / v.second);
  }
  if (duplicates > 0)
    log_warning(path + ": collapsed " + std::to_string(duplicates) +
                " duplicate rows by mean fitness");
  return Landscape(std::move(name), std::move(seqs), std::move(fitness), std::move(alphabet),
                   std::move(wild_type));
}

struct SplitPlan
{
  std::vector<std::size_t> hyperparam_train;
  std::vector<std::size_t> hyperparam_test;
  std::vector<std::size_t> campaign_pool;
  std::uint64_t split_seed = 0;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

// 15% / 5% / 80% uniform random partition; remainder goes to the campaign pool.
inline SplitPlan make_split(const Landscape& landscape, std::uint64_t split_seed)
{
  const std::size_t n = landscape.size();
  if (n < 20) throw SizeError("split needs at least 20 sequences, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(split_seed, 0x5311));
  std::shuffle(idx.begin(), idx.end(), rng);

  const std::size_t n_train = n * 15 / 100;
  const std::size_t n_test = n * 5 / 100;
  SplitPlan plan;
  plan.split_seed = split_seed;
  plan.hyperparam_train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.hyperparam_test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                              idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  plan.campaign_pool.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_test), idx.end());
  std::sort(plan.hyperparam_train.begin(), plan.hyperparam_train.end());
  std::sort(plan.hyperparam_test.begin(), plan.hyperparam_test.end());
  std::sort(plan.campaign_pool.begin(), plan.campaign_pool.end());
  return plan;
}

// Split that puts the whole landscape in the campaign pool. Used for
// synthetic studies where no tuning data is held out.
inline SplitPlan full_pool_split(const Landscape& landscape)
{
  SplitPlan plan;
  plan.campaign_pool.resize(landscape.size());
  std::iota(plan.campaign_pool.begin(), plan.campaign_pool.end(), 0);
  return plan;
}

struct NeighborIndex
{
  std::vector<std::vector<std::size_t>> adjacency;

  const std::vector<std::size_t>& operator[](std::size_t i) const { return adjacency[i]; }
  std::size_t size() const noexcept { return adjacency.size(); }
};

inline std::size_t hamming(std::string_view a, std::string_view b)
{
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

// Positional bucketing: for every position p, sequences that agree everywhere
// except p share a masked key. Keys are polynomial hashes assembled from
// prefix/suffix tables so each (sequence, position) costs O(1).
inline NeighborIndex build_neighbor_index(const Landscape& landscape)
{
  const auto& seqs = landscape.sequences();
  const std::size_t n = seqs.size();
  const std::size_t L = landscape.length();
  constexpr std::uint64_t base = 1099511628211ULL;

  std::vector<std::uint64_t> pow(L + 1, 1);
  for (std::size_t i = 1; i <= L; ++i) pow[i] = pow[i - 1] * base;

  std::vector<std::uint64_t> prefix(n * (L + 1)), suffix(n * (L + 1));
  for (std::size_t s = 0; s < n; ++s) {
    auto* pre = &prefix[s * (L + 1)];
    auto* suf = &suffix[s * (L + 1)];
    pre[0] = 0;
    for (std::size_t i = 0; i < L; ++i)
      pre[i + 1] = pre[i] * base + static_cast<unsigned char>(seqs[s][i]) + 1;
    suf[L] = 0;
    for (std::size_t i = L; i-- > 0;)
      suf[i] = suf[i + 1] + (static_cast<unsigned char>(seqs[s][i]) + 1) * pow[L - 1 - i];
  }

  NeighborIndex index;
  index.adjacency.resize(n);
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(n);
  for (std::size_t p = 0; p < L; ++p) {
    for (std::size_t s = 0; s < n; ++s) {
      const auto pre = prefix[s * (L + 1) + p];
      const auto suf = suffix[s * (L + 1) + p + 1];
      keys[s] = {mix64(pre * pow[L - p] + suf + p), s};
    }
    std::sort(keys.begin(), keys.end());
    for (std::size_t a = 0; a < n;) {
      std::size_t b = a + 1;
      while (b < n && keys[b].first == keys[a].first) ++b;
      for (std::size_t i = a; i < b; ++i)
        for (std::size_t j = i + 1; j < b; ++j) {
          auto u = keys[i].second, v = keys[j].second;
          if (hamming(seqs[u], seqs[v]) == 1 && seqs[u][p] != seqs[v][p]) {
            index.adjacency[u].push_back(v);
            index.adjacency[v].push_back(u);
          }
        }
      a = b;
    }
  }
  for (auto& adj : index.adjacency) std::sort(adj.begin(), adj.end());
  return index;
}

enum class SyntheticModel
{
  additive,
  nk,
  random
};

struct SyntheticSpec
{
  SyntheticModel model = SyntheticModel::additive;
  std::size_t length = 3;
  std::size_t alphabet = 4;
  std::size_t k = 0; // NK epistatic neighbors
  std::uint64_t seed = 0;
  std::string name;
};

inline constexpr std::size_t kMaxSyntheticSize = 200000;

inline std::string to_string(SyntheticModel m)
{
  switch (m) {
    case SyntheticModel::additive: return "additive";
    case SyntheticModel::nk: return "nk";
    case SyntheticModel::random: return "random";
  }
  return "?";
}

inline SyntheticModel parse_synthetic_model(std::string_view s)
{
  if (s == "additive") return SyntheticModel::additive;
  if (s == "nk" || s == "NK") return SyntheticModel::nk;
  if (s == "random") return SyntheticModel::random;
  throw ConfigError("unknown synthetic model '" + std::string(s) + "'");
}

// Enumerates all |A|^L sequences. Additive is NK with k = 0: per-position
// contribution tables are drawn in the same order, so the two coincide.
inline Landscape generate_synthetic(const SyntheticSpec& spec)
{
  if (spec.length == 0 || spec.alphabet < 2 || spec.alphabet > kAminoAcids.size())
    throw ConfigError("synthetic spec needs L >= 1 and 2 <= |A| <= 20");
  std::size_t total = 1;
  for (std::size_t i = 0; i < spec.length; ++i) {
    total *= spec.alphabet;
    if (total > kMaxSyntheticSize)
      throw SizeError("synthetic landscape exceeds " + std::to_string(kMaxSyntheticSize) + " sequences");
  }
  const std::size_t L = spec.length, A = spec.alphabet;
  const std::size_t k = spec.model == SyntheticModel::additive ? 0 : std::min(spec.k, L - 1);
  const std::string alphabet(kAminoAcids.substr(0, A));

  std::mt19937_64 rng(derive_seed(spec.seed, 0x5e));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::size_t table_size = 1;
  for (std::size_t i = 0; i <= k; ++i) table_size *= A;
  std::vector<std::vector<double>> tables;
  if (spec.model != SyntheticModel::random) {
    tables.resize(L);
    for (auto& t : tables) {
      t.resize(table_size);
      for (auto& v : t) v = normal(rng);
    }
  }

  std::vector<std::string> seqs(total, std::string(L, alphabet[0]));
  std::vector<double> fitness(total, 0.0);
  std::vector<std::size_t> digits(L, 0);
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rem = s;
    for (std::size_t p = L; p-- > 0;) {
      digits[p] = rem % A;
      rem /= A;
      seqs[s][p] = alphabet[digits[p]];
    }
    if (spec.model == SyntheticModel::random) {
      fitness[s] = uniform(rng);
      continue;
    }
    double f = 0.0;
    for (std::size_t p = 0; p < L; ++p) {
      std::size_t key = 0;
      for (std::size_t j = 0; j <= k; ++j) key = key * A + digits[(p + j) % L];
      f += tables[p][key];
    }
    fitness[s] = f;
  }
  std::string name = spec.name;
  if (name.empty())
    name = "synthetic_" + to_string(spec.model) + "_L" + std::to_string(L) + "_A" +
           std::to_string(A) + "_s" + std::to_string(spec.seed);
  return Landscape(std::move(name), std::move(seqs), std::move(fitness), alphabet,
                   std::string(L, alphabet[0]));
}

} // namespace riskbo
