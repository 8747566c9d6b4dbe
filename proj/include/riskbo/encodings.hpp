#pragma once

#include "riskbo/landscape.hpp"

#include <Eigen/Dense>

namespace riskbo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class EncodingKind
{
  one_hot,
  embedding_file
};

struct EncodingMatrix
{
  EncodingKind kind = EncodingKind::one_hot;
  std::string label = "onehot"; // model-identity tag, e.g. "onehot", "esm2"
  Matrix vectors;               // N x D, row i <-> landscape index i

  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(vectors.rows()); }
};

// Row i is the flattened L x |A| indicator of sequence i, letters in the
// landscape's alphabet order (canonical ACDEFGHIKLMNPQRSTVWY for loaded data).
inline EncodingMatrix encode_one_hot(const Landscape& landscape)
{
  const auto& alphabet = landscape.alphabet();
  const std::size_t A = alphabet.size(), L = landscape.length();
  std::array<int, 256> letter{};
  letter.fill(-1);
  for (std::size_t a = 0; a < A; ++a) letter[static_cast<unsigned char>(alphabet[a])] = static_cast<int>(a);

  EncodingMatrix enc;
  enc.kind = EncodingKind::one_hot;
  enc.label = "onehot";
  enc.vectors = Matrix::Zero(static_cast<Eigen::Index>(landscape.size()), static_cast<Eigen::Index>(L * A));
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    const auto& s = landscape.sequences()[i];
    for (std::size_t p = 0; p < L; ++p) {
      const int a = letter[static_cast<unsigned char>(s[p])];
      if (a < 0)
        throw EncodingError(std::string("unknown character '") + s[p] + "' at position " +
                            std::to_string(p) + " of '" + s + "'");
      enc.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p * A + static_cast<std::size_t>(a))) = 1.0;
    }
  }
  return enc;
}

// CSV `sequence,e0,...,e{D-1}`. D comes from the first record; rows may be in
// any order and extra sequences not in the landscape are ignored.
inline EncodingMatrix load_embeddings(const Landscape& landscape,
                                      const std::string& path,
                                      std::string label = "embedding")
{
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  Eigen::Index dim = -1;
  Matrix out;
  std::vector<char> filled(landscape.size(), 0);
  std::size_t extra = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    auto fields = detail::split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.empty() || detail::trim(fields[0]) != "sequence")
        throw ParseError("embedding header must start with 'sequence'", lineno);
      continue;
    }
    const auto d = static_cast<Eigen::Index>(fields.size()) - 1;
    if (dim < 0) {
      if (d < 1) throw SchemaError("embedding rows need at least one value");
      dim = d;
      out = Matrix::Zero(static_cast<Eigen::Index>(landscape.size()), dim);
    } else if (d != dim) {
      throw SchemaError("line " + std::to_string(lineno) + ": embedding has " + std::to_string(d) +
                        " values, expected " + std::to_string(dim));
    }
    auto idx = landscape.find(detail::trim(fields[0]));
    if (!idx) {
      ++extra;
      continue;
    }
    for (Eigen::Index j = 0; j < dim; ++j) {
      auto v = detail::parse_double(fields[static_cast<std::size_t>(j) + 1]);
      if (!v || !std::isfinite(*v)) throw ParseError("bad embedding value", lineno);
      out(static_cast<Eigen::Index>(*idx), j) = *v;
    }
    filled[*idx] = 1;
  }
  if (dim < 0) throw SchemaError("embedding file '" + path + "' has no records");

  std::vector<std::string> missing;
  std::size_t n_missing = 0;
  for (std::size_t i = 0; i < filled.size(); ++i)
    if (!filled[i]) {
      if (missing.size() < 10) missing.push_back(landscape.sequences()[i]);
      ++n_missing;
    }
  if (n_missing > 0) {
    std::string msg = "embedding file '" + path + "' is missing " + std::to_string(n_missing) + " sequences:";
    for (auto& m : missing) msg += " " + m;
    throw CoverageError(msg);
  }
  if (extra > 0) log_warning(path + ": ignored " + std::to_string(extra) + " sequences not in landscape");

  EncodingMatrix enc;
  enc.kind = EncodingKind::embedding_file;
  enc.label = std::move(label);
  enc.vectors = std::move(out);
  return enc;
}

// Per-column z-scoring with statistics from a row subset. Columns with zero
// variance on that subset pass through untouched.
struct Standardizer
{
  Vector mean;
  Vector scale;
  std::vector<char> active;

  static Standardizer fit(const Matrix& X, std::span<const std::size_t> rows)
  {
    if (rows.empty()) throw SizeError("standardize needs a nonempty index set");
    Standardizer s;
    const auto D = X.cols();
    s.mean = Vector::Zero(D);
    s.scale = Vector::Ones(D);
    s.active.assign(static_cast<std::size_t>(D), 0);
    const double n = static_cast<double>(rows.size());
    for (auto r : rows) s.mean += X.row(static_cast<Eigen::Index>(r)).transpose();
    s.mean /= n;
    Vector var = Vector::Zero(D);
    for (auto r : rows) var += (X.row(static_cast<Eigen::Index>(r)).transpose() - s.mean).array().square().matrix();
    var /= n;
    for (Eigen::Index j = 0; j < D; ++j) {
      const double sd = std::sqrt(var(j));
      if (sd > 1e-12 * std::max(1.0, std::abs(s.mean(j)))) {
        s.scale(j) = sd;
        s.active[static_cast<std::size_t>(j)] = 1;
      } else {
        s.mean(j) = 0.0;
      }
    }
    return s;
  }

  Matrix apply(const Matrix& X) const
  {
    Matrix out = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (active[static_cast<std::size_t>(j)])
        out.col(j) = (X.col(j).array() - mean(j)) / scale(j);
    return out;
  }

  Matrix apply_rows(const Matrix& X, std::span<const std::size_t> rows) const
  {
    Matrix sub(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return apply(sub);
  }
};

inline EncodingMatrix standardize(const EncodingMatrix& m, std::span<const std::size_t> stats_from)
{
  EncodingMatrix out = m;
  out.vectors = Standardizer::fit(m.vectors, stats_from).apply(m.vectors);
  return out;
}

inline Matrix gather_rows(const Matrix& X, std::span<const std::size_t> rows)
{
  Matrix sub(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return sub;
}

} // namespace riskbo
