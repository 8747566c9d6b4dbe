#pragma once

#include "riskbo/posterior.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

namespace riskbo {

enum class AcquisitionKind
{
  ei,
  ucb,
  thompson,
  greedy
};

inline constexpr std::array<AcquisitionKind, 4> kAllAcquisitions = {AcquisitionKind::ei, AcquisitionKind::ucb,
                                                                    AcquisitionKind::thompson, AcquisitionKind::greedy};

inline std::string to_string(AcquisitionKind k)
{
  switch (k) {
    case AcquisitionKind::ei: return "ei";
    case AcquisitionKind::ucb: return "ucb";
    case AcquisitionKind::thompson: return "thompson";
    case AcquisitionKind::greedy: return "greedy";
  }
  return "?";
}

inline AcquisitionKind parse_acquisition_kind(std::string_view s)
{
  for (auto k : kAllAcquisitions)
    if (to_string(k) == s) return k;
  if (s == "ts") return AcquisitionKind::thompson;
  throw ConfigError("unknown acquisition '" + std::string(s) + "'");
}

struct AcquisitionSpec
{
  AcquisitionKind kind = AcquisitionKind::ei;
  double xi = 0.01;
  double beta = 2.0;

  void validate() const
  {
    if (!(xi >= 0.0) || !(beta >= 0.0)) throw ConfigError("acquisition needs xi >= 0 and beta >= 0");
  }

  friend bool operator==(const AcquisitionSpec&, const AcquisitionSpec&) = default;
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// (mu - f* - xi) Phi(z) + sigma phi(z); sigma = 0 collapses to max(mu - f* - xi, 0).
inline double expected_improvement(double mu, double sigma, double f_star, double xi)
{
  const double imp = mu - f_star - xi;
  if (sigma <= 0.0) return std::max(imp, 0.0);
  const double z = imp / sigma;
  return std::max(imp * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

inline Eigen::VectorXd score_ei(const PosteriorPrediction& pred, double f_star, double xi)
{
  Eigen::VectorXd s(pred.mean.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = expected_improvement(pred.mean(i), pred.std(i), f_star, xi);
  return s;
}

inline Eigen::VectorXd score_ucb(const PosteriorPrediction& pred, double beta)
{
  return pred.mean + beta * pred.std;
}

inline Eigen::VectorXd sample_thompson(const PosteriorPrediction& pred, std::uint64_t rng_seed)
{
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd s(pred.mean.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = pred.mean(i) + pred.std(i) * normal(rng);
  return s;
}

inline Eigen::VectorXd score_greedy(const PosteriorPrediction& pred) { return pred.mean; }

inline Eigen::VectorXd score(const AcquisitionSpec& spec, const PosteriorPrediction& pred, double f_star,
                             std::uint64_t rng_seed)
{
  switch (spec.kind) {
    case AcquisitionKind::ei: return score_ei(pred, f_star, spec.xi);
    case AcquisitionKind::ucb: return score_ucb(pred, spec.beta);
    case AcquisitionKind::thompson: return sample_thompson(pred, rng_seed);
    case AcquisitionKind::greedy: return score_greedy(pred);
  }
  throw ConfigError("unhandled acquisition");
}

// Positions of the b highest scores. Exact ties are ordered by a random
// permutation drawn from tie_seed.
inline std::vector<std::size_t> select_batch(const Eigen::VectorXd& scores, std::size_t b, std::uint64_t tie_seed)
{
  const auto n = static_cast<std::size_t>(scores.size());
  if (b > n) throw SizeError("batch of " + std::to_string(b) + " exceeds " + std::to_string(n) + " candidates");
  std::vector<std::size_t> tiebreak(n);
  std::iota(tiebreak.begin(), tiebreak.end(), 0);
  std::mt19937_64 rng(tie_seed);
  std::shuffle(tiebreak.begin(), tiebreak.end(), rng);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t c) {
    const double sa = scores(static_cast<Eigen::Index>(a)), sc = scores(static_cast<Eigen::Index>(c));
    if (sa != sc) return sa > sc;
    return tiebreak[a] < tiebreak[c];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b), order.end(), better);
  order.resize(b);
  return order;
}

} // namespace riskbo
