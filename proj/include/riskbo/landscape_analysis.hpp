#pragma once

// Landscape complexity properties computed on raw fitness.

#include "riskbo/encodings.hpp"

#include <numbers>
#include <set>

namespace riskbo {

struct OtsuResult
{
  double threshold = 0.0;  // raw units; active means fitness >= threshold
  double active_pct = 0.0;
};

inline constexpr std::size_t kOtsuBins = 256;

// Histogram Otsu: 256 equal-width bins on [min, max], bin centers as class
// values, first split maximizing the between-class variance, centred in any empty gap.
inline OtsuResult otsu_threshold(std::span<const double> fitness)
{
  if (fitness.size() < 2) throw DegenerateError("Otsu needs at least 2 values");
  const auto [lo_it, hi_it] = std::minmax_element(fitness.begin(), fitness.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw DegenerateError("Otsu threshold of constant data");
  const double width = (hi - lo) / static_cast<double>(kOtsuBins);

  std::array<double, kOtsuBins> hist{};
  for (double f : fitness) {
    auto b = static_cast<std::size_t>((f - lo) / width);
    hist[std::min(b, kOtsuBins - 1)] += 1.0;
  }
  const double n = static_cast<double>(fitness.size());
  double total_mass = 0.0;
  for (std::size_t b = 0; b < kOtsuBins; ++b) total_mass += hist[b] * (lo + (static_cast<double>(b) + 0.5) * width);

  double w0 = 0.0, m0 = 0.0, best = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k + 1 < kOtsuBins; ++k) {
    w0 += hist[k];
    m0 += hist[k] * (lo + (static_cast<double>(k) + 0.5) * width);
    const double w1 = n - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = m0 / w0, mu1 = (total_mass - m0) / w1;
    const double between = (w0 / n) * (w1 / n) * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  // Empty bins after the best split give the same partition; centre the
  // threshold in that gap instead of hugging the lower class.
  std::size_t last_k = best_k;
  while (last_k + 2 < kOtsuBins && hist[last_k + 1] == 0.0) ++last_k;
  OtsuResult r;
  r.threshold = lo + (0.5 * static_cast<double>(best_k + last_k) + 1.0) * width;
  std::size_t active = 0;
  for (double f : fitness) active += f >= r.threshold;
  r.active_pct = 100.0 * static_cast<double>(active) / n;
  return r;
}

struct Moments
{
  double skewness = 0.0;
  double kurtosis = 0.0; // excess (normal -> 0)
};

// Biased sample moments: g1 = m3 / m2^1.5, g2 = m4 / m2^2 - 3.
inline Moments moments(std::span<const double> fitness)
{
  if (fitness.size() < 3) throw DegenerateError("moments need at least 3 values");
  const double mean = mean_of(fitness);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double f : fitness) {
    const double d = f - mean, d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(fitness.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 1e-300)) throw DegenerateError("moments of zero-variance data");
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

inline constexpr std::size_t kKdeGrid = 512;
inline constexpr double kKdeProminence = 0.01;

// Gaussian KDE, Scott bandwidth sd * n^(-1/5), on a 512-point grid.
inline std::vector<double> kde_density(std::span<const double> fitness, std::vector<double>* grid_out = nullptr)
{
  const auto [lo_it, hi_it] = std::minmax_element(fitness.begin(), fitness.end());
  const double lo = *lo_it, hi = *hi_it;
  const double n = static_cast<double>(fitness.size());
  const double mean = mean_of(fitness);
  double ss = 0.0;
  for (double f : fitness) ss += (f - mean) * (f - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0) || !(hi > lo)) throw DegenerateError("KDE of constant data");
  const double h = sd * std::pow(n, -0.2);
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));

  std::vector<double> sorted(fitness.begin(), fitness.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> density(kKdeGrid, 0.0);
  if (grid_out) grid_out->resize(kKdeGrid);
  const double cutoff = 40.0 * h; // exp(-800) underflows to zero anyway
  for (std::size_t g = 0; g < kKdeGrid; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(kKdeGrid - 1);
    if (grid_out) (*grid_out)[g] = x;
    auto first = std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    auto last = std::upper_bound(sorted.begin(), sorted.end(), x + cutoff);
    double s = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (x - *it) / h;
      s += std::exp(-0.5 * u * u);
    }
    density[g] = s * norm;
  }
  return density;
}

// Topographic prominence of the strict local maximum at index i.
inline double peak_prominence(const std::vector<double>& d, std::size_t i)
{
  double left_min = d[i];
  for (std::size_t j = i; j-- > 0;) {
    if (d[j] > d[i]) break;
    left_min = std::min(left_min, d[j]);
  }
  double right_min = d[i];
  for (std::size_t j = i + 1; j < d.size(); ++j) {
    if (d[j] > d[i]) break;
    right_min = std::min(right_min, d[j]);
  }
  return d[i] - std::max(left_min, right_min);
}

// Interior strict local maxima with prominence >= 1% of the density maximum.
// A density whose only maximum sits on the grid boundary counts as one mode.
inline std::size_t kde_peaks(std::span<const double> fitness)
{
  if (fitness.size() < 10) throw DegenerateError("KDE peaks need at least 10 values");
  const auto d = kde_density(fitness);
  const double floor = kKdeProminence * *std::max_element(d.begin(), d.end());
  std::size_t peaks = 0;
  for (std::size_t i = 1; i + 1 < d.size(); ++i)
    if (d[i] > d[i - 1] && d[i] > d[i + 1] && peak_prominence(d, i) >= floor) ++peaks;
  return std::max<std::size_t>(peaks, 1);
}

struct CauchyFit
{
  double location = 0.0;
  double scale = 1.0;
  bool converged = true;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& s, double q)
{
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  return i + 1 < s.size() ? s[i] + frac * (s[i + 1] - s[i]) : s[i];
}

inline double cauchy_loglik(std::span<const double> x, double loc, double log_scale)
{
  const double g = std::exp(log_scale);
  double ll = 0.0;
  for (double v : x) {
    const double u = (v - loc) / g;
    ll -= std::log1p(u * u);
  }
  return ll - static_cast<double>(x.size()) * (log_scale + std::log(std::numbers::pi));
}

} // namespace detail

// Maximum-likelihood Cauchy (location, scale) by damped Newton on
// (location, log scale), started at (median, half IQR). Falls back to the
// median when the iteration does not converge.
inline CauchyFit cauchy_peak(std::span<const double> fitness)
{
  if (fitness.size() < 10) throw DegenerateError("Cauchy fit needs at least 10 values");
  std::vector<double> s(fitness.begin(), fitness.end());
  std::sort(s.begin(), s.end());
  const double median = detail::quantile_sorted(s, 0.5);
  double half_iqr = 0.5 * (detail::quantile_sorted(s, 0.75) - detail::quantile_sorted(s, 0.25));
  if (!(half_iqr > 0.0)) half_iqr = std::max(1e-6, 1e-3 * (s.back() - s.front()));
  if (!(half_iqr > 0.0)) return {median, 1.0, false};

  double loc = median, ls = std::log(half_iqr);
  double ll = detail::cauchy_loglik(fitness, loc, ls);
  for (int it = 0; it < 200; ++it) {
    const double g = std::exp(ls);
    double gl = 0.0, gs = 0.0, hll = 0.0, hss = 0.0, hls = 0.0;
    for (double v : fitness) {
      const double u = (v - loc) / g, q = 1.0 + u * u;
      gl += 2.0 * u / (g * q);
      gs += -1.0 + 2.0 * u * u / q;
      hll += -2.0 * (1.0 - u * u) / (g * g * q * q);
      hss += -4.0 * u * u / (q * q);
      hls += -4.0 * u / (g * q * q);
    }
    const double det = hll * hss - hls * hls;
    double dl, ds;
    if (hll < 0.0 && det > 0.0) {
      dl = -(hss * gl - hls * gs) / det;
      ds = -(-hls * gl + hll * gs) / det;
    } else {
      const double n = static_cast<double>(fitness.size());
      dl = gl * g * g / n;
      ds = gs / n;
    }
    double step = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const double nl = loc + step * dl, ns = ls + step * ds;
      const double nll = detail::cauchy_loglik(fitness, nl, ns);
      if (std::isfinite(nll) && nll >= ll) {
        const double change = std::abs(nl - loc) + std::abs(ns - ls);
        loc = nl;
        ls = ns;
        const double gain = nll - ll;
        ll = nll;
        improved = true;
        if (change < 1e-10 * (1.0 + std::abs(loc)) || gain < 1e-13 * (1.0 + std::abs(ll)))
          return {loc, std::exp(ls), true};
        break;
      }
      step *= 0.5;
    }
    if (!improved) return {loc, std::exp(ls), true}; // stationary to machine precision
  }
  return {median, half_iqr, false};
}

// Variants strictly fitter than every Hamming-1 neighbor; isolated variants
// do not count.
inline std::size_t local_optima(const Landscape& landscape, const NeighborIndex& neighbors)
{
  const auto& f = landscape.raw_fitness();
  std::size_t count = 0;
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    const auto& adj = neighbors[i];
    if (adj.empty()) continue;
    bool peak = true;
    for (auto j : adj)
      if (!(f[i] > f[j])) {
        peak = false;
        break;
      }
    count += peak;
  }
  return count;
}

// Wild type when it is in the pool, else the pool sequence with the smallest
// total Hamming distance to all others (ties to the earliest in sorted order).
inline std::size_t reference_index(const Landscape& landscape)
{
  if (const auto& wt = landscape.wild_type())
    if (auto idx = landscape.find(*wt)) return *idx;
  const std::size_t L = landscape.length();
  std::vector<std::array<std::size_t, 256>> counts(L);
  for (auto& c : counts) c.fill(0);
  for (const auto& s : landscape.sequences())
    for (std::size_t p = 0; p < L; ++p) ++counts[p][static_cast<unsigned char>(s[p])];
  std::size_t best = 0, best_agree = 0;
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    std::size_t agree = 0;
    for (std::size_t p = 0; p < L; ++p) agree += counts[p][static_cast<unsigned char>(landscape.sequences()[i][p])];
    if (agree > best_agree) {
      best_agree = agree;
      best = i;
    }
  }
  return best;
}

struct RuggednessResult
{
  double value = 0.0;
  bool regularized = false;
};

inline constexpr double kRuggednessRidge = 1e-6;

// Roughness-to-slope ratio: least-squares additive model with one indicator
// per (position, non-reference letter) plus an intercept;
// RMS(residual) / mean |single-effect coefficient|.
inline RuggednessResult ruggedness(const Landscape& landscape, const NeighborIndex& /*neighbors*/)
{
  const auto& ref = landscape.sequences()[reference_index(landscape)];
  const std::size_t L = landscape.length();
  std::map<std::pair<std::size_t, char>, Eigen::Index> column;
  std::set<std::size_t> mutated_positions;
  for (const auto& s : landscape.sequences())
    for (std::size_t p = 0; p < L; ++p)
      if (s[p] != ref[p]) {
        column.emplace(std::make_pair(p, s[p]), 0);
        mutated_positions.insert(p);
      }
  if (mutated_positions.size() < 2) throw DegenerateError("ruggedness needs at least 2 mutated positions");
  Eigen::Index next = 1;
  for (auto& [key, col] : column) col = next++;
  const Eigen::Index P = next;

  Matrix XtX = Matrix::Zero(P, P);
  Vector Xty = Vector::Zero(P);
  const auto& f = landscape.raw_fitness();
  std::vector<Eigen::Index> active;
  auto row_columns = [&](const std::string& s) {
    active.assign(1, 0);
    for (std::size_t p = 0; p < L; ++p)
      if (s[p] != ref[p]) active.push_back(column.at({p, s[p]}));
  };
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    row_columns(landscape.sequences()[i]);
    for (auto a : active) {
      Xty(a) += f[i];
      for (auto b : active) XtX(a, b) += 1.0;
    }
  }

  RuggednessResult r;
  Eigen::LDLT<Matrix> ldlt(XtX);
  const Vector d = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-10 * d.maxCoeff()) {
    r.regularized = true;
    ldlt.compute(XtX + kRuggednessRidge * Matrix::Identity(P, P));
  }
  const Vector beta = ldlt.solve(Xty);

  double sse = 0.0;
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    row_columns(landscape.sequences()[i]);
    double pred = 0.0;
    for (auto a : active) pred += beta(a);
    sse += (f[i] - pred) * (f[i] - pred);
  }
  const double rms = std::sqrt(sse / static_cast<double>(landscape.size()));
  const double slope = beta.tail(P - 1).cwiseAbs().mean();
  if (!(slope > 0.0)) throw DegenerateError("additive fit has zero slope");
  r.value = rms / slope;
  return r;
}

struct EpistasisResult
{
  double magnitude_pct = 0.0;
  double non_magnitude_pct = 0.0;
  std::size_t n_quadruples = 0; // reference, both singles and the double present
  std::size_t n_epistatic = 0;  // |epsilon| > eta
};

inline constexpr double kEpistasisTolerance = 0.05; // eta as a fraction of the fitness std

namespace detail {
inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }
} // namespace detail

// Pairwise classification over every double mutant of the reference whose
// two single mutants are in the pool.
inline EpistasisResult epistasis(const Landscape& landscape)
{
  const std::size_t ref_idx = reference_index(landscape);
  const auto& ref = landscape.sequences()[ref_idx];
  const auto& f = landscape.raw_fitness();
  const double f_ref = f[ref_idx];
  const double mean = mean_of(f);
  double ss = 0.0;
  for (double v : f) ss += (v - mean) * (v - mean);
  const double eta = kEpistasisTolerance * std::sqrt(ss / static_cast<double>(f.size()));

  EpistasisResult r;
  std::size_t magnitude = 0, non_magnitude = 0;
  for (std::size_t i = 0; i < landscape.size(); ++i) {
    const auto& s = landscape.sequences()[i];
    std::size_t pos[2];
    std::size_t d = 0;
    for (std::size_t p = 0; p < s.size() && d <= 2; ++p)
      if (s[p] != ref[p]) {
        if (d < 2) pos[d] = p;
        ++d;
      }
    if (d != 2) continue;
    std::string single_a = ref, single_b = ref;
    single_a[pos[0]] = s[pos[0]];
    single_b[pos[1]] = s[pos[1]];
    const auto ia = landscape.find(single_a), ib = landscape.find(single_b);
    if (!ia || !ib) continue;
    ++r.n_quadruples;
    const double fa = f[*ia], fb = f[*ib], fab = f[i];
    const double eps = fab - fa - fb + f_ref;
    if (std::abs(eps) <= eta) continue;
    ++r.n_epistatic;
    const bool flip = detail::sign_of(fab - fb) != detail::sign_of(fa - f_ref) ||
                      detail::sign_of(fab - fa) != detail::sign_of(fb - f_ref);
    (flip ? non_magnitude : magnitude) += 1;
  }
  if (r.n_epistatic > 0) {
    r.magnitude_pct = 100.0 * static_cast<double>(magnitude) / static_cast<double>(r.n_epistatic);
    r.non_magnitude_pct = 100.0 * static_cast<double>(non_magnitude) / static_cast<double>(r.n_epistatic);
  }
  return r;
}

struct LandscapeProfile
{
  std::string name;
  double active_pct = std::numeric_limits<double>::quiet_NaN();
  double otsu_threshold = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  double ruggedness = std::numeric_limits<double>::quiet_NaN();
  double cauchy_peak = std::numeric_limits<double>::quiet_NaN();
  double kurtosis = std::numeric_limits<double>::quiet_NaN();
  double skewness = std::numeric_limits<double>::quiet_NaN();
  double kde_peaks = std::numeric_limits<double>::quiet_NaN();
  double local_optima = std::numeric_limits<double>::quiet_NaN();
  double magnitude_epistasis_pct = std::numeric_limits<double>::quiet_NaN();
  double non_magnitude_epistasis_pct = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> flags;

  // The nine properties correlated against model performance.
  std::vector<std::pair<std::string, double>> properties() const
  {
    return {{"active_pct", active_pct},
            {"ruggedness", ruggedness},
            {"cauchy_peak", cauchy_peak},
            {"kurtosis", kurtosis},
            {"kde_peaks", kde_peaks},
            {"local_optima", local_optima},
            {"magnitude_epistasis", magnitude_epistasis_pct},
            {"non_magnitude_epistasis", non_magnitude_epistasis_pct},
            {"skewness", skewness}};
  }
};

inline LandscapeProfile profile(const Landscape& landscape)
{
  LandscapeProfile p;
  p.name = landscape.name();
  p.n = landscape.size();
  const auto& f = landscape.raw_fitness();
  auto guarded = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      p.flags.push_back(std::string(what) + ": " + e.what());
    }
  };
  guarded("otsu", [&] {
    auto o = otsu_threshold(f);
    p.active_pct = o.active_pct;
    p.otsu_threshold = o.threshold;
  });
  guarded("moments", [&] {
    auto m = moments(f);
    p.skewness = m.skewness;
    p.kurtosis = m.kurtosis;
  });
  guarded("kde", [&] { p.kde_peaks = static_cast<double>(kde_peaks(f)); });
  guarded("cauchy", [&] {
    auto c = cauchy_peak(f);
    p.cauchy_peak = c.location;
    if (!c.converged) p.flags.push_back("cauchy: fell back to median");
  });
  const auto neighbors = build_neighbor_index(landscape);
  guarded("local_optima", [&] { p.local_optima = static_cast<double>(local_optima(landscape, neighbors)); });
  guarded("ruggedness", [&] {
    auto r = ruggedness(landscape, neighbors);
    p.ruggedness = r.value;
    if (r.regularized) p.flags.push_back("ruggedness: ridge-regularized additive fit");
  });
  guarded("epistasis", [&] {
    auto e = epistasis(landscape);
    p.magnitude_epistasis_pct = e.magnitude_pct;
    p.non_magnitude_epistasis_pct = e.non_magnitude_pct;
  });
  return p;
}

} // namespace riskbo
