#pragma once

// Exact Gaussian-process regression: RBF and Matern-5/2 kernels, Cholesky
// posterior with jitter escalation, and the negative log marginal likelihood
// with analytic gradients (including gradients with respect to the inputs,
// which the deep-kernel GP backpropagates into its feature network).

#include "riskbo/nn.hpp"
#include "riskbo/posterior.hpp"

#include <numbers>

namespace riskbo {

enum class KernelType
{
  rbf,
  matern52
};

inline std::string to_string(KernelType k) { return k == KernelType::rbf ? "rbf" : "matern"; }

inline KernelType parse_kernel(std::string_view s)
{
  if (s == "rbf" || s == "RBF") return KernelType::rbf;
  if (s == "matern" || s == "matern52" || s == "Matern") return KernelType::matern52;
  throw ConfigError("unknown kernel '" + std::string(s) + "'");
}

struct GpHyper
{
  double lengthscale = 1.0;
  double signal_var = 1.0;
  double noise_var = 0.1;
  double mean = 0.0;
};

inline Matrix squared_distances(const Matrix& A, const Matrix& B)
{
  const Vector na = A.rowwise().squaredNorm();
  const Vector nb = B.rowwise().squaredNorm();
  Matrix d = -2.0 * A * B.transpose();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

// Unit-variance correlation k(r) for a squared distance r2.
inline double kernel_corr(KernelType type, double r2, double ell)
{
  if (type == KernelType::rbf) return std::exp(-0.5 * r2 / (ell * ell));
  const double u = std::sqrt(5.0 * r2) / ell;
  return (1.0 + u + u * u / 3.0) * std::exp(-u);
}

inline Matrix kernel_matrix(KernelType type, const Matrix& A, const Matrix& B, double ell, double signal_var)
{
  Matrix d = squared_distances(A, B);
  return d.unaryExpr([&](double r2) { return signal_var * kernel_corr(type, r2, ell); });
}

inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

// Factorizes K (+ escalating diagonal jitter 1e-8 -> 1e-4 in x10 steps).
// Returns the jitter that was added.
inline double robust_cholesky(const Matrix& K, Eigen::LLT<Matrix>& llt)
{
  llt.compute(K);
  if (llt.info() == Eigen::Success) return 0.0;
  const Eigen::Index n = K.rows();
  for (double jitter = kJitterStart; jitter <= kJitterMax * 1.0000001; jitter *= 10.0) {
    llt.compute(K + jitter * Matrix::Identity(n, n));
    if (llt.info() == Eigen::Success) return jitter;
  }
  throw TrainingError("Cholesky failed even with jitter " + std::to_string(kJitterMax));
}

// Posterior for fixed hyperparameters. Predictive std includes the
// likelihood noise.
class GpPosterior
{
public:
  GpPosterior() = default;

  static GpPosterior fit(KernelType type, Matrix X, const Vector& y, const GpHyper& hyper)
  {
    if (X.rows() != y.size()) throw ShapeError("GP inputs and targets differ in length");
    GpPosterior gp;
    gp.type_ = type;
    gp.hyper_ = hyper;
    gp.X_ = std::move(X);
    Matrix K = kernel_matrix(type, gp.X_, gp.X_, hyper.lengthscale, hyper.signal_var);
    K.diagonal().array() += hyper.noise_var;
    gp.jitter_ = robust_cholesky(K, gp.llt_);
    gp.alpha_ = gp.llt_.solve((y.array() - hyper.mean).matrix());
    return gp;
  }

  PosteriorPrediction predict(const Matrix& Xs) const
  {
    if (Xs.cols() != X_.cols())
      throw ShapeError("GP trained on dimension " + std::to_string(X_.cols()) + ", queried with " +
                       std::to_string(Xs.cols()));
    const Matrix Ks = kernel_matrix(type_, Xs, X_, hyper_.lengthscale, hyper_.signal_var);
    PosteriorPrediction out;
    out.mean = (Ks * alpha_).array() + hyper_.mean;
    const Matrix V = llt_.matrixL().solve(Ks.transpose());
    const Vector reduction = V.colwise().squaredNorm().transpose();
    out.std = (hyper_.signal_var + hyper_.noise_var - reduction.array()).cwiseMax(0.0).sqrt();
    return out;
  }

  const GpHyper& hyper() const noexcept { return hyper_; }
  double jitter() const noexcept { return jitter_; }
  Eigen::Index input_dim() const noexcept { return X_.cols(); }

private:
  KernelType type_ = KernelType::rbf;
  GpHyper hyper_;
  Matrix X_;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
  double jitter_ = 0.0;
};

inline constexpr double kNoiseFloor = 1e-6;

// Log-space hyperparameters: noise_var = exp(log_noise) + floor.
struct GpLogHyper
{
  double log_lengthscale = 0.0;
  double log_signal = 0.0;
  double log_noise = std::log(0.1);

  GpHyper natural() const
  {
    return {std::exp(log_lengthscale), std::exp(log_signal), std::exp(log_noise) + kNoiseFloor, 0.0};
  }
};

struct MllGradient
{
  double value = 0.0; // negative log marginal likelihood / n
  double d_log_lengthscale = 0.0;
  double d_log_signal = 0.0;
  double d_log_noise = 0.0;
  Matrix d_inputs; // n x F, only when requested
};

// Zero-mean GP on (Phi, y). All quantities are divided by n.
inline MllGradient gp_neg_mll(KernelType type, const Matrix& Phi, const Vector& y, const GpLogHyper& h,
                              bool input_gradient)
{
  const Eigen::Index n = Phi.rows();
  const double ell = std::exp(h.log_lengthscale);
  const double s2 = std::exp(h.log_signal);
  const double noise = std::exp(h.log_noise) + kNoiseFloor;

  const Matrix R2 = squared_distances(Phi, Phi);
  Matrix Kf(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) Kf(i, j) = s2 * kernel_corr(type, R2(i, j), ell);
  Matrix K = Kf;
  K.diagonal().array() += noise;

  Eigen::LLT<Matrix> llt;
  robust_cholesky(K, llt);
  const Vector alpha = llt.solve(y);
  const Matrix Kinv = llt.solve(Matrix::Identity(n, n));
  const Matrix W = 0.5 * (Kinv - alpha * alpha.transpose());
  const double inv_n = 1.0 / static_cast<double>(n);

  MllGradient g;
  const auto& L = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(L(i, i));
  g.value = (0.5 * y.dot(alpha) + logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi)) * inv_n;
  g.d_log_signal = (W.cwiseProduct(Kf)).sum() * inv_n;
  g.d_log_noise = W.trace() * (noise - kNoiseFloor) * inv_n;

  // dk/dlog(ell) and the radial factor c with dk/dphi_i = c * (phi_i - phi_j).
  Matrix C(n, n);
  double d_ell = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r2 = R2(i, j);
      double dk_dlog_ell, c;
      if (type == KernelType::rbf) {
        const double k = Kf(i, j);
        dk_dlog_ell = k * r2 / (ell * ell);
        c = -k / (ell * ell);
      } else {
        const double u = std::sqrt(5.0 * r2) / ell;
        const double e = s2 * std::exp(-u);
        dk_dlog_ell = e * (u * u / 3.0) * (1.0 + u);
        c = -e * (5.0 / (3.0 * ell * ell)) * (1.0 + u);
      }
      d_ell += W(i, j) * dk_dlog_ell;
      C(i, j) = c;
    }
  g.d_log_lengthscale = d_ell * inv_n;

  if (input_gradient) {
    Matrix M = W.cwiseProduct(C);
    M.diagonal().setZero();
    const Vector rowsum = M.rowwise().sum();
    g.d_inputs = 2.0 * inv_n * (rowsum.asDiagonal() * Phi - M * Phi);
  }
  if (!std::isfinite(g.value)) throw TrainingError("non-finite marginal likelihood");
  return g;
}

// Median pairwise Euclidean distance; 1 when all inputs coincide.
inline double median_distance(const Matrix& X)
{
  const Eigen::Index n = std::min<Eigen::Index>(X.rows(), 500);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((X.row(i) - X.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 1e-12 ? *mid : 1.0;
}

} // namespace riskbo
