#pragma once

// Fully connected ReLU networks over a flat parameter vector, with
// hand-written backpropagation. Layer l stores W_l (out x in, column-major)
// followed by b_l.

#include "riskbo/optim.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace riskbo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Mlp
{
public:
  Mlp() = default;
  explicit Mlp(std::vector<Eigen::Index> dims) : dims_(std::move(dims))
  {
    if (dims_.size() < 2) throw ConfigError("network needs at least one layer");
    offsets_.push_back(0);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l)
      offsets_.push_back(offsets_.back() + dims_[l + 1] * dims_[l] + dims_[l + 1]);
  }

  // in -> hidden -> hidden -> out: three linear layers, ReLU between.
  static Mlp three_layer(Eigen::Index in, Eigen::Index hidden, Eigen::Index out)
  {
    return Mlp({in, hidden, hidden, out});
  }

  std::size_t n_layers() const noexcept { return dims_.size() - 1; }
  Eigen::Index n_params() const noexcept { return offsets_.back(); }
  Eigen::Index input_dim() const noexcept { return dims_.front(); }
  Eigen::Index output_dim() const noexcept { return dims_.back(); }
  Eigen::Index width(std::size_t layer) const noexcept { return dims_[layer + 1]; }

  // PyTorch-style U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  Vector init_params(std::mt19937_64& rng) const
  {
    Vector p(n_params());
    for (std::size_t l = 0; l < n_layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = offsets_[l]; i < offsets_[l + 1]; ++i) p(i) = u(rng);
    }
    return p;
  }

  struct Cache
  {
    std::vector<Matrix> inputs;  // input to layer l
    std::vector<Matrix> pre;     // pre-activation of hidden layer l
    std::vector<Matrix> masks;   // dropout masks applied after hidden layer l
  };

  // Dropout masks hold {0, 1/(1-p)}; a single-row mask is shared by all rows.
  Matrix forward(const Vector& params, const Matrix& X, Cache* cache = nullptr,
                 const std::vector<Matrix>* masks = nullptr) const
  {
    if (X.cols() != input_dim())
      throw ShapeError("network expects " + std::to_string(input_dim()) + " inputs, got " +
                       std::to_string(X.cols()));
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
      cache->masks.clear();
    }
    Matrix a = X;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      auto W = weights(params, l);
      auto b = bias(params, l);
      Matrix z = a * W.transpose();
      z.rowwise() += b.transpose();
      if (cache) cache->inputs.push_back(std::move(a));
      if (l + 1 == n_layers()) return z;
      a = z.cwiseMax(0.0);
      if (masks && l < masks->size() && (*masks)[l].size() > 0) {
        const auto& m = (*masks)[l];
        if (m.rows() == 1) a.array().rowwise() *= m.row(0).array();
        else a.array() *= m.array();
      }
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->masks.push_back(masks && l < masks->size() ? (*masks)[l] : Matrix());
      }
    }
    return a;
  }

  // Gradient of sum(dout .* output) with respect to the parameters.
  Vector backward(const Vector& params, const Cache& cache, const Matrix& dout) const
  {
    Vector grad = Vector::Zero(n_params());
    Matrix dz = dout;
    for (std::size_t l = n_layers(); l-- > 0;) {
      const Matrix& a = cache.inputs[l];
      Eigen::Map<Matrix> dW(grad.data() + offsets_[l], dims_[l + 1], dims_[l]);
      dW.noalias() = dz.transpose() * a;
      grad.segment(offsets_[l] + dims_[l + 1] * dims_[l], dims_[l + 1]) = dz.colwise().sum().transpose();
      if (l == 0) break;
      Matrix da = dz * weights(params, l);
      const Matrix& m = cache.masks[l - 1];
      if (m.size() > 0) {
        if (m.rows() == 1) da.array().rowwise() *= m.row(0).array();
        else da.array() *= m.array();
      }
      dz = (cache.pre[l - 1].array() > 0.0).select(da, 0.0);
    }
    return grad;
  }

  Matrix sample_masks_row(double p, Eigen::Index rows, std::mt19937_64& rng, std::size_t layer) const
  {
    std::bernoulli_distribution keep(1.0 - p);
    const double scale = 1.0 / (1.0 - p);
    Matrix m(rows, width(layer));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = keep(rng) ? scale : 0.0;
    return m;
  }

  std::vector<Matrix> sample_masks(double p, Eigen::Index rows, std::mt19937_64& rng) const
  {
    std::vector<Matrix> masks;
    for (std::size_t l = 0; l + 1 < n_layers(); ++l) masks.push_back(sample_masks_row(p, rows, rng, l));
    return masks;
  }

private:
  Eigen::Map<const Matrix> weights(const Vector& p, std::size_t l) const
  {
    return Eigen::Map<const Matrix>(p.data() + offsets_[l], dims_[l + 1], dims_[l]);
  }
  Eigen::Map<const Vector> bias(const Vector& p, std::size_t l) const
  {
    return Eigen::Map<const Vector>(p.data() + offsets_[l] + dims_[l + 1] * dims_[l], dims_[l + 1]);
  }

  std::vector<Eigen::Index> dims_;
  std::vector<Eigen::Index> offsets_;
};

struct NetTrainOptions
{
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double dropout = 0.0;
};

namespace detail {

inline Matrix gather(const Matrix& X, std::span<const std::size_t> rows)
{
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

inline Vector gather(const Vector& y, std::span<const std::size_t> rows)
{
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// Calls step(batch_rows, epoch) for every mini-batch of every epoch.
template <typename Step>
void for_each_minibatch(std::size_t n, const NetTrainOptions& opt, std::mt19937_64& rng, Step&& step)
{
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const std::size_t bs = std::max<std::size_t>(1, opt.batch_size);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      step(std::span<const std::size_t>(perm.data() + start, end - start), epoch);
    }
  }
}

} // namespace detail

// Mean-squared-error training with the schedule-free optimizer; returns the
// averaged iterate.
inline Vector train_mlp_mse(const Mlp& net, Vector init, const Matrix& X, const Vector& y,
                            const NetTrainOptions& opt, std::mt19937_64& rng)
{
  auto state = OptimizerState::init(std::move(init), opt.learning_rate);
  Mlp::Cache cache;
  detail::for_each_minibatch(static_cast<std::size_t>(X.rows()), opt, rng,
                             [&](std::span<const std::size_t> rows, std::size_t epoch) {
    const Matrix xb = detail::gather(X, rows);
    const Vector yb = detail::gather(y, rows);
    const Vector params = state.gradient_point();
    std::vector<Matrix> masks;
    if (opt.dropout > 0.0) masks = net.sample_masks(opt.dropout, xb.rows(), rng);
    const Matrix out = net.forward(params, xb, &cache, opt.dropout > 0.0 ? &masks : nullptr);
    const Vector resid = out.col(0) - yb;
    const double loss = resid.squaredNorm() / static_cast<double>(rows.size());
    if (!std::isfinite(loss)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
    const Matrix dout = (2.0 / static_cast<double>(rows.size())) * resid;
    schedule_free_step_inplace(state, net.backward(params, cache, dout));
  });
  return state.averaged();
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Mean-field Gaussian posterior over every network parameter, N(0, 1) prior.
struct BayesianNet
{
  Mlp net;
  Vector mu;
  Vector rho; // sigma = softplus(rho)

  Vector sigma() const { return rho.unaryExpr([](double r) { return softplus(r); }); }

  Vector sample(std::mt19937_64& rng) const
  {
    std::normal_distribution<double> normal;
    Vector w(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) w(i) = mu(i) + softplus(rho(i)) * normal(rng);
    return w;
  }

  double kl() const
  {
    double total = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const double s = softplus(rho(i));
      total += 0.5 * (s * s + mu(i) * mu(i) - 1.0) - std::log(s);
    }
    return total;
  }
};

inline constexpr double kBnnRhoInit = -5.0;

// Reparameterized ELBO: minibatch MSE + kl_weight * KL / n_train.
inline BayesianNet train_bnn(const Mlp& net, const Matrix& X, const Vector& y, const NetTrainOptions& opt,
                             double kl_weight, std::mt19937_64& rng)
{
  const Eigen::Index P = net.n_params();
  Vector init(2 * P);
  init.head(P) = net.init_params(rng);
  init.tail(P).setConstant(kBnnRhoInit);
  auto state = OptimizerState::init(std::move(init), opt.learning_rate);
  const double kl_scale = kl_weight / static_cast<double>(X.rows());
  std::normal_distribution<double> normal;
  Mlp::Cache cache;
  Vector eps(P), w(P), sig(P);
  detail::for_each_minibatch(static_cast<std::size_t>(X.rows()), opt, rng,
                             [&](std::span<const std::size_t> rows, std::size_t epoch) {
    const Vector theta = state.gradient_point();
    const auto mu = theta.head(P);
    const auto rho = theta.tail(P);
    for (Eigen::Index i = 0; i < P; ++i) {
      eps(i) = normal(rng);
      sig(i) = softplus(rho(i));
      w(i) = mu(i) + sig(i) * eps(i);
    }
    const Matrix xb = detail::gather(X, rows);
    const Vector yb = detail::gather(y, rows);
    const Matrix out = net.forward(w, xb, &cache);
    const Vector resid = out.col(0) - yb;
    const double loss = resid.squaredNorm() / static_cast<double>(rows.size());
    if (!std::isfinite(loss)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
    const Vector gw = net.backward(w, cache, (2.0 / static_cast<double>(rows.size())) * resid);
    Vector grad(2 * P);
    for (Eigen::Index i = 0; i < P; ++i) {
      grad(i) = gw(i) + kl_scale * mu(i);
      grad(P + i) = (gw(i) * eps(i) + kl_scale * (sig(i) - 1.0 / sig(i))) * sigmoid(rho(i));
    }
    schedule_free_step_inplace(state, grad);
  });
  BayesianNet bnn{net, state.averaged().head(P), state.averaged().tail(P)};
  return bnn;
}

} // namespace riskbo
