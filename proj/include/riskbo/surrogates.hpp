#pragma once

// Six uncertainty-aware regressors behind one train/predict contract, plus
// the hyperparameter grids and the grid search used to tune them.

#include "riskbo/encodings.hpp"
#include "riskbo/forest.hpp"
#include "riskbo/gp.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <variant>

namespace riskbo {

enum class SurrogateKind
{
  random_forest,
  gp,
  deep_kernel_gp,
  bnn,
  dropout_nn,
  ensemble_nn
};

inline constexpr std::array<SurrogateKind, 6> kAllSurrogates = {
  SurrogateKind::random_forest, SurrogateKind::gp,         SurrogateKind::deep_kernel_gp,
  SurrogateKind::bnn,           SurrogateKind::dropout_nn, SurrogateKind::ensemble_nn};

inline std::string to_string(SurrogateKind k)
{
  switch (k) {
    case SurrogateKind::random_forest: return "random_forest";
    case SurrogateKind::gp: return "gp";
    case SurrogateKind::deep_kernel_gp: return "deep_kernel_gp";
    case SurrogateKind::bnn: return "bnn";
    case SurrogateKind::dropout_nn: return "dropout_nn";
    case SurrogateKind::ensemble_nn: return "ensemble_nn";
  }
  return "?";
}

inline SurrogateKind parse_surrogate_kind(std::string_view s)
{
  for (auto k : kAllSurrogates)
    if (to_string(k) == s) return k;
  if (s == "rf") return SurrogateKind::random_forest;
  if (s == "dkgp" || s == "dkl") return SurrogateKind::deep_kernel_gp;
  if (s == "dropout") return SurrogateKind::dropout_nn;
  if (s == "ensemble") return SurrogateKind::ensemble_nn;
  throw ConfigError("unknown surrogate kind '" + std::string(s) + "'");
}

inline constexpr std::array<double, 7> kLearningRateGrid = {1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1};
inline constexpr std::array<std::size_t, 4> kForestSizeGrid = {10, 50, 100, 200};
inline constexpr std::size_t kForestDepthCap = 10;

struct SurrogateSpec
{
  SurrogateKind kind = SurrogateKind::gp;
  double learning_rate = 1e-3;
  KernelType kernel = KernelType::rbf;
  std::size_t n_estimators = 100;
  std::optional<std::size_t> max_depth; // nullopt = grow until pure
  std::size_t hidden_dim = 128;
  double dropout = 0.1;
  double kl_weight = 1.0;
  std::size_t mc_samples = 30;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::size_t gp_iterations = 100;
  std::size_t feature_dim = 2; // deep-kernel output width

  static SurrogateSpec defaults(SurrogateKind kind)
  {
    SurrogateSpec s;
    s.kind = kind;
    s.n_estimators = kind == SurrogateKind::ensemble_nn ? 5 : 100;
    return s;
  }

  bool uses_learning_rate() const { return kind != SurrogateKind::random_forest; }
  bool uses_kernel() const { return kind == SurrogateKind::gp || kind == SurrogateKind::deep_kernel_gp; }

  // Compact hyperparameter tag, e.g. "lr=0.001,kernel=rbf".
  std::string tag() const
  {
    std::ostringstream os;
    if (kind == SurrogateKind::random_forest) {
      os << "n_estimators=" << n_estimators << ",max_depth=" << (max_depth ? std::to_string(*max_depth) : "none");
    } else {
      os << "lr=" << learning_rate;
      if (uses_kernel()) os << ",kernel=" << to_string(kernel);
    }
    return os.str();
  }

  friend bool operator==(const SurrogateSpec&, const SurrogateSpec&) = default;
};

inline bool on_lr_grid(double lr)
{
  return std::any_of(kLearningRateGrid.begin(), kLearningRateGrid.end(),
                     [&](double g) { return std::abs(g - lr) <= 1e-12 * g; });
}

inline nlohmann::json to_json(const SurrogateSpec& s)
{
  nlohmann::json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case SurrogateKind::random_forest:
      j["n_estimators"] = s.n_estimators;
      j["max_depth"] = s.max_depth ? nlohmann::json(*s.max_depth) : nlohmann::json(nullptr);
      break;
    case SurrogateKind::gp:
      j["learning_rate"] = s.learning_rate;
      j["kernel_type"] = to_string(s.kernel);
      break;
    case SurrogateKind::deep_kernel_gp:
      j["learning_rate"] = s.learning_rate;
      j["kernel_type"] = to_string(s.kernel);
      j["hidden_dim"] = s.hidden_dim;
      break;
    case SurrogateKind::bnn:
      j["learning_rate"] = s.learning_rate;
      j["hidden_dim"] = s.hidden_dim;
      j["kl_weight"] = s.kl_weight;
      j["mc_samples"] = s.mc_samples;
      break;
    case SurrogateKind::dropout_nn:
      j["learning_rate"] = s.learning_rate;
      j["hidden_dim"] = s.hidden_dim;
      j["dropout"] = s.dropout;
      j["mc_samples"] = s.mc_samples;
      break;
    case SurrogateKind::ensemble_nn:
      j["learning_rate"] = s.learning_rate;
      j["hidden_dim"] = s.hidden_dim;
      j["n_estimators"] = s.n_estimators;
      break;
  }
  if (s.kind != SurrogateKind::random_forest && s.kind != SurrogateKind::gp) {
    j["epochs"] = s.epochs;
    j["batch_size"] = s.batch_size;
  }
  return j;
}

// Parses a hyperparameter block. Unknown keys and off-grid values are rejected.
inline SurrogateSpec surrogate_from_json(const nlohmann::json& j)
{
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("surrogate spec needs a 'kind'");
  auto s = SurrogateSpec::defaults(parse_surrogate_kind(j.at("kind").get<std::string>()));
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    const auto& v = it.value();
    auto require = [&](bool ok) {
      if (!ok) throw ConfigError("surrogate '" + to_string(s.kind) + "': value for '" + key + "' is off the grid");
    };
    if (key == "kind") continue;
    if (key == "learning_rate" && s.uses_learning_rate()) {
      s.learning_rate = v.get<double>();
      require(on_lr_grid(s.learning_rate));
    } else if (key == "kernel_type" && s.uses_kernel()) {
      s.kernel = parse_kernel(v.get<std::string>());
    } else if (key == "n_estimators" && s.kind == SurrogateKind::random_forest) {
      s.n_estimators = v.get<std::size_t>();
      require(std::find(kForestSizeGrid.begin(), kForestSizeGrid.end(), s.n_estimators) != kForestSizeGrid.end());
    } else if (key == "n_estimators" && s.kind == SurrogateKind::ensemble_nn) {
      require(v.get<std::size_t>() == 5);
    } else if (key == "max_depth" && s.kind == SurrogateKind::random_forest) {
      if (v.is_null()) s.max_depth.reset();
      else {
        s.max_depth = v.get<std::size_t>();
        require(*s.max_depth == kForestDepthCap);
      }
    } else if (key == "hidden_dim" && s.kind != SurrogateKind::random_forest && s.kind != SurrogateKind::gp) {
      require(v.get<std::size_t>() == 128);
    } else if (key == "dropout" && s.kind == SurrogateKind::dropout_nn) {
      require(std::abs(v.get<double>() - 0.1) < 1e-12);
    } else if (key == "kl_weight" && s.kind == SurrogateKind::bnn) {
      require(std::abs(v.get<double>() - 1.0) < 1e-12);
    } else if (key == "mc_samples" && (s.kind == SurrogateKind::bnn || s.kind == SurrogateKind::dropout_nn)) {
      require(v.get<std::size_t>() == 30);
    } else if (key == "epochs" && s.kind != SurrogateKind::random_forest && s.kind != SurrogateKind::gp) {
      require(v.get<std::size_t>() == 100);
    } else if (key == "batch_size" && s.kind != SurrogateKind::random_forest && s.kind != SurrogateKind::gp) {
      require(v.get<std::size_t>() == 32);
    } else {
      throw ConfigError("surrogate '" + to_string(s.kind) + "': unknown hyperparameter '" + key + "'");
    }
  }
  return s;
}

// Trained model state per kind. Targets (and, except for the forest, inputs)
// are standardized on the training set; predictions are mapped back.
struct ForestModel
{
  RandomForest forest;
};

struct GpModel
{
  Standardizer inputs;
  GpPosterior posterior;
};

struct DeepKernelModel
{
  Standardizer inputs;
  Mlp net;
  Vector params;
  GpPosterior posterior;
};

struct BnnModel
{
  Standardizer inputs;
  BayesianNet bnn;
  std::size_t mc_samples = 30;
};

struct DropoutModel
{
  Standardizer inputs;
  Mlp net;
  Vector params;
  double dropout = 0.1;
  std::size_t mc_samples = 30;
};

struct EnsembleModel
{
  Standardizer inputs;
  Mlp net;
  std::vector<Vector> members;
};

class TrainedSurrogate
{
public:
  using Model = std::variant<ForestModel, GpModel, DeepKernelModel, BnnModel, DropoutModel, EnsembleModel>;

  TrainedSurrogate(SurrogateKind kind, Model model, Eigen::Index input_dim, double y_mean, double y_scale,
                   std::uint64_t predict_seed)
    : kind_(kind), model_(std::make_shared<const Model>(std::move(model))), input_dim_(input_dim),
      y_mean_(y_mean), y_scale_(y_scale), predict_seed_(predict_seed)
  {
  }

  SurrogateKind kind() const noexcept { return kind_; }
  Eigen::Index input_dim() const noexcept { return input_dim_; }
  const Model& model() const noexcept { return *model_; }

  PosteriorPrediction predict(const Matrix& X) const
  {
    if (X.cols() != input_dim_)
      throw ShapeError("surrogate trained on dimension " + std::to_string(input_dim_) + ", queried with " +
                       std::to_string(X.cols()));
    PosteriorPrediction p = std::visit([&](const auto& m) { return predict_scaled(m, X); }, *model_);
    p.mean = p.mean.array() * y_scale_ + y_mean_;
    p.std *= y_scale_;
    p.validate();
    return p;
  }

private:
  PosteriorPrediction predict_scaled(const ForestModel& m, const Matrix& X) const { return m.forest.predict(X); }

  PosteriorPrediction predict_scaled(const GpModel& m, const Matrix& X) const
  {
    return m.posterior.predict(m.inputs.apply(X));
  }

  PosteriorPrediction predict_scaled(const DeepKernelModel& m, const Matrix& X) const
  {
    return m.posterior.predict(m.net.forward(m.params, m.inputs.apply(X)));
  }

  // Each Monte-Carlo pass samples one network (weights or dropout masks) and
  // applies it to every candidate, so predictions do not depend on row order.
  template <typename Pass>
  static PosteriorPrediction moments_over_passes(Eigen::Index rows, std::size_t passes, Pass&& pass)
  {
    Matrix outs(rows, static_cast<Eigen::Index>(passes));
    for (std::size_t k = 0; k < passes; ++k) outs.col(static_cast<Eigen::Index>(k)) = pass(k);
    PosteriorPrediction p;
    p.mean = outs.rowwise().mean();
    p.std = ((outs.colwise() - p.mean).array().square().rowwise().sum() / static_cast<double>(passes)).sqrt();
    return p;
  }

  PosteriorPrediction predict_scaled(const BnnModel& m, const Matrix& X) const
  {
    const Matrix Xs = m.inputs.apply(X);
    std::mt19937_64 rng(predict_seed_);
    return moments_over_passes(X.rows(), m.mc_samples, [&](std::size_t) -> Vector {
      return m.bnn.net.forward(m.bnn.sample(rng), Xs).col(0);
    });
  }

  PosteriorPrediction predict_scaled(const DropoutModel& m, const Matrix& X) const
  {
    const Matrix Xs = m.inputs.apply(X);
    std::mt19937_64 rng(predict_seed_);
    return moments_over_passes(X.rows(), m.mc_samples, [&](std::size_t) -> Vector {
      if (m.dropout <= 0.0) return m.net.forward(m.params, Xs).col(0);
      auto masks = m.net.sample_masks(m.dropout, 1, rng);
      return m.net.forward(m.params, Xs, nullptr, &masks).col(0);
    });
  }

  PosteriorPrediction predict_scaled(const EnsembleModel& m, const Matrix& X) const
  {
    const Matrix Xs = m.inputs.apply(X);
    return moments_over_passes(X.rows(), m.members.size(),
                               [&](std::size_t k) -> Vector { return m.net.forward(m.members[k], Xs).col(0); });
  }

  SurrogateKind kind_;
  std::shared_ptr<const Model> model_;
  Eigen::Index input_dim_ = 0;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  std::uint64_t predict_seed_ = 0;
};

namespace detail {

inline std::vector<std::size_t> all_rows(Eigen::Index n)
{
  std::vector<std::size_t> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

inline Vector gp_log_params(const GpLogHyper& h)
{
  Vector p(3);
  p << h.log_lengthscale, h.log_signal, h.log_noise;
  return p;
}

inline GpLogHyper gp_log_hyper(const Eigen::Ref<const Vector>& p)
{
  return {p(0), p(1), p(2)};
}

} // namespace detail

// Fits one surrogate. Deterministic given (spec, X, y, rng_seed).
inline TrainedSurrogate train(const SurrogateSpec& spec, const Matrix& X, const Vector& y, std::uint64_t rng_seed)
{
  if (X.rows() != y.size()) throw ShapeError("training inputs and targets differ in length");
  if (X.rows() < 2) throw SizeError("training needs at least 2 points");
  if (!y.allFinite()) throw TrainingError("non-finite training target");

  const double y_mean = y.mean();
  double y_scale = std::sqrt((y.array() - y_mean).square().mean());
  if (!(y_scale > 1e-12)) y_scale = 1.0;
  const Vector yz = (y.array() - y_mean) / y_scale;
  const auto rows = detail::all_rows(X.rows());
  const std::uint64_t predict_seed = derive_seed(rng_seed, 0x9d1c7);
  std::mt19937_64 rng(derive_seed(rng_seed, 0x7a1));

  switch (spec.kind) {
    case SurrogateKind::random_forest: {
      auto forest = RandomForest::fit(X, y, spec.n_estimators, spec.max_depth, rng_seed);
      return TrainedSurrogate(spec.kind, ForestModel{std::move(forest)}, X.cols(), 0.0, 1.0, predict_seed);
    }
    case SurrogateKind::gp: {
      auto inputs = Standardizer::fit(X, rows);
      Matrix Xs = inputs.apply(X);
      GpLogHyper init{std::log(median_distance(Xs)), 0.0, std::log(0.1)};
      auto state = OptimizerState::init(detail::gp_log_params(init), spec.learning_rate);
      for (std::size_t it = 0; it < spec.gp_iterations; ++it) {
        const auto g = gp_neg_mll(spec.kernel, Xs, yz, detail::gp_log_hyper(state.gradient_point()), false);
        Vector grad(3);
        grad << g.d_log_lengthscale, g.d_log_signal, g.d_log_noise;
        if (!grad.allFinite()) throw TrainingError("non-finite GP gradient at iteration " + std::to_string(it));
        schedule_free_step_inplace(state, grad);
      }
      auto posterior = GpPosterior::fit(spec.kernel, std::move(Xs), yz, detail::gp_log_hyper(state.averaged()).natural());
      return TrainedSurrogate(spec.kind, GpModel{std::move(inputs), std::move(posterior)}, X.cols(), y_mean,
                              y_scale, predict_seed);
    }
    case SurrogateKind::deep_kernel_gp: {
      auto inputs = Standardizer::fit(X, rows);
      const Matrix Xs = inputs.apply(X);
      auto net = Mlp::three_layer(X.cols(), static_cast<Eigen::Index>(spec.hidden_dim),
                                  static_cast<Eigen::Index>(spec.feature_dim));
      const Eigen::Index P = net.n_params();
      Vector init(P + 3);
      init.head(P) = net.init_params(rng);
      const Matrix phi0 = net.forward(init.head(P), Xs);
      init.tail(3) = detail::gp_log_params({std::log(median_distance(phi0)), 0.0, std::log(0.1)});
      auto state = OptimizerState::init(std::move(init), spec.learning_rate);
      Mlp::Cache cache;
      for (std::size_t it = 0; it < spec.gp_iterations; ++it) {
        const Vector p = state.gradient_point();
        const Vector w = p.head(P);
        const Matrix phi = net.forward(w, Xs, &cache);
        if (!phi.allFinite()) throw TrainingError("non-finite features at iteration " + std::to_string(it));
        const auto g = gp_neg_mll(spec.kernel, phi, yz, detail::gp_log_hyper(p.tail(3)), true);
        Vector grad(P + 3);
        grad.head(P) = net.backward(w, cache, g.d_inputs);
        grad.tail(3) << g.d_log_lengthscale, g.d_log_signal, g.d_log_noise;
        if (!grad.allFinite()) throw TrainingError("non-finite gradient at iteration " + std::to_string(it));
        schedule_free_step_inplace(state, grad);
      }
      Vector params = state.averaged().head(P);
      Matrix phi = net.forward(params, Xs);
      auto posterior = GpPosterior::fit(spec.kernel, std::move(phi), yz, detail::gp_log_hyper(state.averaged().tail(3)).natural());
      return TrainedSurrogate(spec.kind, DeepKernelModel{std::move(inputs), std::move(net), std::move(params), std::move(posterior)},
                              X.cols(), y_mean, y_scale, predict_seed);
    }
    case SurrogateKind::bnn: {
      auto inputs = Standardizer::fit(X, rows);
      const Matrix Xs = inputs.apply(X);
      auto net = Mlp::three_layer(X.cols(), static_cast<Eigen::Index>(spec.hidden_dim), 1);
      NetTrainOptions opt{spec.epochs, spec.batch_size, spec.learning_rate, 0.0};
      auto bnn = train_bnn(net, Xs, yz, opt, spec.kl_weight, rng);
      return TrainedSurrogate(spec.kind, BnnModel{std::move(inputs), std::move(bnn), spec.mc_samples}, X.cols(),
                              y_mean, y_scale, predict_seed);
    }
    case SurrogateKind::dropout_nn: {
      auto inputs = Standardizer::fit(X, rows);
      const Matrix Xs = inputs.apply(X);
      auto net = Mlp::three_layer(X.cols(), static_cast<Eigen::Index>(spec.hidden_dim), 1);
      NetTrainOptions opt{spec.epochs, spec.batch_size, spec.learning_rate, spec.dropout};
      Vector params = train_mlp_mse(net, net.init_params(rng), Xs, yz, opt, rng);
      return TrainedSurrogate(spec.kind, DropoutModel{std::move(inputs), std::move(net), std::move(params), spec.dropout, spec.mc_samples},
                              X.cols(), y_mean, y_scale, predict_seed);
    }
    case SurrogateKind::ensemble_nn: {
      auto inputs = Standardizer::fit(X, rows);
      const Matrix Xs = inputs.apply(X);
      auto net = Mlp::three_layer(X.cols(), static_cast<Eigen::Index>(spec.hidden_dim), 1);
      NetTrainOptions opt{spec.epochs, spec.batch_size, spec.learning_rate, 0.0};
      std::vector<Vector> members;
      for (std::size_t m = 0; m < spec.n_estimators; ++m) {
        std::mt19937_64 member_rng(derive_seed(rng_seed, 0xe45, m));
        members.push_back(train_mlp_mse(net, net.init_params(member_rng), Xs, yz, opt, member_rng));
      }
      return TrainedSurrogate(spec.kind, EnsembleModel{std::move(inputs), std::move(net), std::move(members)}, X.cols(),
                              y_mean, y_scale, predict_seed);
    }
  }
  throw ConfigError("unhandled surrogate kind");
}

inline PosteriorPrediction predict(const TrainedSurrogate& model, const Matrix& X) { return model.predict(X); }

// Grid order: learning rate ascending (outer), kernel RBF then Matern (inner);
// forests by size ascending, then unlimited depth before the depth cap. The
// first strict minimum therefore prefers smaller learning rates, then RBF.
inline std::vector<SurrogateSpec> hyperparameter_grid(SurrogateKind kind)
{
  std::vector<SurrogateSpec> grid;
  auto base = SurrogateSpec::defaults(kind);
  if (kind == SurrogateKind::random_forest) {
    for (auto n : kForestSizeGrid)
      for (auto depth : {std::optional<std::size_t>{}, std::optional<std::size_t>{kForestDepthCap}}) {
        auto s = base;
        s.n_estimators = n;
        s.max_depth = depth;
        grid.push_back(s);
      }
    return grid;
  }
  for (double lr : kLearningRateGrid) {
    if (base.uses_kernel()) {
      for (auto k : {KernelType::rbf, KernelType::matern52}) {
        auto s = base;
        s.learning_rate = lr;
        s.kernel = k;
        grid.push_back(s);
      }
    } else {
      auto s = base;
      s.learning_rate = lr;
      grid.push_back(s);
    }
  }
  return grid;
}

struct GridSearchResult
{
  SurrogateSpec spec;
  double test_rmse = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_evaluated = 0;
  std::size_t n_failed = 0;
};

inline double rmse(const Vector& a, const Vector& b)
{
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

// Trains each candidate on the tuning-train rows and scores RMSE on the
// tuning-test rows. A singleton grid is returned without training.
inline GridSearchResult grid_search(const std::vector<SurrogateSpec>& grid, const Landscape& landscape,
                                    const SplitPlan& split, const EncodingMatrix& encoding, std::uint64_t seed = 0)
{
  if (grid.empty()) throw SearchError("empty hyperparameter grid");
  if (grid.size() == 1) return {grid.front(), std::numeric_limits<double>::quiet_NaN(), 0, 0};
  if (split.hyperparam_train.size() < 2 || split.hyperparam_test.empty())
    throw SearchError("grid search needs nonempty tuning train/test sets");

  const Matrix Xtr = gather_rows(encoding.vectors, split.hyperparam_train);
  const Matrix Xte = gather_rows(encoding.vectors, split.hyperparam_test);
  Vector ytr(static_cast<Eigen::Index>(split.hyperparam_train.size()));
  Vector yte(static_cast<Eigen::Index>(split.hyperparam_test.size()));
  for (std::size_t i = 0; i < split.hyperparam_train.size(); ++i)
    ytr(static_cast<Eigen::Index>(i)) = landscape.norm_fitness()[split.hyperparam_train[i]];
  for (std::size_t i = 0; i < split.hyperparam_test.size(); ++i)
    yte(static_cast<Eigen::Index>(i)) = landscape.norm_fitness()[split.hyperparam_test[i]];

  GridSearchResult best;
  best.test_rmse = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& spec : grid) {
    try {
      const auto model = train(spec, Xtr, ytr, seed);
      const double score = rmse(model.predict(Xte).mean, yte);
      ++best.n_evaluated;
      if (std::isfinite(score) && score < best.test_rmse) {
        best.test_rmse = score;
        best.spec = spec;
        found = true;
      }
    } catch (const Error& e) {
      ++best.n_evaluated;
      ++best.n_failed;
      log_warning("grid point " + to_string(spec.kind) + " [" + spec.tag() + "] failed: " + e.what());
    }
  }
  if (!found) throw SearchError("all " + std::to_string(grid.size()) + " grid points failed for " + to_string(grid.front().kind));
  return best;
}

inline GridSearchResult grid_search(SurrogateKind kind, const Landscape& landscape, const SplitPlan& split,
                                    const EncodingMatrix& encoding, std::uint64_t seed = 0)
{
  return grid_search(hyperparameter_grid(kind), landscape, split, encoding, seed);
}

} // namespace riskbo
