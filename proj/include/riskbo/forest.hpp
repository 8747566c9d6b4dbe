#pragma once

// Bootstrap-aggregated CART regression trees (variance-reduction splits over
// all features). Uncertainty is the spread of per-tree predictions.

#include "riskbo/posterior.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <optional>
#include <random>

namespace riskbo {

class RegressionTree
{
public:
  struct Node
  {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  // Fits on the multiset `samples` of row indices.
  static RegressionTree fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::size_t> samples,
                            std::optional<std::size_t> max_depth, std::mt19937_64& rng)
  {
    RegressionTree tree;
    std::vector<Eigen::Index> features(static_cast<std::size_t>(X.cols()));
    std::iota(features.begin(), features.end(), 0);
    tree.grow(X, y, samples, 0, max_depth, features, rng);
    return tree;
  }

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const
  {
    int n = 0;
    while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& node = nodes_[static_cast<std::size_t>(n)];
      n = x(node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(n)].value;
  }

  std::size_t n_nodes() const noexcept { return nodes_.size(); }
  std::size_t depth() const { return depth_of(0); }

private:
  std::size_t depth_of(int n) const
  {
    const auto& node = nodes_[static_cast<std::size_t>(n)];
    if (node.feature < 0) return 0;
    return 1 + std::max(depth_of(node.left), depth_of(node.right));
  }

  int grow(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::size_t>& samples,
           std::size_t depth, std::optional<std::size_t> max_depth, std::vector<Eigen::Index>& features,
           std::mt19937_64& rng)
  {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const double m = static_cast<double>(samples.size());
    double sum = 0.0, sumsq = 0.0;
    for (auto s : samples) {
      sum += y(static_cast<Eigen::Index>(s));
      sumsq += y(static_cast<Eigen::Index>(s)) * y(static_cast<Eigen::Index>(s));
    }
    nodes_[static_cast<std::size_t>(id)].value = sum / m;
    const double node_sse = sumsq - sum * sum / m;
    if (samples.size() < 2 || (max_depth && depth >= *max_depth) || node_sse <= 1e-14 * std::max(1.0, sumsq))
      return id;

    std::shuffle(features.begin(), features.end(), rng);
    double best_gain = 1e-12 * std::max(1.0, node_sse);
    Eigen::Index best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, double>> col(samples.size());
    for (auto f : features) {
      double lo = X(static_cast<Eigen::Index>(samples[0]), f), hi = lo;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double v = X(static_cast<Eigen::Index>(samples[i]), f);
        col[i] = {v, y(static_cast<Eigen::Index>(samples[i]))};
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(hi > lo)) continue;
      std::sort(col.begin(), col.end());
      double ls = 0.0, lss = 0.0;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        ls += col[i].second;
        lss += col[i].second * col[i].second;
        if (col[i].first == col[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1), nr = m - nl;
        const double rs = sum - ls, rss = sumsq - lss;
        const double sse = (lss - ls * ls / nl) + (rss - rs * rs / nr);
        const double gain = node_sse - sse;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (col[i].first + col[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto s : samples)
      (X(static_cast<Eigen::Index>(s), best_feature) <= best_threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(X, y, left, depth + 1, max_depth, features, rng);
    const int r = grow(X, y, right, depth + 1, max_depth, features, rng);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(best_feature);
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::vector<Node> nodes_;
};

class RandomForest
{
public:
  // Tree t uses sub-seed derive_seed(seed, t), so the forest does not depend
  // on fitting order.
  static RandomForest fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t n_estimators,
                          std::optional<std::size_t> max_depth, std::uint64_t seed)
  {
    if (X.rows() != y.size()) throw ShapeError("forest inputs and targets differ in length");
    if (X.rows() < 1 || n_estimators < 1) throw SizeError("forest needs data and at least one tree");
    RandomForest rf;
    rf.dim_ = X.cols();
    const auto n = static_cast<std::size_t>(X.rows());
    rf.trees_.reserve(n_estimators);
    for (std::size_t t = 0; t < n_estimators; ++t) {
      std::mt19937_64 rng(derive_seed(seed, t));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<std::size_t> boot(n);
      for (auto& b : boot) b = pick(rng);
      rf.trees_.push_back(RegressionTree::fit(X, y, std::move(boot), max_depth, rng));
    }
    return rf;
  }

  // Per-tree predictions, one column per tree.
  Eigen::MatrixXd tree_predictions(const Eigen::MatrixXd& Xs) const
  {
    if (Xs.cols() != dim_)
      throw ShapeError("forest trained on dimension " + std::to_string(dim_) + ", queried with " +
                       std::to_string(Xs.cols()));
    Eigen::MatrixXd out(Xs.rows(), static_cast<Eigen::Index>(trees_.size()));
    for (std::size_t t = 0; t < trees_.size(); ++t)
      for (Eigen::Index i = 0; i < Xs.rows(); ++i) out(i, static_cast<Eigen::Index>(t)) = trees_[t].predict(Xs.row(i));
    return out;
  }

  PosteriorPrediction predict(const Eigen::MatrixXd& Xs) const
  {
    const Eigen::MatrixXd P = tree_predictions(Xs);
    PosteriorPrediction out;
    out.mean = P.rowwise().mean();
    out.std = ((P.colwise() - out.mean).array().square().rowwise().sum() / static_cast<double>(P.cols())).sqrt();
    return out;
  }

  std::size_t n_trees() const noexcept { return trees_.size(); }
  const RegressionTree& tree(std::size_t t) const { return trees_[t]; }
  Eigen::Index input_dim() const noexcept { return dim_; }

private:
  std::vector<RegressionTree> trees_;
  Eigen::Index dim_ = 0;
};

} // namespace riskbo
