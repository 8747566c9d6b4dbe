#pragma once

#include "riskbo/core.hpp"

#include <Eigen/Dense>

namespace riskbo {

struct PosteriorPrediction
{
  Eigen::VectorXd mean;
  Eigen::VectorXd std; // >= 0

  std::size_t size() const noexcept { return static_cast<std::size_t>(mean.size()); }

  void validate() const
  {
    if (mean.size() != std.size()) throw ShapeError("posterior mean/std length mismatch");
    if (!mean.allFinite() || !std.allFinite()) throw TrainingError("non-finite posterior prediction");
    if ((std.array() < 0.0).any()) throw ShapeError("negative posterior std");
  }
};

} // namespace riskbo
