#pragma once

#include <filesystem>
#include <vector>

#include "neurodecode/tensor.hpp"

namespace neurodecode {

enum class RidgeSolver { kAuto, kPrimal, kDual };

struct RidgeOptions {
  // z-score voxel columns with training statistics before fitting. The
  // penalty then acts on standardized weights; W is stored in raw units.
  bool standardize = true;
  // kAuto picks the dual (N x N) system when voxels outnumber samples.
  RidgeSolver solver = RidgeSolver::kAuto;
};

// Multi-output ridge regression z = x W + b from voxels [V] to features [F].
struct RidgeModel {
  Tensor W;        // [V, F], raw voxel units
  Tensor b;        // [F]
  double alpha = 0.0;
  bool standardized = false;
  Tensor x_mean;   // [V]
  Tensor x_scale;  // [V]; all ones when not standardized

  std::size_t voxels() const { return W.dim(0); }
  std::size_t features() const { return W.dim(1); }
};

// Minimizes ||Z - (XW + b)||^2 + alpha ||W||^2 with b unpenalized, via the
// closed form on mean-centered data. alpha = 0 gives ordinary least squares
// and fails with kSingularSystem when the centered Gram matrix is singular.
RidgeModel fit_ridge(const Tensor& X, const Tensor& Z, double alpha, RidgeOptions options = {});

Tensor predict_features(const RidgeModel& model, const Tensor& X);

struct RegressionMetrics {
  double r_squared = 0.0;  // uniform average over dims with non-zero variance
  double rmse = 0.0;
  std::vector<std::size_t> excluded_dims;
};

// Throws kUndefinedMetric when every target dim is constant; rmse() below
// stays defined in that case.
RegressionMetrics regression_metrics(const Tensor& Z_true, const Tensor& Z_hat);
// Root of the mean squared error over all entries.
double rmse(const Tensor& Z_true, const Tensor& Z_hat);

// A tiny ridge penalty (relative to the Gram trace) that keeps the near-OLS
// baseline solvable when the centered system is rank deficient.
double near_zero_alpha(const Tensor& X, bool standardize = true);

void save_ridge(const RidgeModel& model, const std::filesystem::path& dir);
RidgeModel load_ridge(const std::filesystem::path& dir);

// One-hot ridge classifier over voxels; predicted class = argmax of outputs.
RidgeModel fit_voxel_classifier(const Tensor& X, const std::vector<int>& labels, int num_classes,
                                double alpha);
std::vector<int> classify_voxels(const RidgeModel& model, const Tensor& X);

}  // namespace neurodecode
