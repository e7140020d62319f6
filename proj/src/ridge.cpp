#include "neurodecode/ridge.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "neurodecode/tensor_io.hpp"

namespace neurodecode {

namespace fs = std::filesystem;
using nlohmann::json;
using MatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::VectorXd;

namespace {

MatrixXd to_eigen(const Tensor& t) {
  MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.size(); ++i) m.data()[i] = t[i];
  return m;
}

Tensor from_eigen(const MatrixXd& m) {
  std::vector<float> data(static_cast<std::size_t>(m.size()));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(m.data()[i]);
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(data));
}

Tensor from_eigen_vector(const VectorXd& v) {
  const std::size_t n = static_cast<std::size_t>(v.size());
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(v[static_cast<Eigen::Index>(i)]);
  return Tensor({n}, std::move(data));
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.ndim() != 2) throw Error(ErrorCode::kShapeMismatch, std::string(what) + " must be a matrix");
}

struct Standardized {
  MatrixXd Xc;
  VectorXd mean;
  VectorXd scale;
};

Standardized center(const Tensor& X, bool standardize) {
  Standardized s;
  s.Xc = to_eigen(X);
  const auto n = static_cast<double>(s.Xc.rows());
  s.mean = s.Xc.colwise().sum().transpose() / n;
  s.Xc.rowwise() -= s.mean.transpose();
  s.scale = VectorXd::Ones(s.Xc.cols());
  if (standardize) {
    for (Eigen::Index j = 0; j < s.Xc.cols(); ++j) {
      const double sd = std::sqrt(s.Xc.col(j).squaredNorm() / n);
      if (sd > 1e-12) {
        s.scale[j] = sd;
        s.Xc.col(j) /= sd;
      }
    }
  }
  return s;
}

// Solves (G + alpha I) A = B by Cholesky. With alpha == 0 a vanishing pivot
// means the normal equations have no unique solution.
MatrixXd solve_regularized(MatrixXd G, const MatrixXd& B, double alpha, const char* form) {
  G.diagonal().array() += alpha;
  Eigen::LLT<MatrixXd> llt(G);
  bool singular = llt.info() != Eigen::Success;
  if (!singular && alpha == 0.0) {
    const VectorXd d = MatrixXd(llt.matrixL()).diagonal();
    const double lo = d.cwiseAbs().minCoeff(), hi = d.cwiseAbs().maxCoeff();
    singular = !(lo * lo > 1e-12 * hi * hi);
  }
  if (singular) {
    throw Error(ErrorCode::kSingularSystem,
                std::string("the centered ") + form +
                    " Gram matrix is singular; ordinary least squares has no unique solution here, use alpha > 0");
  }
  return llt.solve(B);
}

}  // namespace

RidgeModel fit_ridge(const Tensor& X, const Tensor& Z, double alpha, RidgeOptions options) {
  require_matrix(X, "X");
  require_matrix(Z, "Z");
  if (X.dim(0) != Z.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "X has " + std::to_string(X.dim(0)) + " rows, Z has " +
                                               std::to_string(Z.dim(0)));
  }
  if (X.dim(0) < 2) throw Error(ErrorCode::kInvalidArgument, "ridge fit needs at least 2 samples");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be finite and >= 0");
  }
  if (!X.all_finite() || !Z.all_finite()) throw Error(ErrorCode::kNonFinite, "non-finite training data");

  const Standardized s = center(X, options.standardize);
  MatrixXd Zc = to_eigen(Z);
  const VectorXd z_mean = Zc.colwise().sum().transpose() / double(Zc.rows());
  Zc.rowwise() -= z_mean.transpose();

  const auto n = s.Xc.rows(), v = s.Xc.cols();
  bool dual = options.solver == RidgeSolver::kDual || (options.solver == RidgeSolver::kAuto && v > n);
  MatrixXd W;
  if (dual) {
    const MatrixXd K = s.Xc * s.Xc.transpose();
    W = s.Xc.transpose() * solve_regularized(K, Zc, alpha, "dual");
  } else {
    const MatrixXd G = s.Xc.transpose() * s.Xc;
    W = solve_regularized(G, s.Xc.transpose() * Zc, alpha, "primal");
  }
  // Fold standardization back into raw voxel units.
  for (Eigen::Index j = 0; j < v; ++j) W.row(j) /= s.scale[j];
  const VectorXd b = z_mean - W.transpose() * s.mean;

  RidgeModel m;
  m.W = from_eigen(W);
  m.b = from_eigen_vector(b);
  m.alpha = alpha;
  m.standardized = options.standardize;
  m.x_mean = from_eigen_vector(s.mean);
  m.x_scale = from_eigen_vector(s.scale);
  if (!m.W.all_finite() || !m.b.all_finite()) throw Error(ErrorCode::kNonFinite, "ridge solution is not finite");
  return m;
}

Tensor predict_features(const RidgeModel& model, const Tensor& X) {
  require_matrix(X, "X");
  if (X.dim(1) != model.voxels()) {
    throw Error(ErrorCode::kShapeMismatch, "X has " + std::to_string(X.dim(1)) + " columns, model expects " +
                                               std::to_string(model.voxels()));
  }
  const std::size_t n = X.dim(0), v = model.voxels(), f = model.features();
  Tensor out({n, f});
  std::vector<double> acc(f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < f; ++k) acc[k] = model.b[k];
    for (std::size_t j = 0; j < v; ++j) {
      const double x = X.at(i, j);
      if (x == 0.0) continue;
      const float* w_row = model.W.raw() + j * f;
      for (std::size_t k = 0; k < f; ++k) acc[k] += x * double(w_row[k]);
    }
    for (std::size_t k = 0; k < f; ++k) out.at(i, k) = static_cast<float>(acc[k]);
  }
  return out;
}

double rmse(const Tensor& Z_true, const Tensor& Z_hat) {
  require_dims(Z_hat, Z_true.dims(), "Z_hat");
  double sq = 0.0;
  for (std::size_t i = 0; i < Z_true.size(); ++i) {
    const double e = double(Z_true[i]) - double(Z_hat[i]);
    sq += e * e;
  }
  return std::sqrt(sq / double(Z_true.size()));
}

RegressionMetrics regression_metrics(const Tensor& Z_true, const Tensor& Z_hat) {
  require_matrix(Z_true, "Z_true");
  require_dims(Z_hat, Z_true.dims(), "Z_hat");
  const std::size_t n = Z_true.dim(0), f = Z_true.dim(1);
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "metrics need at least 2 samples");

  RegressionMetrics m;
  double r2_sum = 0.0;
  std::size_t r2_count = 0;
  for (std::size_t k = 0; k < f; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += Z_true.at(i, k);
    mean /= double(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = Z_true.at(i, k);
      const double e = t - double(Z_hat.at(i, k));
      ss_res += e * e;
      ss_tot += (t - mean) * (t - mean);
    }
    if (ss_tot > 0.0) {
      r2_sum += 1.0 - ss_res / ss_tot;
      ++r2_count;
    } else {
      m.excluded_dims.push_back(k);
    }
  }
  if (r2_count == 0) throw Error(ErrorCode::kUndefinedMetric, "every target dim has zero variance; R^2 undefined");
  m.r_squared = r2_sum / double(r2_count);
  m.rmse = rmse(Z_true, Z_hat);
  return m;
}

double near_zero_alpha(const Tensor& X, bool standardize) {
  const Standardized s = center(X, standardize);
  const double trace = s.Xc.squaredNorm();
  const auto rank_bound = std::min(s.Xc.rows(), s.Xc.cols());
  return 1e-6 * trace / double(std::max<Eigen::Index>(rank_bound, 1));
}

void save_ridge(const RidgeModel& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  write_tensor(model.W, dir / "W.dctf");
  write_tensor(model.b, dir / "b.dctf");
  write_tensor(model.x_mean, dir / "x_mean.dctf");
  write_tensor(model.x_scale, dir / "x_scale.dctf");
  json index = {{"alpha", model.alpha},
                {"voxels", model.voxels()},
                {"features", model.features()},
                {"standardized", model.standardized},
                {"tensors", {{"W", "W.dctf"}, {"b", "b.dctf"}, {"x_mean", "x_mean.dctf"}, {"x_scale", "x_scale.dctf"}}}};
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write ridge index in " + dir.string());
  out << index.dump(2) << '\n';
}

RidgeModel load_ridge(const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw Error(ErrorCode::kIo, "missing ridge index in " + dir.string());
  json index;
  try {
    index = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kDecode, e.what());
  }
  RidgeModel m;
  m.W = read_tensor(dir / "W.dctf");
  m.b = read_tensor(dir / "b.dctf");
  m.x_mean = read_tensor(dir / "x_mean.dctf");
  m.x_scale = read_tensor(dir / "x_scale.dctf");
  m.alpha = index.at("alpha").get<double>();
  m.standardized = index.at("standardized").get<bool>();
  require_dims(m.W, {index.at("voxels").get<std::size_t>(), index.at("features").get<std::size_t>()}, "W");
  require_dims(m.b, {m.features()}, "b");
  return m;
}

RidgeModel fit_voxel_classifier(const Tensor& X, const std::vector<int>& labels, int num_classes, double alpha) {
  require_matrix(X, "X");
  if (labels.size() != X.dim(0)) throw Error(ErrorCode::kShapeMismatch, "one label per voxel row required");
  if (num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "classifier needs >= 2 classes");
  Tensor Y({X.dim(0), static_cast<std::size_t>(num_classes)});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error(ErrorCode::kCategoryOutOfRange, "label " + std::to_string(labels[i]));
    }
    Y.at(i, static_cast<std::size_t>(labels[i])) = 1.0f;
  }
  return fit_ridge(X, Y, alpha);
}

std::vector<int> classify_voxels(const RidgeModel& model, const Tensor& X) {
  const Tensor scores = predict_features(model, X);
  std::vector<int> out(scores.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.dim(1); ++k) {
      if (scores.at(i, k) > scores.at(i, best)) best = k;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace neurodecode
