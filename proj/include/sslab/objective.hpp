#pragma once

#include <cmath>
#include <span>

#include <Eigen/Core>

#include "sslab/dataset.hpp"

namespace sslab {

using Vector = Eigen::VectorXd;

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) noexcept {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// 1 / (1 + exp(-t)) without overflow.
inline double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double sparse_dot(const SparseExample &ex, const Vector &w) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < ex.nnz(); ++k) s += ex.values[k] * w[ex.indices[k]];
  return s;
}

/// out += scale * x
inline void add_scaled(Vector &out, const SparseExample &ex, double scale) noexcept {
  for (std::size_t k = 0; k < ex.nnz(); ++k) out[ex.indices[k]] += scale * ex.values[k];
}

/// Logistic loss of one row.
inline double example_loss(const SparseExample &ex, const Vector &w) noexcept {
  return softplus(-ex.label * sparse_dot(ex, w));
}

/// Scalar s with d/dw loss(x, y; w) = s * x, i.e. s = -y sigmoid(-y w.x).
inline double example_residual(const SparseExample &ex, const Vector &w) noexcept {
  return -ex.label * sigmoid(-ex.label * sparse_dot(ex, w));
}

struct CurvatureConstants {
  double lipschitz = 0.0;
  double strong_convexity = 0.0;
};

// Row-span forms of the subproblem over a mini-batch:
//   f_B(w) = mean_{i in B} log(1 + exp(-y_i w.x_i)) + C/2 |w|^2
double batch_value(std::span<const SparseExample> rows, const Vector &w, double C);
/// Mean of per-row gradients, each carrying C w. Throws on an empty batch.
Vector batch_gradient(std::span<const SparseExample> rows, const Vector &w, double C);
void batch_gradient(std::span<const SparseExample> rows, const Vector &w, double C, Vector &out);

/// L2-regularized logistic ERM over a dataset. The regularizer is folded into every
/// per-example term, so means over any subset carry exactly one C w.
class Objective {
 public:
  Objective(const Dataset &data, double C);

  const Dataset &data() const noexcept { return *data_; }
  double C() const noexcept { return C_; }
  std::size_t dim() const noexcept { return data_->n_features(); }
  std::size_t size() const noexcept { return data_->size(); }

  double value(const Vector &w) const;
  double value(const Vector &w, std::span<const row_id> subset) const;

  Vector example_gradient(const Vector &w, row_id i) const;
  Vector batch_gradient(const Vector &w, std::span<const row_id> indices) const;
  Vector full_gradient(const Vector &w) const;

  /// L = max_i |x_i|^2 / 4 + C bounds the Hessian; mu = C.
  CurvatureConstants curvature_constants() const;

 private:
  const Dataset *data_;
  double C_;
};

}  // namespace sslab
