#include "sslab/objective.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace sslab {

double batch_value(std::span<const SparseExample> rows, const Vector &w, double C) {
  if (rows.empty()) throw std::invalid_argument("objective over an empty batch");
  double loss = 0.0;
  for (const auto &ex : rows) loss += example_loss(ex, w);
  return loss / static_cast<double>(rows.size()) + 0.5 * C * w.squaredNorm();
}

void batch_gradient(std::span<const SparseExample> rows, const Vector &w, double C, Vector &out) {
  if (rows.empty()) throw std::invalid_argument("gradient over an empty batch");
  out.setZero(w.size());
  for (const auto &ex : rows) add_scaled(out, ex, example_residual(ex, w));
  out /= static_cast<double>(rows.size());
  out += C * w;
}

Vector batch_gradient(std::span<const SparseExample> rows, const Vector &w, double C) {
  Vector g;
  batch_gradient(rows, w, C, g);
  return g;
}

Objective::Objective(const Dataset &data, double C) : data_(&data), C_(C) {
  if (!(C >= 0.0) || !std::isfinite(C)) {
    throw std::invalid_argument(fmt::format("regularization C must be finite and >= 0, got {}", C));
  }
}

double Objective::value(const Vector &w) const { return batch_value(data_->examples(), w, C_); }

double Objective::value(const Vector &w, std::span<const row_id> subset) const {
  if (subset.empty()) throw std::invalid_argument("objective over an empty subset");
  double loss = 0.0;
  for (row_id i : subset) loss += example_loss((*data_)[i], w);
  return loss / static_cast<double>(subset.size()) + 0.5 * C_ * w.squaredNorm();
}

Vector Objective::example_gradient(const Vector &w, row_id i) const {
  const SparseExample &ex = (*data_)[i];
  Vector g = C_ * w;
  add_scaled(g, ex, example_residual(ex, w));
  return g;
}

Vector Objective::batch_gradient(const Vector &w, std::span<const row_id> indices) const {
  if (indices.empty()) throw std::invalid_argument("gradient over an empty index list");
  Vector g = Vector::Zero(w.size());
  for (row_id i : indices) {
    const SparseExample &ex = (*data_)[i];
    add_scaled(g, ex, example_residual(ex, w));
  }
  g /= static_cast<double>(indices.size());
  g += C_ * w;
  return g;
}

Vector Objective::full_gradient(const Vector &w) const {
  return sslab::batch_gradient(data_->examples(), w, C_);
}

CurvatureConstants Objective::curvature_constants() const {
  const auto norms = data_->row_sq_norms();
  const double max_sq = *std::max_element(norms.begin(), norms.end());
  return {0.25 * max_sq + C_, C_};
}

}  // namespace sslab
