#include "sslab/solver.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "sslab/error.hpp"

namespace sslab {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::MBSGD: return "mbsgd";
    case Method::SAG: return "sag";
    case Method::SAGA: return "saga";
    case Method::SVRG: return "svrg";
    case Method::SAAG2: return "saag2";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
  for (Method m : {Method::MBSGD, Method::SAG, Method::SAGA, Method::SVRG, Method::SAAG2}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

StepRule StepRule::constant(double alpha) {
  StepRule r;
  r.kind = Kind::Constant;
  r.alpha = alpha;
  r.validate();
  return r;
}

StepRule StepRule::backtracking(const LineSearchParams &params) {
  StepRule r;
  r.kind = Kind::Backtracking;
  r.ls = params;
  r.validate();
  return r;
}

void StepRule::validate() const {
  if (kind == Kind::Constant) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      throw config_error(fmt::format("constant step must be positive, got {}", alpha));
    }
    return;
  }
  if (!(ls.c > 0.0 && ls.c < 1.0)) throw config_error("line search c must lie in (0, 1)");
  if (!(ls.rho > 0.0 && ls.rho < 1.0)) throw config_error("line search rho must lie in (0, 1)");
  if (!(ls.alpha0 > 0.0) || !std::isfinite(ls.alpha0)) {
    throw config_error("line search alpha0 must be positive");
  }
  if (ls.max_halvings < 1) throw config_error("line search needs max_halvings >= 1");
}

double choose_step(const StepRule &rule, std::span<const SparseExample> rows, const Vector &w,
                   double C, const Vector &direction, const Vector *batch_grad) {
  if (rule.kind == StepRule::Kind::Constant) return rule.alpha;
  if (rows.empty()) throw std::invalid_argument("line search over an empty batch");

  const double f0 = batch_value(rows, w, C);
  const double slope = batch_grad ? direction.dot(*batch_grad)
                                  : direction.dot(batch_gradient(rows, w, C));
  if (!std::isfinite(f0) || !std::isfinite(slope)) {
    throw numerical_error("line search started from a non-finite point");
  }

  const auto &p = rule.ls;
  double alpha = p.alpha0;
  bool any_finite = false;
  Vector trial(w.size());
  for (int t = 0; t <= p.max_halvings; ++t) {
    trial = w - alpha * direction;
    const double f = batch_value(rows, trial, C);
    if (std::isfinite(f)) {
      any_finite = true;
      if (f <= f0 - p.c * alpha * slope) return alpha;
    }
    if (t < p.max_halvings) alpha *= p.rho;
  }
  if (!any_finite) throw numerical_error("every line search trial was non-finite");
  return alpha;
}

Solver::Solver(Method method, const Objective &objective, Vector w0)
    : method_(method), objective_(&objective), w_(std::move(w0)) {
  if (static_cast<std::size_t>(w_.size()) != objective.dim()) {
    throw config_error(fmt::format("initial point has dimension {}, data has {} features",
                                   w_.size(), objective.dim()));
  }
  if (!w_.allFinite()) throw config_error("initial point is not finite");
  if (uses_table(method_)) {
    table_.assign(objective.size(), 0.0);
    initialized_.assign(objective.size(), false);
    aggregate_ = Vector::Zero(w_.size());
    seen_stamp_.assign(objective.size(), 0);
  }
}

void Solver::begin_epoch() {
  if (uses_snapshot(method_)) take_snapshot();
  ++epochs_;
}

void Solver::take_snapshot() {
  if (!uses_snapshot(method_)) {
    throw contract_error(fmt::format("{} does not keep a snapshot", to_string(method_)));
  }
  snapshot_w_ = w_;
  snapshot_grad_ = objective_->full_gradient(w_);
}

void Solver::require_snapshot() const {
  if (!snapshot_w_) {
    throw contract_error(fmt::format("{} step before the first snapshot", to_string(method_)));
  }
}

const Vector &Solver::snapshot_w() const {
  require_snapshot();
  return *snapshot_w_;
}

const Vector &Solver::snapshot_full_grad() const {
  require_snapshot();
  return snapshot_grad_;
}

void Solver::refresh_aggregate() {
  if (!uses_table(method_)) return;
  aggregate_.setZero();
  const Dataset &data = objective_->data();
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (initialized_[i]) add_scaled(aggregate_, data[i], table_[i]);
  }
  replacements_since_refresh_ = 0;
}

Solver::Pending Solver::prepare(const Batch &batch) const {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (batch.rows.size() != batch.ids.size()) {
    throw std::invalid_argument("batch ids and rows differ in length");
  }
  const double C = objective_->C();
  const auto b = static_cast<double>(batch.size());
  Pending p;

  switch (method_) {
    case Method::MBSGD:
      batch_gradient(batch.rows, w_, C, p.batch_grad);
      p.direction = p.batch_grad;
      break;

    case Method::SAG:
    case Method::SAGA: {
      const auto l = static_cast<double>(objective_->size());
      p.fresh.resize(batch.size());
      p.batch_grad = Vector::Zero(w_.size());
      Vector correction = Vector::Zero(w_.size());  // sum over positions (s_new - s_old) x_i
      Vector agg_delta = Vector::Zero(w_.size());   // same, once per distinct row
      ++stamp_;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const SparseExample &ex = batch.rows[k];
        const row_id i = batch.ids[k];
        const double s = example_residual(ex, w_);
        p.fresh[k] = s;
        add_scaled(p.batch_grad, ex, s);
        const double delta = s - table_[i];
        add_scaled(correction, ex, delta);
        if (seen_stamp_[i] != stamp_) {
          seen_stamp_[i] = stamp_;
          add_scaled(agg_delta, ex, delta);
        }
      }
      p.batch_grad = p.batch_grad / b + C * w_;
      if (method_ == Method::SAG) {
        p.direction = (aggregate_ + agg_delta) / l + C * w_;
      } else {
        p.direction = correction / b + aggregate_ / l + C * w_;
      }
      break;
    }

    case Method::SVRG:
    case Method::SAAG2: {
      require_snapshot();
      batch_gradient(batch.rows, w_, C, p.batch_grad);
      Vector at_snapshot;
      batch_gradient(batch.rows, *snapshot_w_, C, at_snapshot);
      p.direction = p.batch_grad - at_snapshot + snapshot_grad_;
      break;
    }
  }
  return p;
}

Vector Solver::direction(const Batch &batch) const { return prepare(batch).direction; }

StepInfo Solver::step(const Batch &batch, const StepRule &rule) {
  Pending p = prepare(batch);
  StepInfo info;
  info.batch_grad_norm = p.batch_grad.norm();
  info.alpha = choose_step(rule, batch.rows, w_, objective_->C(), p.direction, &p.batch_grad);

  if (uses_table(method_)) {
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const row_id i = batch.ids[k];
      const double delta = p.fresh[k] - table_[i];
      if (delta != 0.0) add_scaled(aggregate_, batch.rows[k], delta);
      table_[i] = p.fresh[k];
      initialized_[i] = true;
    }
    replacements_since_refresh_ += batch.size();
    if (replacements_since_refresh_ > refresh_interval) refresh_aggregate();
  }

  w_ -= info.alpha * p.direction;
  if (!w_.allFinite()) {
    throw numerical_error(fmt::format("{} iterate became non-finite at step {}",
                                      to_string(method_), steps_ + 1));
  }
  ++steps_;
  return info;
}

}  // namespace sslab
