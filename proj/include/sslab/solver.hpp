#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sslab/objective.hpp"

namespace sslab {

enum class Method { MBSGD, SAG, SAGA, SVRG, SAAG2 };

std::string_view to_string(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;

inline bool uses_table(Method m) noexcept { return m == Method::SAG || m == Method::SAGA; }
inline bool uses_snapshot(Method m) noexcept { return m == Method::SVRG || m == Method::SAAG2; }

struct LineSearchParams {
  double c = 1e-4;       // sufficient-decrease coefficient
  double rho = 0.5;      // shrink factor
  double alpha0 = 1.0;   // first trial
  int max_halvings = 30;
};

struct StepRule {
  enum class Kind { Constant, Backtracking };

  Kind kind = Kind::Constant;
  double alpha = 0.0;  // Constant only
  LineSearchParams ls;

  static StepRule constant(double alpha);
  static StepRule backtracking(const LineSearchParams &params = {});

  /// Throws config_error if parameters are out of range.
  void validate() const;
};

/// A mini-batch as seen by a solver: global row ids and the decoded rows, position-aligned.
struct Batch {
  std::span<const row_id> ids;
  std::span<const SparseExample> rows;

  std::size_t size() const noexcept { return ids.size(); }
};

/// Constant: rule.alpha. Backtracking: the largest alpha0 rho^t, t = 0..max_halvings, with
///   f_B(w - alpha d) <= f_B(w) - c alpha d.g_B
/// on the mini-batch subproblem, or alpha0 rho^max_halvings when no trial qualifies.
/// Non-finite trials are skipped; all trials non-finite throws numerical_error.
/// `batch_grad` may pass a precomputed g_B.
double choose_step(const StepRule &rule, std::span<const SparseExample> rows, const Vector &w,
                   double C, const Vector &direction, const Vector *batch_grad = nullptr);

struct StepInfo {
  double alpha = 0.0;
  double batch_grad_norm = 0.0;  // |g_B(w)| before the step
};

/// Single-step state machine for the five methods.
///
/// SAG/SAGA keep one scalar residual s_i per row (the per-row loss gradient is s_i x_i) and the
/// running aggregate sum_i s_i x_i. SVRG/SAAG2 keep a snapshot point and its full gradient,
/// refreshed by begin_epoch(). SAAG2 shares SVRG's direction and epoch-boundary snapshot.
class Solver {
 public:
  Solver(Method method, const Objective &objective, Vector w0);

  Method method() const noexcept { return method_; }
  const Vector &w() const noexcept { return w_; }
  std::uint64_t step_count() const noexcept { return steps_; }
  std::uint64_t epoch_count() const noexcept { return epochs_; }

  /// Epoch boundary hook: takes a snapshot for SVRG/SAAG2, then bumps the epoch counter.
  void begin_epoch();

  /// SVRG/SAAG2 only; contract_error for other methods.
  void take_snapshot();
  bool has_snapshot() const noexcept { return snapshot_w_.has_value(); }
  const Vector &snapshot_w() const;
  const Vector &snapshot_full_grad() const;

  std::span<const double> residual_table() const noexcept { return table_; }
  const std::vector<bool> &table_initialized() const noexcept { return initialized_; }
  const Vector &aggregate() const noexcept { return aggregate_; }
  /// Recomputes the aggregate from the scalar table.
  void refresh_aggregate();

  /// The update direction d (w+ = w - alpha d) at the current state; no state change.
  Vector direction(const Batch &batch) const;

  StepInfo step(const Batch &batch, const StepRule &rule);

  /// Number of table entry replacements after which the aggregate is recomputed.
  static constexpr std::uint64_t refresh_interval = 1'000'000;

 private:
  struct Pending {
    Vector direction;
    Vector batch_grad;
    std::vector<double> fresh;  // s_i at w per batch position (table methods)
  };
  Pending prepare(const Batch &batch) const;
  void require_snapshot() const;

  Method method_;
  const Objective *objective_;
  Vector w_;
  std::uint64_t steps_ = 0;
  std::uint64_t epochs_ = 0;

  std::vector<double> table_;
  std::vector<bool> initialized_;
  Vector aggregate_;
  std::uint64_t replacements_since_refresh_ = 0;
  mutable std::vector<std::uint64_t> seen_stamp_;
  mutable std::uint64_t stamp_ = 0;

  std::optional<Vector> snapshot_w_;
  Vector snapshot_grad_;
};

}  // namespace sslab
