#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sslab/block_store.hpp"
#include "sslab/dataset.hpp"
#include "sslab/sampler.hpp"
#include "sslab/solver.hpp"

namespace sslab {

enum class DataFormat { Libsvm, BlockStore };

enum class StepKind { Constant, LineSearch };

struct RunConfig {
  std::string data_path;
  DataFormat format = DataFormat::Libsvm;
  std::string label_map;                  // LabelMap::parse syntax; empty = none
  std::optional<std::size_t> n_features;  // override for LIBSVM input
  std::string store_path;                 // block store built from LIBSVM input; default data_path + ".mbl"
  std::uint32_t block_size = default_block_size;

  Method method = Method::MBSGD;
  SamplerSpec sampler{SamplerKind::Systematic, 500, 1, 0};
  StepKind step = StepKind::Constant;
  LineSearchParams line_search;
  std::optional<double> C;  // default 1/l
  std::size_t epochs = 30;
  bool preshuffle = false;
  std::optional<double> p_star;  // provided optimum; otherwise estimated
  bool drop_cache_hint = false;
  std::string out_path;

  /// Checks everything that does not need the data. Throws config_error.
  void validate() const;
};

struct MetricsRow {
  std::uint64_t epoch = 0;
  double objective = 0.0;
  double gap = 0.0;
  std::uint64_t cum_wall_ns = 0;
  std::uint64_t cum_access_ns = 0;
  std::uint64_t cum_compute_ns = 0;
  double max_batch_grad_norm = 0.0;
};

struct OptimumEstimate {
  double p_star = 0.0;
  std::string provenance;
  bool converged = true;
  std::uint64_t iterations = 0;
  double grad_norm = 0.0;
};

/// Per-epoch read counters (independent of the clock).
struct EpochAccess {
  std::uint64_t batches = 0;
  std::uint64_t rows_read = 0;
  std::uint64_t blocks_touched = 0;
  std::uint64_t bytes_read = 0;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  std::vector<EpochAccess> access;
  OptimumEstimate optimum;
  double C = 0.0;
  CurvatureConstants curvature;
  double initial_objective = 0.0;
  Vector w;
};

/// Full-batch gradient descent with step 1/L from w = 0 until |grad| <= tol or max_iters.
/// Non-convergence is reported through `converged` and the provenance text.
OptimumEstimate estimate_optimum(const Objective &objective, std::uint64_t max_iters = 100'000,
                                 double tol = 1e-10);

/// Block store plus its in-memory copy; the copy serves full passes (snapshots, epoch-end
/// objective), the store serves every mini-batch read.
struct Workload {
  BlockStore store;
  Dataset data;
};

/// Loads or builds the store named by `config`, applying the label map and preshuffle.
Workload prepare_workload(const RunConfig &config);

double resolve_C(const RunConfig &config, std::size_t rows);

/// Runs epochs 1..p over `workload`. Each inner iteration reads its batch through the store
/// (access timer) and then steps the solver (compute timer). The epoch-end full objective is
/// charged to neither timer. `optimum` overrides config.p_star and skips estimation.
RunResult run_experiment(const Workload &workload, const RunConfig &config,
                         const std::optional<OptimumEstimate> &optimum = std::nullopt);
RunResult run_experiment(const RunConfig &config);

inline constexpr const char *metrics_csv_header =
    "epoch,objective,gap,cum_wall_ns,cum_access_ns,cum_compute_ns,max_batch_grad_norm";

void write_metrics_csv(std::ostream &out, const std::vector<MetricsRow> &rows);
void emit_csv(const std::vector<MetricsRow> &rows, const std::string &path);
std::vector<MetricsRow> read_metrics_csv(std::istream &in);

struct SamplerSummary {
  SamplerKind kind = SamplerKind::Cyclic;
  double final_objective = 0.0;
  std::uint64_t total_wall_ns = 0;
  std::uint64_t total_access_ns = 0;
  std::uint64_t total_compute_ns = 0;
  std::uint64_t blocks_touched = 0;
  double access_ratio_vs_rs = 0.0;  // NaN when no random sampler is in the comparison
  bool timing_valid = true;
};

struct Comparison {
  std::vector<SamplerSummary> summary;
  std::vector<RunResult> runs;
};

/// One run per sampler kind, same seed and same p*. The access ratio divides each run's
/// access time by the first random sampler's (rwo, else rr). With `parallel`, runs execute
/// concurrently and timing columns are marked invalid.
Comparison compare_samplers(const Workload &workload, const RunConfig &base,
                            const std::vector<SamplerKind> &samplers, bool parallel = false);
Comparison compare_samplers(const RunConfig &base, const std::vector<SamplerKind> &samplers,
                            bool parallel = false);

inline constexpr const char *summary_csv_header =
    "sampler,final_objective,total_wall_ns,total_access_ns,total_compute_ns,blocks_touched,"
    "access_ratio_vs_rs,timing_valid";

void write_summary_csv(std::ostream &out, const std::vector<SamplerSummary> &summary);

struct SyntheticSpec {
  std::size_t rows = 1000;
  std::size_t features = 10;
  double density = 1.0;      // probability a feature is present in a row
  double value_scale = 1.0;  // feature values ~ N(0, value_scale^2)
  double label_noise = 0.0;  // std-dev of N(0, .) added to the true margin; 0 = separable
  std::uint64_t seed = 1;
};

/// Labels come from a hidden Gaussian weight vector. Every row has at least one feature.
Dataset make_synthetic(const SyntheticSpec &spec);

}  // namespace sslab
