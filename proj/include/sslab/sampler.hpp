#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sslab/dataset.hpp"
#include "sslab/rng.hpp"

namespace sslab {

enum class SamplerKind {
  RandomWithReplacement,
  RandomWithoutReplacement,
  Cyclic,
  Systematic,
};

std::string_view to_string(SamplerKind kind) noexcept;
/// Accepts the CLI names rr, rwo, cyclic, systematic.
std::optional<SamplerKind> parse_sampler_kind(std::string_view name) noexcept;

/// True for the kinds whose epoch visits every row exactly once (Systematic only with stride 1).
bool partitions_epoch(SamplerKind kind, std::size_t stride) noexcept;

struct SamplerSpec {
  SamplerKind kind = SamplerKind::Cyclic;
  std::size_t batch_size = 1;
  std::size_t stride = 1;  // Systematic only
  std::uint64_t seed = 0;
};

/// Per-epoch mini-batch generator.
///
/// An epoch always has m = ceil(l / b) batches; every batch holds b ids except possibly the
/// last, which holds l - (m - 1) b. The plan for epoch e is drawn from Rng(seed, e), so batch
/// sequences depend only on (spec, l, epoch).
///
///  - Cyclic: batch j is [j b, min((j + 1) b, l)), the same every epoch.
///  - Systematic: the batch start ids {0, b, 2b, ...} are shuffled once per epoch and consumed
///    in order; a batch is the run start, start + k, ... up to the batch length of that start
///    (ids wrap modulo l when k > 1).
///  - RandomWithoutReplacement: one shuffle of {0..l-1} per epoch, consumed in chunks of b.
///  - RandomWithReplacement: iid uniform ids; repeats allowed within and across batches.
class Sampler {
 public:
  Sampler(const SamplerSpec &spec, std::size_t rows);

  const SamplerSpec &spec() const noexcept { return spec_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t batches_per_epoch() const noexcept { return batches_; }
  std::size_t cursor() const noexcept { return cursor_; }
  std::uint64_t epoch() const noexcept { return epoch_; }
  bool exhausted() const noexcept { return cursor_ >= batches_; }

  /// Size of batch j (0-based) in an epoch.
  std::size_t batch_length(std::size_t j) const noexcept;

  /// Strategy-dependent plan of the current epoch: the row permutation (rwo), the batch start
  /// permutation (systematic), empty otherwise.
  std::span<const row_id> epoch_plan() const noexcept { return plan_; }

  /// Throws epoch_exhausted once all batches of the epoch have been produced.
  std::vector<row_id> next_batch();
  void next_batch(std::vector<row_id> &out);

  /// Starts the next epoch: cursor 0, epoch counter + 1, fresh plan.
  void epoch_reset();

 private:
  void draw_plan();

  SamplerSpec spec_;
  std::size_t rows_;
  std::size_t batches_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<row_id> plan_;
  Rng rng_;
};

}  // namespace sslab
