#include "sslab/sampler.hpp"

#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "sslab/error.hpp"

namespace sslab {

std::string_view to_string(SamplerKind kind) noexcept {
  switch (kind) {
    case SamplerKind::RandomWithReplacement: return "rr";
    case SamplerKind::RandomWithoutReplacement: return "rwo";
    case SamplerKind::Cyclic: return "cyclic";
    case SamplerKind::Systematic: return "systematic";
  }
  return "?";
}

std::optional<SamplerKind> parse_sampler_kind(std::string_view name) noexcept {
  if (name == "rr") return SamplerKind::RandomWithReplacement;
  if (name == "rwo" || name == "rs") return SamplerKind::RandomWithoutReplacement;
  if (name == "cyclic" || name == "cs") return SamplerKind::Cyclic;
  if (name == "systematic" || name == "ss") return SamplerKind::Systematic;
  return std::nullopt;
}

bool partitions_epoch(SamplerKind kind, std::size_t stride) noexcept {
  switch (kind) {
    case SamplerKind::RandomWithReplacement: return false;
    case SamplerKind::Systematic: return stride == 1;
    default: return true;
  }
}

Sampler::Sampler(const SamplerSpec &spec, std::size_t rows)
    : spec_(spec), rows_(rows), batches_(0), rng_(spec.seed, 0) {
  if (spec.batch_size == 0) throw config_error("batch size must be positive");
  if (spec.stride == 0) throw config_error("stride must be positive");
  if (rows == 0) throw config_error("sampler needs a nonempty dataset");
  if (spec.batch_size > rows) {
    throw config_error(
        fmt::format("batch size {} exceeds dataset size {}", spec.batch_size, rows));
  }
  batches_ = (rows + spec.batch_size - 1) / spec.batch_size;
  draw_plan();
}

std::size_t Sampler::batch_length(std::size_t j) const noexcept {
  return j + 1 < batches_ ? spec_.batch_size : rows_ - (batches_ - 1) * spec_.batch_size;
}

void Sampler::draw_plan() {
  rng_ = Rng(spec_.seed, epoch_);
  plan_.clear();
  switch (spec_.kind) {
    case SamplerKind::RandomWithoutReplacement:
      plan_.resize(rows_);
      std::iota(plan_.begin(), plan_.end(), row_id{0});
      rng_.shuffle(std::span<row_id>(plan_));
      break;
    case SamplerKind::Systematic:
      plan_.resize(batches_);
      for (std::size_t j = 0; j < batches_; ++j) plan_[j] = j * spec_.batch_size;
      rng_.shuffle(std::span<row_id>(plan_));
      break;
    case SamplerKind::Cyclic:
    case SamplerKind::RandomWithReplacement:
      break;
  }
}

void Sampler::epoch_reset() {
  ++epoch_;
  cursor_ = 0;
  draw_plan();
}

std::vector<row_id> Sampler::next_batch() {
  std::vector<row_id> out;
  next_batch(out);
  return out;
}

void Sampler::next_batch(std::vector<row_id> &out) {
  if (exhausted()) throw epoch_exhausted();
  const std::size_t j = cursor_++;
  const std::size_t b = spec_.batch_size;
  out.clear();

  switch (spec_.kind) {
    case SamplerKind::Cyclic: {
      const std::size_t len = batch_length(j);
      out.resize(len);
      std::iota(out.begin(), out.end(), row_id{j * b});
      break;
    }
    case SamplerKind::Systematic: {
      const row_id start = plan_[j];
      const std::size_t len = batch_length(start / b);
      out.resize(len);
      for (std::size_t t = 0; t < len; ++t) out[t] = (start + t * spec_.stride) % rows_;
      break;
    }
    case SamplerKind::RandomWithoutReplacement: {
      const std::size_t len = batch_length(j);
      out.assign(plan_.begin() + static_cast<std::ptrdiff_t>(j * b),
                 plan_.begin() + static_cast<std::ptrdiff_t>(j * b + len));
      break;
    }
    case SamplerKind::RandomWithReplacement: {
      const std::size_t len = batch_length(j);
      out.resize(len);
      for (auto &id : out) id = rng_.below(rows_);
      break;
    }
  }
}

}  // namespace sslab
