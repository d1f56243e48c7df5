#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sslab {

using row_id = std::uint64_t;
using feature_id = std::uint32_t;

/// One labeled sparse row. Indices are 0-based and strictly ascending; label is +1 or -1.
struct SparseExample {
  std::vector<feature_id> indices;
  std::vector<double> values;
  double label = 1.0;

  std::size_t nnz() const noexcept { return indices.size(); }
  double squared_norm() const noexcept;

  friend bool operator==(const SparseExample &, const SparseExample &) = default;
};

/// Throws std::invalid_argument naming the violated invariant.
void validate_example(const SparseExample &ex, std::size_t n_features);

class Dataset {
 public:
  Dataset(std::size_t n_features, std::vector<SparseExample> examples);

  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t size() const noexcept { return examples_.size(); }

  const SparseExample &operator[](std::size_t i) const { return examples_[i]; }
  std::span<const SparseExample> examples() const noexcept { return examples_; }
  std::span<const double> row_sq_norms() const noexcept { return row_sq_norms_; }

  /// Dataset with rows reordered so that row k of the result is row order[k] of this one.
  Dataset permuted(std::span<const row_id> order) const;

 private:
  std::size_t n_features_;
  std::vector<SparseExample> examples_;
  std::vector<double> row_sq_norms_;
};

/// Raw label -> {+1,-1}. Labels not listed go to `fallback` if set, otherwise they are errors.
struct LabelMap {
  std::map<double, double> mapping;
  std::optional<double> fallback;

  std::optional<double> apply(double raw) const;

  /// Parses "2:+1,*:-1" style specs; `*` is the fallback entry.
  static LabelMap parse(std::string_view spec);
};

struct ParseOptions {
  const LabelMap *label_map = nullptr;
  std::optional<std::size_t> n_features;
};

/// Reads LIBSVM text (`<label> <idx>:<val> ...`, 1-based indices). Blank lines are skipped.
/// Without a label map, labels must be +1/-1; 0/1 labels are accepted with 0 -> -1.
Dataset parse_libsvm(std::istream &in, const ParseOptions &opts = {});
Dataset parse_libsvm(std::string_view text, const ParseOptions &opts = {});
Dataset load_libsvm(const std::string &path, const ParseOptions &opts = {});

void write_libsvm(std::ostream &out, const Dataset &data);

// Row wire format, little-endian:
//   f64 label | u32 count | count x (u32 index, f64 value)
inline constexpr std::size_t row_header_bytes = 12;
inline constexpr std::size_t row_entry_bytes = 12;

constexpr std::size_t encoded_size(std::size_t nnz) noexcept {
  return row_header_bytes + row_entry_bytes * nnz;
}

void encode_row(const SparseExample &ex, std::span<std::byte> out);
std::vector<std::byte> encode_row(const SparseExample &ex);

/// Throws corruption_error unless `bytes` holds exactly one well-formed row.
SparseExample decode_row(std::span<const std::byte> bytes);

}  // namespace sslab
