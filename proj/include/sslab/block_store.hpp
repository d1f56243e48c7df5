#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sslab/dataset.hpp"

namespace sslab {

/// Where one encoded row lives inside the store's data region.
struct RowLocation {
  std::uint64_t block = 0;
  std::uint32_t offset = 0;  // byte offset inside `block`
  std::uint32_t length = 0;  // encoded row bytes

  friend bool operator==(const RowLocation &, const RowLocation &) = default;
};

struct AccessTimings {
  std::uint64_t bytes_read = 0;
  std::uint64_t blocks_touched = 0;
  std::uint64_t elapsed_ns = 0;

  AccessTimings &operator+=(const AccessTimings &o) noexcept {
    bytes_read += o.bytes_read;
    blocks_touched += o.blocks_touched;
    elapsed_ns += o.elapsed_ns;
    return *this;
  }
};

struct BatchRead {
  std::vector<SparseExample> rows;
  AccessTimings timings;
};

// File layout (all integers little-endian):
//   [0, 64)   header: "MBL1" | u32 version | u64 l | u64 n_features | u32 block_size
//                     | u64 index_offset | zero padding
//   [64, index_offset)  data blocks, block b at 64 + b * block_size
//   [index_offset, +16 l)  row index: per row u64 block | u32 offset | u32 length
inline constexpr char store_magic[4] = {'M', 'B', 'L', '1'};
inline constexpr std::uint32_t store_version = 1;
inline constexpr std::uint64_t store_header_bytes = 64;
inline constexpr std::uint64_t row_index_entry_bytes = 16;
inline constexpr std::uint32_t default_block_size = 65536;

/// Read-only handle to an on-disk block store. Reads use pread on a shared descriptor,
/// so const member functions may be called from several threads.
class BlockStore {
 public:
  static BlockStore open(const std::string &path);

  BlockStore(BlockStore &&other) noexcept;
  BlockStore &operator=(BlockStore &&other) noexcept;
  BlockStore(const BlockStore &) = delete;
  BlockStore &operator=(const BlockStore &) = delete;
  ~BlockStore();

  const std::string &path() const noexcept { return path_; }
  std::size_t size() const noexcept { return index_.size(); }
  std::size_t n_features() const noexcept { return n_features_; }
  std::uint32_t block_size() const noexcept { return block_size_; }
  std::uint64_t block_count() const noexcept { return n_blocks_; }
  std::span<const RowLocation> row_index() const noexcept { return index_; }

  /// Rows come back in request order. Every block needed by the batch is read once;
  /// runs of adjacent blocks are fetched with a single ranged read.
  BatchRead read_batch(std::span<const row_id> indices) const;

  /// Number of distinct blocks read_batch would touch, from the row index alone.
  std::uint64_t blocks_for_batch(std::span<const row_id> indices) const;

  /// Loads every row into memory (untimed).
  Dataset read_all() const;

  /// Asks the OS to evict this file from the page cache. Returns false where unsupported.
  bool drop_cache_hint() const noexcept;

 private:
  BlockStore() = default;

  std::uint64_t first_block(row_id i) const noexcept { return index_[i].block; }
  std::uint64_t last_block(row_id i) const noexcept;

  std::string path_;
  int fd_ = -1;
  std::size_t n_features_ = 0;
  std::uint32_t block_size_ = 0;
  std::uint64_t n_blocks_ = 0;
  std::vector<RowLocation> index_;
};

/// Rows are packed back to back in dataset order. A row that does not fit in the rest of
/// the current block starts the next block; a row larger than a block starts a fresh block
/// and occupies whole consecutive blocks.
BlockStore write_block_store(const Dataset &data, const std::string &path,
                             std::uint32_t block_size = default_block_size);

}  // namespace sslab
