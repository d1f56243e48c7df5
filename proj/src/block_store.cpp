#include "sslab/block_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "sslab/byte_io.hpp"
#include "sslab/error.hpp"

namespace sslab {

namespace {

std::string errno_text() { return std::strerror(errno); }

void pwrite_all(int fd, const std::byte *data, std::size_t n, std::uint64_t off,
                const std::string &path) {
  while (n > 0) {
    const ssize_t w = ::pwrite(fd, data, n, static_cast<off_t>(off));
    if (w < 0) {
      if (errno == EINTR) continue;
      throw io_error(fmt::format("write to '{}' failed: {}", path, errno_text()));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
    off += static_cast<std::uint64_t>(w);
  }
}

void pread_all(int fd, std::byte *data, std::size_t n, std::uint64_t off,
               const std::string &path) {
  while (n > 0) {
    const ssize_t r = ::pread(fd, data, n, static_cast<off_t>(off));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw io_error(fmt::format("read from '{}' failed: {}", path, errno_text()));
    }
    if (r == 0) throw corruption_error(fmt::format("'{}' is truncated", path));
    data += r;
    n -= static_cast<std::size_t>(r);
    off += static_cast<std::uint64_t>(r);
  }
}

std::uint64_t data_offset(std::uint64_t block, std::uint32_t block_size) {
  return store_header_bytes + block * block_size;
}

class file_guard {
 public:
  explicit file_guard(int fd) : fd_(fd) {}
  ~file_guard() {
    if (fd_ >= 0) ::close(fd_);
  }
  file_guard(const file_guard &) = delete;
  file_guard &operator=(const file_guard &) = delete;
  int get() const noexcept { return fd_; }
  int release() noexcept { return std::exchange(fd_, -1); }

 private:
  int fd_;
};

}  // namespace

BlockStore write_block_store(const Dataset &data, const std::string &path,
                             std::uint32_t block_size) {
  if (block_size < row_header_bytes) {
    throw config_error(fmt::format("block size {} is too small", block_size));
  }
  file_guard fd(::open(path.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0644));
  if (fd.get() < 0) throw io_error(fmt::format("cannot create '{}': {}", path, errno_text()));

  std::vector<RowLocation> index;
  index.reserve(data.size());
  std::vector<std::byte> block(block_size);
  std::uint64_t block_no = 0;
  std::size_t fill = 0;

  auto flush = [&]() {
    std::fill(block.begin() + static_cast<std::ptrdiff_t>(fill), block.end(), std::byte{0});
    pwrite_all(fd.get(), block.data(), block.size(), data_offset(block_no, block_size), path);
    ++block_no;
    fill = 0;
  };

  for (const auto &ex : data.examples()) {
    const std::size_t len = encoded_size(ex.nnz());
    if (len > std::numeric_limits<std::uint32_t>::max()) {
      throw io_error(fmt::format("row of {} bytes exceeds the addressable row size", len));
    }
    if (len <= block_size) {
      if (fill + len > block_size) flush();
      encode_row(ex, std::span<std::byte>(block).subspan(fill, len));
      index.push_back({block_no, static_cast<std::uint32_t>(fill), static_cast<std::uint32_t>(len)});
      fill += len;
      continue;
    }
    // oversize row: fresh block, whole consecutive blocks, padded to a block boundary
    if (fill > 0) flush();
    const std::uint64_t span_blocks = (len + block_size - 1) / block_size;
    std::vector<std::byte> big(span_blocks * block_size, std::byte{0});
    encode_row(ex, big);
    pwrite_all(fd.get(), big.data(), big.size(), data_offset(block_no, block_size), path);
    index.push_back({block_no, 0, static_cast<std::uint32_t>(len)});
    block_no += span_blocks;
  }
  if (fill > 0) flush();

  const std::uint64_t index_offset = data_offset(block_no, block_size);
  std::vector<std::byte> index_bytes(index.size() * row_index_entry_bytes);
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::byte *p = index_bytes.data() + i * row_index_entry_bytes;
    detail::store_le<std::uint64_t>(p, index[i].block);
    detail::store_le<std::uint32_t>(p + 8, index[i].offset);
    detail::store_le<std::uint32_t>(p + 12, index[i].length);
  }
  pwrite_all(fd.get(), index_bytes.data(), index_bytes.size(), index_offset, path);

  std::byte header[store_header_bytes] = {};
  std::memcpy(header, store_magic, 4);
  detail::store_le<std::uint32_t>(header + 4, store_version);
  detail::store_le<std::uint64_t>(header + 8, data.size());
  detail::store_le<std::uint64_t>(header + 16, data.n_features());
  detail::store_le<std::uint32_t>(header + 24, block_size);
  detail::store_le<std::uint64_t>(header + 28, index_offset);
  pwrite_all(fd.get(), header, sizeof header, 0, path);

  if (::fsync(fd.get()) != 0) {
    throw io_error(fmt::format("fsync of '{}' failed: {}", path, errno_text()));
  }
  ::close(fd.release());
  return BlockStore::open(path);
}

BlockStore BlockStore::open(const std::string &path) {
  file_guard fd(::open(path.c_str(), O_RDONLY));
  if (fd.get() < 0) throw io_error(fmt::format("cannot open '{}': {}", path, errno_text()));

  struct stat st {};
  if (::fstat(fd.get(), &st) != 0) {
    throw io_error(fmt::format("cannot stat '{}': {}", path, errno_text()));
  }
  const auto file_size = static_cast<std::uint64_t>(st.st_size);
  if (file_size < store_header_bytes) throw corruption_error(fmt::format("'{}' has no header", path));

  std::byte header[store_header_bytes];
  pread_all(fd.get(), header, sizeof header, 0, path);
  if (std::memcmp(header, store_magic, 4) != 0) {
    throw corruption_error(fmt::format("'{}' is not a block store (bad magic)", path));
  }
  const auto version = detail::load_le<std::uint32_t>(header + 4);
  if (version != store_version) {
    throw corruption_error(fmt::format("'{}' has unsupported version {}", path, version));
  }

  BlockStore s;
  s.path_ = path;
  const auto rows = detail::load_le<std::uint64_t>(header + 8);
  s.n_features_ = detail::load_le<std::uint64_t>(header + 16);
  s.block_size_ = detail::load_le<std::uint32_t>(header + 24);
  const auto index_offset = detail::load_le<std::uint64_t>(header + 28);

  if (s.block_size_ < row_header_bytes || index_offset < store_header_bytes ||
      (index_offset - store_header_bytes) % s.block_size_ != 0 ||
      index_offset + rows * row_index_entry_bytes != file_size) {
    throw corruption_error(fmt::format("'{}' has an inconsistent header", path));
  }
  s.n_blocks_ = (index_offset - store_header_bytes) / s.block_size_;

  std::vector<std::byte> index_bytes(rows * row_index_entry_bytes);
  pread_all(fd.get(), index_bytes.data(), index_bytes.size(), index_offset, path);
  s.index_.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::byte *p = index_bytes.data() + i * row_index_entry_bytes;
    RowLocation &loc = s.index_[i];
    loc.block = detail::load_le<std::uint64_t>(p);
    loc.offset = detail::load_le<std::uint32_t>(p + 8);
    loc.length = detail::load_le<std::uint32_t>(p + 12);
    const std::uint64_t end = data_offset(loc.block, s.block_size_) + loc.offset + loc.length;
    if (loc.block >= s.n_blocks_ || loc.offset >= s.block_size_ || end > index_offset) {
      throw corruption_error(fmt::format("'{}': row {} points outside the data region", path, i));
    }
  }
  s.fd_ = fd.release();
  return s;
}

BlockStore::BlockStore(BlockStore &&other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      n_features_(other.n_features_),
      block_size_(other.block_size_),
      n_blocks_(other.n_blocks_),
      index_(std::move(other.index_)) {}

BlockStore &BlockStore::operator=(BlockStore &&other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
    n_features_ = other.n_features_;
    block_size_ = other.block_size_;
    n_blocks_ = other.n_blocks_;
    index_ = std::move(other.index_);
  }
  return *this;
}

BlockStore::~BlockStore() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t BlockStore::last_block(row_id i) const noexcept {
  const RowLocation &loc = index_[i];
  return loc.block + (std::uint64_t{loc.offset} + loc.length - 1) / block_size_;
}

namespace {

std::vector<std::uint64_t> needed_blocks(std::span<const row_id> indices,
                                         std::span<const RowLocation> index,
                                         std::uint32_t block_size) {
  std::vector<std::uint64_t> blocks;
  blocks.reserve(indices.size());
  for (row_id i : indices) {
    const RowLocation &loc = index[i];
    const std::uint64_t last = loc.block + (std::uint64_t{loc.offset} + loc.length - 1) / block_size;
    for (std::uint64_t b = loc.block; b <= last; ++b) blocks.push_back(b);
  }
  std::sort(blocks.begin(), blocks.end());
  blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
  return blocks;
}

void check_indices(std::span<const row_id> indices, std::size_t rows) {
  for (row_id i : indices) {
    if (i >= rows) {
      throw std::out_of_range(fmt::format("row {} out of range for store of {} rows", i, rows));
    }
  }
}

}  // namespace

std::uint64_t BlockStore::blocks_for_batch(std::span<const row_id> indices) const {
  check_indices(indices, size());
  return needed_blocks(indices, index_, block_size_).size();
}

BatchRead BlockStore::read_batch(std::span<const row_id> indices) const {
  check_indices(indices, size());
  BatchRead out;
  if (indices.empty()) return out;

  const auto t0 = std::chrono::steady_clock::now();
  const auto blocks = needed_blocks(indices, index_, block_size_);

  // one contiguous buffer; block k of `blocks` lands at k * block_size
  std::vector<std::byte> buf(blocks.size() * block_size_);
  std::size_t k = 0;
  while (k < blocks.size()) {
    std::size_t run = 1;
    while (k + run < blocks.size() && blocks[k + run] == blocks[k] + run) ++run;
    pread_all(fd_, buf.data() + k * block_size_, run * block_size_,
              data_offset(blocks[k], block_size_), path_);
    out.timings.bytes_read += run * block_size_;
    k += run;
  }

  out.rows.reserve(indices.size());
  for (row_id i : indices) {
    const RowLocation &loc = index_[i];
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(blocks.begin(), blocks.end(), loc.block) - blocks.begin());
    const std::span<const std::byte> bytes(buf.data() + pos * block_size_ + loc.offset, loc.length);
    out.rows.push_back(decode_row(bytes));
  }
  out.timings.blocks_touched = blocks.size();
  out.timings.elapsed_ns = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
          .count());
  return out;
}

Dataset BlockStore::read_all() const {
  std::vector<SparseExample> rows;
  rows.reserve(size());
  std::vector<std::byte> block(block_size_);
  std::vector<std::byte> big;
  std::uint64_t cached = std::numeric_limits<std::uint64_t>::max();
  for (row_id i = 0; i < size(); ++i) {
    const RowLocation &loc = index_[i];
    if (last_block(i) != loc.block) {
      big.resize(std::uint64_t{loc.offset} + loc.length);
      pread_all(fd_, big.data(), big.size(), data_offset(loc.block, block_size_), path_);
      rows.push_back(decode_row(std::span<const std::byte>(big).subspan(loc.offset, loc.length)));
      continue;
    }
    if (loc.block != cached) {
      pread_all(fd_, block.data(), block.size(), data_offset(loc.block, block_size_), path_);
      cached = loc.block;
    }
    rows.push_back(decode_row(std::span<const std::byte>(block).subspan(loc.offset, loc.length)));
  }
  try {
    return Dataset(n_features_, std::move(rows));
  } catch (const std::invalid_argument &e) {
    throw corruption_error(fmt::format("'{}' holds an invalid row: {}", path_, e.what()));
  }
}

bool BlockStore::drop_cache_hint() const noexcept {
#if defined(POSIX_FADV_DONTNEED)
  return ::posix_fadvise(fd_, 0, 0, POSIX_FADV_DONTNEED) == 0;
#else
  return false;
#endif
}

}  // namespace sslab
