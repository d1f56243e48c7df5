#include "sslab/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "sslab/byte_io.hpp"
#include "sslab/error.hpp"

namespace sslab {

double SparseExample::squared_norm() const noexcept {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

void validate_example(const SparseExample &ex, std::size_t n_features) {
  if (ex.indices.size() != ex.values.size()) {
    throw std::invalid_argument("indices and values differ in length");
  }
  if (ex.label != 1.0 && ex.label != -1.0) {
    throw std::invalid_argument(fmt::format("label {} is not +1/-1", ex.label));
  }
  for (std::size_t k = 0; k < ex.indices.size(); ++k) {
    if (ex.indices[k] >= n_features) {
      throw std::invalid_argument(
          fmt::format("feature index {} out of range for {} features", ex.indices[k], n_features));
    }
    if (k > 0 && ex.indices[k] <= ex.indices[k - 1]) {
      throw std::invalid_argument("feature indices not strictly ascending");
    }
  }
}

Dataset::Dataset(std::size_t n_features, std::vector<SparseExample> examples)
    : n_features_(n_features), examples_(std::move(examples)) {
  if (n_features_ == 0) throw std::invalid_argument("dataset needs at least one feature");
  if (examples_.empty()) throw std::invalid_argument("empty dataset");
  row_sq_norms_.reserve(examples_.size());
  for (const auto &ex : examples_) {
    validate_example(ex, n_features_);
    row_sq_norms_.push_back(ex.squared_norm());
  }
}

Dataset Dataset::permuted(std::span<const row_id> order) const {
  if (order.size() != examples_.size()) {
    throw std::invalid_argument("permutation length does not match dataset size");
  }
  std::vector<SparseExample> rows;
  rows.reserve(order.size());
  for (row_id i : order) rows.push_back(examples_.at(i));
  return Dataset(n_features_, std::move(rows));
}

std::optional<double> LabelMap::apply(double raw) const {
  if (auto it = mapping.find(raw); it != mapping.end()) return it->second;
  return fallback;
}

namespace {

double parse_double(std::string_view tok, bool &ok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  ok = ec == std::errc() && p == tok.data() + tok.size() && !tok.empty();
  return v;
}

double parse_binary_label(double target) {
  if (target != 1.0 && target != -1.0) {
    throw std::invalid_argument(fmt::format("label map target {} is not +1/-1", target));
  }
  return target;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

LabelMap LabelMap::parse(std::string_view spec) {
  LabelMap out;
  while (!spec.empty()) {
    const auto comma = spec.find(',');
    const std::string_view entry = trim(spec.substr(0, comma));
    spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
    if (entry.empty()) continue;
    const auto colon = entry.find(':');
    if (colon == std::string_view::npos) {
      throw config_error(fmt::format("label map entry '{}' lacks ':'", entry));
    }
    const auto key = trim(entry.substr(0, colon));
    bool ok = false;
    const double target = parse_double(trim(entry.substr(colon + 1)), ok);
    if (!ok) throw config_error(fmt::format("label map entry '{}' has a bad target", entry));
    try {
      parse_binary_label(target);
    } catch (const std::invalid_argument &e) {
      throw config_error(e.what());
    }
    if (key == "*") {
      out.fallback = target;
      continue;
    }
    const double raw = parse_double(key, ok);
    if (!ok) throw config_error(fmt::format("label map entry '{}' has a bad key", entry));
    out.mapping[raw] = target;
  }
  if (out.mapping.empty() && !out.fallback) throw config_error("empty label map");
  return out;
}

Dataset parse_libsvm(std::istream &in, const ParseOptions &opts) {
  std::vector<SparseExample> rows;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;

    auto next_token = [&rest]() {
      const auto end = rest.find_first_of(" \t");
      std::string_view tok = rest.substr(0, end);
      rest = end == std::string_view::npos ? std::string_view{} : trim(rest.substr(end));
      return tok;
    };

    const std::string_view label_tok = next_token();
    bool ok = false;
    const double raw_label = parse_double(label_tok, ok);
    if (!ok) throw parse_error(line_no, fmt::format("malformed label '{}'", label_tok));

    SparseExample ex;
    if (opts.label_map != nullptr) {
      auto mapped = opts.label_map->apply(raw_label);
      if (!mapped) throw label_error(line_no, fmt::format("label {} is not mapped", raw_label));
      ex.label = *mapped;
    } else if (raw_label == 1.0 || raw_label == -1.0) {
      ex.label = raw_label;
    } else if (raw_label == 0.0) {
      ex.label = -1.0;
    } else {
      throw label_error(line_no, fmt::format("label {} is not binary; pass a label map", raw_label));
    }

    while (!rest.empty()) {
      const std::string_view tok = next_token();
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw parse_error(line_no, fmt::format("malformed feature token '{}'", tok));
      }
      std::uint64_t idx = 0;
      const auto idx_tok = tok.substr(0, colon);
      auto [p, ec] = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
      if (ec != std::errc() || p != idx_tok.data() + idx_tok.size() || idx_tok.empty()) {
        throw parse_error(line_no, fmt::format("malformed feature index in '{}'", tok));
      }
      if (idx == 0 || idx > std::numeric_limits<feature_id>::max()) {
        throw parse_error(line_no, fmt::format("feature index {} out of range (1-based)", idx));
      }
      const double value = parse_double(tok.substr(colon + 1), ok);
      if (!ok) throw parse_error(line_no, fmt::format("malformed feature value in '{}'", tok));
      const auto zero_based = static_cast<feature_id>(idx - 1);
      if (!ex.indices.empty() && zero_based <= ex.indices.back()) {
        throw format_error(line_no, "feature indices not strictly ascending");
      }
      ex.indices.push_back(zero_based);
      ex.values.push_back(value);
      max_index = std::max<std::size_t>(max_index, idx);
    }
    rows.push_back(std::move(ex));
  }
  if (in.bad()) throw io_error("read failure while parsing LIBSVM input");
  if (rows.empty()) throw parse_error(line_no, "empty dataset");

  std::size_t n_features = max_index;
  if (opts.n_features) {
    if (*opts.n_features < max_index) {
      throw format_error(line_no, fmt::format("feature index {} exceeds declared n_features {}",
                                              max_index, *opts.n_features));
    }
    n_features = *opts.n_features;
  }
  // rows with no features at all still need a well-formed dimension
  n_features = std::max<std::size_t>(n_features, 1);
  return Dataset(n_features, std::move(rows));
}

Dataset parse_libsvm(std::string_view text, const ParseOptions &opts) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, opts);
}

Dataset load_libsvm(const std::string &path, const ParseOptions &opts) {
  std::ifstream in(path);
  if (!in) throw io_error(fmt::format("cannot open '{}'", path));
  return parse_libsvm(in, opts);
}

void write_libsvm(std::ostream &out, const Dataset &data) {
  for (const auto &ex : data.examples()) {
    out << (ex.label > 0 ? "+1" : "-1");
    for (std::size_t k = 0; k < ex.nnz(); ++k) {
      out << ' ' << ex.indices[k] + 1 << ':' << fmt::format("{}", ex.values[k]);
    }
    out << '\n';
  }
}

void encode_row(const SparseExample &ex, std::span<std::byte> out) {
  const std::size_t need = encoded_size(ex.nnz());
  if (out.size() < need) throw std::invalid_argument("row buffer too small");
  if (ex.nnz() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("row has too many entries to encode");
  }
  std::byte *p = out.data();
  detail::store_f64(p, ex.label);
  detail::store_le<std::uint32_t>(p + 8, static_cast<std::uint32_t>(ex.nnz()));
  p += row_header_bytes;
  for (std::size_t k = 0; k < ex.nnz(); ++k, p += row_entry_bytes) {
    detail::store_le<std::uint32_t>(p, ex.indices[k]);
    detail::store_f64(p + 4, ex.values[k]);
  }
}

std::vector<std::byte> encode_row(const SparseExample &ex) {
  std::vector<std::byte> out(encoded_size(ex.nnz()));
  encode_row(ex, out);
  return out;
}

SparseExample decode_row(std::span<const std::byte> bytes) {
  if (bytes.size() < row_header_bytes) {
    throw corruption_error(fmt::format("row truncated: {} bytes", bytes.size()));
  }
  SparseExample ex;
  ex.label = detail::load_f64(bytes.data());
  const auto count = detail::load_le<std::uint32_t>(bytes.data() + 8);
  if (bytes.size() != encoded_size(count)) {
    throw corruption_error(
        fmt::format("row length {} does not match entry count {}", bytes.size(), count));
  }
  ex.indices.resize(count);
  ex.values.resize(count);
  const std::byte *p = bytes.data() + row_header_bytes;
  for (std::uint32_t k = 0; k < count; ++k, p += row_entry_bytes) {
    ex.indices[k] = detail::load_le<std::uint32_t>(p);
    ex.values[k] = detail::load_f64(p + 4);
  }
  return ex;
}

}  // namespace sslab
