#pragma once

#include <stdexcept>
#include <string>

namespace sslab {

// Exception families map onto the CLI exit codes: config 1, io 2, numerical 3.
// Data-format problems (parse, label, corruption) are reported as io errors.

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed LIBSVM input. Carries the 1-based line number of the offending line.
class parse_error : public io_error {
 public:
  parse_error(std::size_t line, const std::string &what)
      : io_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class label_error : public parse_error {
 public:
  using parse_error::parse_error;
};

class format_error : public parse_error {
 public:
  using parse_error::parse_error;
};

/// Row bytes or store structure do not decode consistently.
class corruption_error : public io_error {
 public:
  using io_error::io_error;
};

/// Sampler has yielded every batch of the current epoch.
class epoch_exhausted : public std::logic_error {
 public:
  epoch_exhausted() : std::logic_error("epoch exhausted; call epoch_reset") {}
};

/// Solver call that violates the method's contract (missing snapshot, wrong method).
class contract_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sslab
