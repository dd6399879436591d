#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hpnet {

/// Operand shapes are incompatible with the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition of an operation was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A binary file did not match its declared layout.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A statistic has no defined value for the given inputs.
class UndefinedResultError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A configuration key is unknown or its value is invalid.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/inf gradients or a diverging loss during optimisation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hpnet
