#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace rgmm {

/// Bad input: malformed files, invalid configuration, violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown during a fit (non-PD blocks, every candidate fit failed).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what,
                          std::optional<int> component = std::nullopt)
      : std::runtime_error(what), component_(component) {}

  std::optional<int> component() const { return component_; }

 private:
  std::optional<int> component_;
};

}  // namespace rgmm
