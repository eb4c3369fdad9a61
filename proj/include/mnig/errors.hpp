#pragma once

#include <stdexcept>
#include <string>

namespace mnig {

/// A conditional posterior became improper or numerically unusable for one
/// mixture component (for example 4 a3 a4 - a0^2 <= 0).
class DegeneracyError : public std::runtime_error {
 public:
  DegeneracyError(int component, const std::string& what)
      : std::runtime_error(component < 0
                               ? what
                               : "component " + std::to_string(component + 1) + ": " + what),
        component_(component) {}

  /// 0-based component index, or -1 when not attributable.
  int component() const { return component_; }

 private:
  int component_;
};

/// Every chain of a fit failed.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mnig
