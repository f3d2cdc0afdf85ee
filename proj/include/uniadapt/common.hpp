#ifndef UNIADAPT_COMMON_HPP
#define UNIADAPT_COMMON_HPP

#include <stdexcept>
#include <string>

namespace uniadapt {

// Bad user input: malformed files, inconsistent config, shape mismatches.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime: NaN losses, degenerate features, failed
// gradient checks. The CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace uniadapt

#endif
