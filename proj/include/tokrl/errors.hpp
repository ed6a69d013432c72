#pragma once

#include <stdexcept>
#include <string>

namespace tokrl {

// Bad inputs, malformed files, violated preconditions.  CLI exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses, gradients or ratios that cannot be recovered from.
// CLI exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace tokrl
