#pragma once

#include <stdexcept>
#include <string>

namespace dehaze {

// Single error type for precondition and runtime failures; the CLI maps it
// to exit code 2, usage problems are handled by the flag parser separately.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void ensure(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace dehaze
