#pragma once

#include <stdexcept>
#include <string>

namespace replykit {

// Error taxonomy mirrors the CLI exit codes: usage/config -> 1,
// bad or unreadable data -> 2, numerical aborts -> 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace replykit
