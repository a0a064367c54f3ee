#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hetnet {

// All user-facing failures (bad config, missing files, shape mismatches)
// are reported through this type; internal logic errors use HT_ASSERT.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

#define HT_ASSERT(cond, msg)                                            \
  do {                                                                  \
    if (!(cond)) {                                                      \
      throw ::hetnet::Error(std::string("internal error: ") + (msg) +   \
                            " (" __FILE__ ":" + std::to_string(__LINE__) + ")"); \
    }                                                                   \
  } while (0)

#define HT_CHECK(cond, msg)              \
  do {                                   \
    if (!(cond)) ::hetnet::fail(msg);    \
  } while (0)

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hetnet
