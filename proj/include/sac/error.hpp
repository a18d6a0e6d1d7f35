#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sac {

enum class ErrorKind {
  kShape,
  kRange,
  kNumeric,
  kIo,
  kParse,
  kNoRegion,
  kConfig,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so the CLI can emit a
// one-line machine-parsable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace sac
