#pragma once

#include <stdexcept>
#include <string>

namespace i2i {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  DegenerateInput,
  ConstructionFailure,
  EmptyVisibleSet,
  AsymmetryGuardFailed,
  Io,
  Runtime,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw_error(code, what);
}

}  // namespace i2i
