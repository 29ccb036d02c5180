#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace salrun {

enum class Errc {
  FileNotFound,
  UnsupportedFormat,
  DecodeError,
  InvalidInput,
  IoError,
  RangeError,
  ParseError,
  SchemaError,
  NameCollision,
  UnknownParameter,
  ConstraintViolation,
  CrossFieldViolation,
  UnknownModel,
  DimensionMismatch,
  LaunchError,
  ProtocolError,
  ModelError,
  Timeout,
  MapFormatError,
  NetworkError,
  ChecksumMismatch,
  EmptyInputDir,
};

std::string_view to_string(Errc code);

// Every failure raised by the library carries one of the codes above; callers
// branch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace salrun
