#include "salrun/error.hpp"

namespace salrun {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::DecodeError: return "DecodeError";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::IoError: return "IoError";
    case Errc::RangeError: return "RangeError";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::NameCollision: return "NameCollision";
    case Errc::UnknownParameter: return "UnknownParameter";
    case Errc::ConstraintViolation: return "ConstraintViolation";
    case Errc::CrossFieldViolation: return "CrossFieldViolation";
    case Errc::UnknownModel: return "UnknownModel";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::LaunchError: return "LaunchError";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::ModelError: return "ModelError";
    case Errc::Timeout: return "Timeout";
    case Errc::MapFormatError: return "MapFormatError";
    case Errc::NetworkError: return "NetworkError";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::EmptyInputDir: return "EmptyInputDir";
  }
  return "Unknown";
}

}  // namespace salrun
