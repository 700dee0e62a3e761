#pragma once

#include <stdexcept>
#include <string>

namespace alphax {

struct IllegalAction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedEncoding : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SpaceMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SpaceTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyPredictions : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateVariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidArch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingEntry : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownArch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VersionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptSnapshot : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace alphax
