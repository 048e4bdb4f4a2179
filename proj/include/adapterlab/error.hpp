#pragma once

#include <stdexcept>
#include <string>

namespace adapterlab {

/// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
  kInvalidArgument,
  kShape,
  kConfig,
  kData,
  kCheckpoint,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

struct CheckpointError : Error {
  explicit CheckpointError(const std::string& what)
      : Error(ErrorKind::kCheckpoint, what) {}
};

}  // namespace adapterlab
