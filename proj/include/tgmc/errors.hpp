#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tgmc {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct NonFiniteError : Error {
  using Error::Error;
};

/// A required artifact (checkpoint, manifest, cache) is absent.
struct MissingArtifactError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

}  // namespace tgmc
