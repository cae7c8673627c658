#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bibi {

// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value fell outside the domain of an operation (e.g. a sentiment value
// outside [0, 1], a NEUTRAL gold label, an empty span).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input file. `line` is 1-based, 0 when unknown.
class IngestError : public Error {
 public:
  IngestError(std::string path, std::size_t line, const std::string& message)
      : Error(format(path, line, message)), path_(std::move(path)), line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& path, std::size_t line, const std::string& message) {
    std::string out = path.empty() ? std::string("<input>") : path;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + message;
  }

  std::string path_;
  std::size_t line_;
};

// Operation not permitted in the round's current phase.
class PhaseError : public Error {
 public:
  using Error::Error;
};

// Named entity (round, item, system) does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace bibi
