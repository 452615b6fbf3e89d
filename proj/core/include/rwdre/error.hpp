#pragma once

#include <stdexcept>
#include <string>

namespace rwdre {

// Base class; every error carries the exit code the command-line tool maps it to.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& w) : Error("parameter: " + w, 2) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& w) : Error("precondition: " + w, 3) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& w) : Error("range: " + w, 3) {}
};

// A walk tried to consult a site outside the exactly simulated region.
class CertifiedRegionError : public Error {
 public:
  explicit CertifiedRegionError(const std::string& w) : Error("certified-region: " + w, 3) {}
};

class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& w) : Error("resource: " + w, 4) {}
};

class SimulationError : public Error {
 public:
  explicit SimulationError(const std::string& w) : Error("simulation: " + w, 5) {}
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ParameterError(msg);
}

}  // namespace rwdre
