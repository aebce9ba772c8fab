#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace drmatch {

// Status codes shared by the C++ core and the C API. Values are stable;
// the C header mirrors them.
enum class Status : int {
  Ok = 0,
  ConfigError = 2,
  StageError = 3,
  MissingColumn = 10,
  NonBinaryTreatment = 11,
  ParseError = 12,
  EmptyColumn = 13,
  LeakageDetected = 14,
  MissingPosWindow = 15,
  Separation = 20,
  RankDeficient = 21,
  NoConvergence = 22,
  EmptySupport = 23,
  DegenerateLogits = 24,
  NoComparableCovariates = 25,
  DegenerateVariance = 26,
  InvalidGamma = 30,
  NoInformativePairs = 31,
  InvalidSpec = 40,
  IoError = 41,
  InternalError = 50,
};

const char* status_name(Status s);

class Error : public std::runtime_error {
 public:
  Error(Status code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  Status code() const noexcept { return code_; }

 private:
  Status code_;
};

[[noreturn]] inline void fail(Status code, const std::string& msg) {
  throw Error(code, msg);
}

// Non-fatal condition recorded alongside results (degenerate caliper,
// empty column, infinite SMD, ...).
struct Warning {
  Status code;
  std::string message;
};

}  // namespace drmatch
