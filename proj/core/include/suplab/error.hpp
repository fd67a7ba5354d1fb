#pragma once

#include <stdexcept>
#include <string>

namespace suplab {

enum class Errc {
  MissingColumn,
  NegativeValue,
  MalformedRecord,
  InvariantViolation,
  DivisionByZero,
  NoDemandReads,
  EmptyInput,
  ConstantSeries,
  InvalidParams,
  MissingKind,
  DegenerateMetric,
  InsufficientMlpSpread,
  RankDeficient,
  LoadOutOfRange,
  InconsistentProfile,
  MissingFit,
  CapacityUnderflow,
  EmptyTrace,
  Io,
};

const char* to_string(Errc code) noexcept;

// All library failures surface as this exception; code() identifies the
// condition, what() carries the row/field/kind context.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace suplab
