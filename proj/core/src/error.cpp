#include "suplab/error.hpp"

namespace suplab {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::NegativeValue: return "NegativeValue";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::DivisionByZero: return "DivisionByZero";
    case Errc::NoDemandReads: return "NoDemandReads";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ConstantSeries: return "ConstantSeries";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::MissingKind: return "MissingKind";
    case Errc::DegenerateMetric: return "DegenerateMetric";
    case Errc::InsufficientMlpSpread: return "InsufficientMlpSpread";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::LoadOutOfRange: return "LoadOutOfRange";
    case Errc::InconsistentProfile: return "InconsistentProfile";
    case Errc::MissingFit: return "MissingFit";
    case Errc::CapacityUnderflow: return "CapacityUnderflow";
    case Errc::EmptyTrace: return "EmptyTrace";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace suplab
