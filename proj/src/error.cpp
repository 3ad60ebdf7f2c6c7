#include "mixlab/error.hpp"

namespace mixlab {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::NegativeEntry:
      return "NegativeEntry";
    case Errc::NotNormalized:
      return "NotNormalized";
    case Errc::IndexOutOfRange:
      return "IndexOutOfRange";
    case Errc::DegenerateCatalog:
      return "DegenerateCatalog";
    case Errc::DimensionMismatch:
      return "DimensionMismatch";
    case Errc::MissingBenchmark:
      return "MissingBenchmark";
    case Errc::EmptyGroup:
      return "EmptyGroup";
    case Errc::MalformedLine:
      return "MalformedLine";
    case Errc::ScoreOutOfRange:
      return "ScoreOutOfRange";
    case Errc::UnknownBenchmark:
      return "UnknownBenchmark";
    case Errc::EmptyRecords:
      return "EmptyRecords";
    case Errc::ZeroCombined:
      return "ZeroCombined";
    case Errc::AllZeroAdjusted:
      return "AllZeroAdjusted";
    case Errc::MissingCombination:
      return "MissingCombination";
    case Errc::DuplicateCombination:
      return "DuplicateCombination";
    case Errc::InvalidArgument:
      return "InvalidArgument";
    case Errc::ZeroVariance:
      return "ZeroVariance";
    case Errc::InsufficientRecords:
      return "InsufficientRecords";
    case Errc::TooFewPoints:
      return "TooFewPoints";
    case Errc::NoSurvivors:
      return "NoSurvivors";
    case Errc::EmptyCandidates:
      return "EmptyCandidates";
    case Errc::InvalidBox:
      return "InvalidBox";
    case Errc::Exhausted:
      return "Exhausted";
    case Errc::GroupTooSmall:
      return "GroupTooSmall";
    case Errc::SupportMismatch:
      return "SupportMismatch";
    case Errc::InvalidSpec:
      return "InvalidSpec";
    case Errc::Io:
      return "Io";
  }
  return "Unknown";
}

}  // namespace mixlab
