#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixlab {

enum class Errc {
  // mixtures
  NegativeEntry,
  NotNormalized,
  IndexOutOfRange,
  DegenerateCatalog,
  DimensionMismatch,
  // records
  MissingBenchmark,
  EmptyGroup,
  MalformedLine,
  ScoreOutOfRange,
  UnknownBenchmark,
  // heuristics
  EmptyRecords,
  ZeroCombined,
  AllZeroAdjusted,
  MissingCombination,
  DuplicateCombination,
  InvalidArgument,
  // surrogate
  ZeroVariance,
  InsufficientRecords,
  // search
  TooFewPoints,
  NoSurvivors,
  EmptyCandidates,
  // rewards
  InvalidBox,
  // sampler
  Exhausted,
  // grpo
  GroupTooSmall,
  SupportMismatch,
  InvalidSpec,
  // io
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// All library failures surface as this exception; `code()` names the
/// contract violation so callers (and the CLI) can map it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mixlab
