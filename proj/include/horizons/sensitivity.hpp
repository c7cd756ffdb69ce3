#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "horizons/engine.hpp"

namespace horizons {

enum class HistogramMode {
  MatchedOnly,     // offsets of accepted pairs (default)
  AnyChosenPair,   // also FailedValidation, which still has a chosen pair
};

struct OffsetHistogram {
  std::map<std::int64_t, std::uint64_t> counts;
  std::uint64_t total{0};

  bool operator==(const OffsetHistogram&) const = default;
};

OffsetHistogram offset_histogram(std::span<const MatchOutcome> outcomes,
                                 HistogramMode mode = HistogramMode::MatchedOnly);

/// One sweep grid cell: the cohort reclassified with the primary horizon
/// replaced by [lo, hi] (validation clauses unchanged).
struct SweepCell {
  std::int64_t lo{0};
  std::int64_t hi{0};
  std::uint64_t candidates_patients{0};  // patients with >= 1 qualifying pair
  std::uint64_t matched_patients{0};     // final status Matched

  bool operator==(const SweepCell&) const = default;
};

/// Full reclassification per (lo, hi) combination; lo > hi cells are
/// skipped. Cells appear in lo-major, hi-minor order of the given values.
std::vector<SweepCell> horizon_sweep(std::span<const PatientBundle> bundles, const RuleSet& rules,
                                     std::span<const std::int64_t> lo_values,
                                     std::span<const std::int64_t> hi_values,
                                     unsigned workers = 1);

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells);

/// Header `offset,count`, rows ascending by offset.
void write_histogram_csv(std::ostream& out, const OffsetHistogram& histogram);

}  // namespace horizons
