#include "horizons/sensitivity.hpp"

#include <ostream>

namespace horizons {

OffsetHistogram offset_histogram(std::span<const MatchOutcome> outcomes, HistogramMode mode) {
  OffsetHistogram histogram;
  for (const auto& outcome : outcomes) {
    const bool counted = outcome.status == MatchStatus::Matched ||
                         (mode == HistogramMode::AnyChosenPair &&
                          outcome.status == MatchStatus::FailedValidation);
    if (!counted) continue;
    ++histogram.counts[*outcome.offset];
    ++histogram.total;
  }
  return histogram;
}

std::vector<SweepCell> horizon_sweep(std::span<const PatientBundle> bundles, const RuleSet& rules,
                                     std::span<const std::int64_t> lo_values,
                                     std::span<const std::int64_t> hi_values, unsigned workers) {
  std::vector<SweepCell> cells;
  for (const auto lo : lo_values) {
    for (const auto hi : hi_values) {
      if (lo > hi) continue;
      RuleSet cell_rules = rules;
      cell_rules.primary_horizon = Horizon{lo, hi};
      SweepCell cell{lo, hi, 0, 0};
      const auto outcomes = classify_all(bundles, cell_rules, workers);
      for (const auto& outcome : outcomes) {
        if (outcome.status == MatchStatus::Matched) {
          ++cell.matched_patients;
          ++cell.candidates_patients;
        } else if (outcome.status == MatchStatus::FailedValidation) {
          ++cell.candidates_patients;
        }
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "lo,hi,candidates_patients,matched_patients\n";
  for (const auto& cell : cells) {
    out << cell.lo << ',' << cell.hi << ',' << cell.candidates_patients << ','
        << cell.matched_patients << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const OffsetHistogram& histogram) {
  out << "offset,count\n";
  for (const auto& [offset, count] : histogram.counts) {
    out << offset << ',' << count << '\n';
  }
}

}  // namespace horizons
