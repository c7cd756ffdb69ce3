#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "horizons/model.hpp"
#include "horizons/results_io.hpp"

namespace horizons {

struct ReportError : std::runtime_error {
  explicit ReportError(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroDenominator : ReportError {
  ZeroDenominator() : ReportError("percentage undefined for zero cases") {}
};

struct StratumMismatch : ReportError {
  explicit StratumMismatch(const std::string& what) : ReportError(what) {}
};

struct DataInconsistency : ReportError {
  explicit DataInconsistency(const std::string& what) : ReportError(what) {}
};

struct BadAgeBins : ReportError {
  explicit BadAgeBins(const std::string& what) : ReportError(what) {}
};

/// 100 * hospitalized / cases in integer tenths of a percent, rounded half
/// away from zero. Exact integer arithmetic; throws ZeroDenominator.
std::int64_t percent_tenths(std::uint64_t hospitalized, std::uint64_t cases);

/// Same value as a decimal with one fractional digit.
double percent_hospitalized(std::uint64_t hospitalized, std::uint64_t cases);

/// "2.7", "-13.5", "0.0" — exact rendering of a tenths value.
std::string format_tenths(std::int64_t tenths);

/// Ascending age lower bounds, e.g. {18, 50, 65} making strata
/// "<18", "18-49", "50-64", "65+".
class AgeBins {
 public:
  explicit AgeBins(std::vector<int> bounds);

  std::size_t stratum_count() const { return bounds_.size() + 1; }
  std::size_t index_of(int age) const;
  std::string label(std::size_t index) const;
  const std::vector<int>& bounds() const { return bounds_; }

 private:
  std::vector<int> bounds_;
};

struct CohortRow {
  std::string stratum;
  std::uint64_t cases{0};
  std::uint64_t hospitalized{0};
  std::optional<std::int64_t> percent_tenths;  // absent when cases == 0

  bool operator==(const CohortRow&) const = default;
};

/// Commutative, associative partial aggregation; shards can be accumulated
/// independently and merged.
class CohortAccumulator {
 public:
  explicit CohortAccumulator(AgeBins bins);

  void add(MatchStatus status, const Demographics* demographics);
  void merge(const CohortAccumulator& other);

  /// Rows: "<18" when populated, every bin stratum, "unknown" when
  /// populated, then "all"; with by_sex, each stratum row is followed by its
  /// populated "<stratum>/M|F|U" splits.
  std::vector<CohortRow> rows(bool by_sex) const;

  const AgeBins& bins() const { return bins_; }

 private:
  struct Cell {
    std::uint64_t cases{0};
    std::uint64_t hospitalized{0};
  };

  AgeBins bins_;
  std::vector<std::array<Cell, 3>> cells_;  // [stratum][sex]; last stratum = unknown
};

/// Every classified patient counts as a case in its stratum; Matched counts
/// as hospitalized. Patients missing from demographics land in "unknown",
/// never dropped.
std::vector<CohortRow> aggregate_cohort(std::span<const ResultRow> outcomes,
                                        const std::map<std::string, Demographics>& demographics,
                                        const AgeBins& bins, bool by_sex = false);

struct ReferenceRow {
  std::string stratum;
  std::uint64_t cases{0};
  std::uint64_t hospitalized{0};
  std::optional<double> percent;  // as printed in the file, cross-checked
};

std::vector<ReferenceRow> load_reference(std::istream& in);
std::vector<ReferenceRow> load_reference_file(const std::filesystem::path& path);

struct ComparisonRow {
  std::string stratum;
  std::uint64_t reference_cases{0};
  std::uint64_t reference_hospitalized{0};
  std::int64_t reference_percent_tenths{0};
  std::uint64_t observed_cases{0};
  std::uint64_t observed_hospitalized{0};
  std::int64_t observed_percent_tenths{0};
  std::int64_t difference_tenths{0};  // observed - reference, on rounded percents

  bool operator==(const ComparisonRow&) const = default;
};

/// One row per reference stratum, in reference order. Reference percentages
/// are recomputed from the counts; a printed percent that disagrees raises
/// DataInconsistency, a reference stratum missing from the cohort raises
/// StratumMismatch.
std::vector<ComparisonRow> compare_reference(std::span<const CohortRow> cohort,
                                             std::span<const ReferenceRow> reference);

void write_cohort_csv(std::ostream& out, std::span<const CohortRow> rows);
void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);

}  // namespace horizons
