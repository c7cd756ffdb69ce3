#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "horizons/model.hpp"

namespace horizons {

struct ResultsIoError : std::runtime_error {
  explicit ResultsIoError(const std::string& what) : std::runtime_error(what) {}
};

/// One results-file line as read back from disk. Mirrors MatchOutcome except
/// that hit codes are bare normalized text (the JSONL schema does not carry
/// the code system).
struct ResultRow {
  std::string patient_id;
  MatchStatus status{MatchStatus::NoAnchor};
  std::optional<EpochDay> anchor_date;
  std::optional<EpochDay> admission_date;
  std::optional<std::int64_t> offset;

  struct Hit {
    std::string clause;
    std::string code;
    EpochDay date;
    std::int64_t offset{0};
    bool operator==(const Hit&) const = default;
  };
  std::vector<Hit> validation_hits;

  bool operator==(const ResultRow&) const = default;
};

ResultRow to_result_row(const MatchOutcome& outcome);

/// One JSON object per line, keys in fixed order, absent fields omitted.
std::string result_jsonl_line(const MatchOutcome& outcome);

void write_results_jsonl(std::ostream& out, const std::vector<MatchOutcome>& outcomes);

std::vector<ResultRow> read_results_jsonl(std::istream& in);

std::vector<ResultRow> read_results_file(const std::filesystem::path& path);

}  // namespace horizons
