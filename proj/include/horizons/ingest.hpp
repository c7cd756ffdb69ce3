#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "horizons/model.hpp"

namespace horizons {

struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

struct MalformedRow : IngestError {
  MalformedRow(std::uint64_t line, const std::string& reason)
      : IngestError("line " + std::to_string(line) + ": " + reason), line_number(line) {}
  std::uint64_t line_number;
};

/// A patient_id showed up again after its group was closed, or groups are
/// not in ascending order. Always fatal; the grouped-streaming contract is
/// what keeps memory bounded.
struct UnsortedInput : IngestError {
  explicit UnsortedInput(const std::string& what) : IngestError(what) {}
};

struct DuplicatePatient : IngestError {
  explicit DuplicatePatient(const std::string& what) : IngestError(what) {}
};

struct IoFailure : IngestError {
  explicit IoFailure(const std::string& what) : IngestError(what) {}
};

/// All of one patient's events, sorted by (date, code system, code value).
struct PatientBundle {
  std::string patient_id;
  std::vector<ClaimEvent> events;

  bool operator==(const PatientBundle&) const = default;
};

struct RejectEntry {
  std::uint64_t line_number{0};
  std::string reason;

  bool operator==(const RejectEntry&) const = default;
};

struct IngestReport {
  std::uint64_t rows_read{0};
  std::uint64_t rows_accepted{0};
  std::uint64_t rows_rejected{0};
  std::vector<RejectEntry> rejects;  // capped at ReadOptions::reject_cap
};

enum class ClaimsFormat { Csv, Jsonl };

/// Picks Jsonl for a ".jsonl" extension, Csv otherwise.
ClaimsFormat claims_format_for_path(const std::filesystem::path& path);

struct ReadOptions {
  ClaimsFormat format{ClaimsFormat::Csv};
  bool strict{false};       // malformed rows abort instead of being counted
  std::size_t reject_cap{100};
};

/// Streaming grouped reader over claims rows. Input must be grouped by
/// patient_id with groups in ascending order (see external_sort_claims for
/// arbitrary feeds). Never holds more than one patient's events.
class ClaimsReader {
 public:
  ClaimsReader(std::istream& in, ReadOptions options);

  /// Next patient bundle in ascending patient_id order, or nullopt at end.
  /// Throws MalformedRow (strict only) and UnsortedInput.
  std::optional<PatientBundle> next();

  const IngestReport& report() const { return report_; }

 private:
  std::optional<ClaimEvent> read_row();
  bool next_line(std::string& line);

  std::istream& in_;
  ReadOptions options_;
  IngestReport report_;
  std::uint64_t line_number_{0};
  bool header_checked_{false};
  bool done_{false};
  std::string last_emitted_id_;
  std::optional<ClaimEvent> pending_;
};

/// Reads a whole demographics file (CSV or JSONL by extension convention;
/// pass the format explicitly here). Throws DuplicatePatient / MalformedRow.
std::map<std::string, Demographics> read_demographics(std::istream& in, ClaimsFormat format);

std::map<std::string, Demographics> read_demographics_file(const std::filesystem::path& path);

struct SortOptions {
  ClaimsFormat format{ClaimsFormat::Csv};
  std::size_t max_buffer_rows{1u << 20};
};

/// External sort of a claims file by (patient_id, date, original line
/// number). Pure permutation of the data rows: nothing is dropped or
/// rewritten, so downstream rejection accounting is unchanged. Output
/// satisfies ClaimsReader's grouping precondition. Throws IoFailure.
void external_sort_claims(std::istream& in, std::ostream& out,
                          const std::filesystem::path& scratch_dir, SortOptions options);

}  // namespace horizons
