#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace horizons {

struct MalformedDate : std::runtime_error {
  explicit MalformedDate(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyCode : std::runtime_error {
  explicit EmptyCode(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownCodeSystem : std::runtime_error {
  explicit UnknownCodeSystem(const std::string& what) : std::runtime_error(what) {}
};

/// Calendar day as a count of days since 1970-01-01 (may be negative).
/// The whole system works in whole days; there is no time-of-day anywhere.
struct EpochDay {
  std::int64_t value{0};

  constexpr auto operator<=>(const EpochDay&) const = default;

  constexpr EpochDay operator+(std::int64_t days) const { return EpochDay{value + days}; }
  constexpr EpochDay operator-(std::int64_t days) const { return EpochDay{value - days}; }
  /// Exact signed day count between two calendar days.
  constexpr std::int64_t operator-(EpochDay other) const { return value - other.value; }
};

/// Parses an ISO-8601 calendar date (YYYY-MM-DD, valid Gregorian).
/// Throws MalformedDate on shape or calendar violations (month 13, Feb 30, ...).
EpochDay parse_iso_date(std::string_view text);

/// Formats back to YYYY-MM-DD; round-trips with parse_iso_date.
std::string format_iso_date(EpochDay day);

enum class CodeSystem { Icd10, Cpt, Ndc };

std::string_view to_string(CodeSystem system);

/// Throws UnknownCodeSystem for anything but ICD10 / CPT / NDC.
CodeSystem code_system_from_string(std::string_view text);

/// A coded fact: code system plus normalized code text (uppercased, dots
/// removed, surrounding whitespace stripped). "U07.1" and "u071" are the
/// same Code. Matching elsewhere is exact on the normalized text, never
/// prefix-based.
struct Code {
  CodeSystem system{CodeSystem::Icd10};
  std::string value;

  auto operator<=>(const Code&) const = default;
};

/// Normalizes raw code text into a Code. Throws EmptyCode when nothing
/// remains after trimming.
Code normalize_code(CodeSystem system, std::string_view raw);

/// One dated coded fact about a patient; the atomic input row.
struct ClaimEvent {
  std::string patient_id;
  EpochDay date;
  Code code;

  auto operator<=>(const ClaimEvent&) const = default;
};

enum class Sex { M, F, U };

std::string_view to_string(Sex sex);
std::optional<Sex> sex_from_string(std::string_view text);

struct Demographics {
  std::string patient_id;
  int age{0};
  Sex sex{Sex::U};
  std::optional<std::string> zip2;  // first two digits of residential zip

  bool operator==(const Demographics&) const = default;
};

enum class MatchStatus { Matched, NoAnchor, AnchorNoAdmission, FailedValidation };

std::string_view to_string(MatchStatus status);
std::optional<MatchStatus> match_status_from_string(std::string_view text);

/// A validation-clause event that fell inside its clause horizon.
struct ValidationHit {
  std::string clause;
  Code code;
  EpochDay date;
  std::int64_t offset_from_admission{0};

  auto operator<=>(const ValidationHit&) const = default;
};

/// Per-patient classification result.
///
/// Matched            => anchor/admission/offset present, offset =
///                       admission - anchor, all clauses satisfied.
/// NoAnchor           => no anchor-coded event existed; optional fields absent.
/// AnchorNoAdmission  => anchors existed but no pair fell in the primary
///                       horizon; no pair fields recorded.
/// FailedValidation   => the chosen pair is recorded; validation_hits lists
///                       only the clause events that did occur in-window.
struct MatchOutcome {
  std::string patient_id;
  MatchStatus status{MatchStatus::NoAnchor};
  std::optional<EpochDay> anchor_date;
  std::optional<EpochDay> admission_date;
  std::optional<std::int64_t> offset;
  std::vector<ValidationHit> validation_hits;

  bool operator==(const MatchOutcome&) const = default;
};

}  // namespace horizons
