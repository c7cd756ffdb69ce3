#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "horizons/model.hpp"

namespace horizons {

struct RuleError : std::runtime_error {
  explicit RuleError(const std::string& what) : std::runtime_error(what) {}
};

struct RuleSyntaxError : RuleError {
  explicit RuleSyntaxError(const std::string& what) : RuleError(what) {}
};

struct InvalidHorizon : RuleError {
  explicit InvalidHorizon(const std::string& what) : RuleError(what) {}
};

struct EmptyCodeSet : RuleError {
  explicit EmptyCodeSet(const std::string& what) : RuleError(what) {}
};

struct DuplicateClauseName : RuleError {
  explicit DuplicateClauseName(const std::string& what) : RuleError(what) {}
};

/// Anchor and admission code sets may not share a code; an event cannot be
/// its own hospitalization.
struct CodeSetConflict : RuleError {
  explicit CodeSetConflict(const std::string& what) : RuleError(what) {}
};

/// Closed integer interval of day offsets; both endpoints inclusive.
struct Horizon {
  std::int64_t lo{0};
  std::int64_t hi{0};

  constexpr bool contains(std::int64_t x) const { return lo <= x && x <= hi; }
  constexpr std::int64_t width() const { return hi - lo + 1; }

  auto operator<=>(const Horizon&) const = default;
};

/// One conditional horizon: the patient needs at least min_count events
/// carrying one of `codes` with (event_date - admission_date) inside
/// `horizon` for the clause to hold.
struct ValidationClause {
  std::string name;
  std::set<Code> codes;
  Horizon horizon;
  int min_count{1};

  bool operator==(const ValidationClause&) const = default;
};

/// Declarative event-horizon rule set. The primary horizon constrains
/// offset = admission_date - anchor_date; every validation clause must hold
/// (ALL combinator) with ANY-of-codes semantics inside a clause.
struct RuleSet {
  std::string name;
  std::set<Code> anchor_codes;
  std::set<Code> admission_codes;
  Horizon primary_horizon;
  std::vector<ValidationClause> validation;

  /// Non-semantic advisories recorded while parsing (e.g. a code listed
  /// twice in the file before set collapse). Surfaced by validate_rules,
  /// ignored by equality.
  std::vector<std::string> lint_notes;

  bool operator==(const RuleSet& other) const {
    return name == other.name && anchor_codes == other.anchor_codes &&
           admission_codes == other.admission_codes &&
           primary_horizon == other.primary_horizon && validation == other.validation;
  }
};

/// Parses a UTF-8 JSON rule document. Codes are normalized on load.
/// Throws RuleSyntaxError / InvalidHorizon / EmptyCodeSet /
/// DuplicateClauseName / CodeSetConflict.
RuleSet parse_rules(std::string_view text);

RuleSet parse_rules_file(const std::filesystem::path& path);

/// Serializes back to the rule-file JSON schema; parse_rules(serialize(rs))
/// equals rs.
std::string serialize_rules(const RuleSet& rs);

/// Non-fatal lint advisories; empty vector means clean.
std::vector<std::string> validate_rules(const RuleSet& rs);

}  // namespace horizons
