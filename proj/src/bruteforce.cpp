#include <cstdlib>

#include "horizons/engine.hpp"

namespace horizons {

// Exhaustive reference classifier. Deliberately shares no logic with
// classify_patient: membership tests are linear scans over the rule code
// sets and every (anchor, admission) combination is enumerated. Keep it
// dumb; its value is being an independent route to the same answer.

namespace {

bool in_code_set(const std::set<Code>& codes, const Code& code) {
  for (const auto& candidate : codes) {
    if (candidate.system == code.system && candidate.value == code.value) return true;
  }
  return false;
}

// A repeat claim: an identical (date, code) row appeared earlier in the bundle.
bool is_repeat(const std::vector<ClaimEvent>& events, std::size_t index) {
  for (std::size_t i = 0; i < index; ++i) {
    if (events[i].date == events[index].date &&
        events[i].code.system == events[index].code.system &&
        events[i].code.value == events[index].code.value)
      return true;
  }
  return false;
}

}  // namespace

MatchOutcome classify_bruteforce(const PatientBundle& bundle, const RuleSet& rules) {
  MatchOutcome outcome;
  outcome.patient_id = bundle.patient_id;

  bool any_anchor = false;
  bool have_best = false;
  EpochDay best_anchor{}, best_admission{};
  std::int64_t best_offset = 0;

  for (const auto& anchor_event : bundle.events) {
    if (!in_code_set(rules.anchor_codes, anchor_event.code)) continue;
    any_anchor = true;
    for (const auto& admission_event : bundle.events) {
      if (!in_code_set(rules.admission_codes, admission_event.code)) continue;
      const std::int64_t offset = admission_event.date - anchor_event.date;
      if (offset < rules.primary_horizon.lo || offset > rules.primary_horizon.hi) continue;

      bool better = false;
      if (!have_best) {
        better = true;
      } else if (std::abs(offset) != std::abs(best_offset)) {
        better = std::abs(offset) < std::abs(best_offset);
      } else if (admission_event.date != best_admission) {
        better = admission_event.date < best_admission;
      } else {
        better = anchor_event.date < best_anchor;
      }
      if (better) {
        have_best = true;
        best_anchor = anchor_event.date;
        best_admission = admission_event.date;
        best_offset = offset;
      }
    }
  }

  if (!any_anchor) {
    outcome.status = MatchStatus::NoAnchor;
    return outcome;
  }
  if (!have_best) {
    outcome.status = MatchStatus::AnchorNoAdmission;
    return outcome;
  }

  outcome.anchor_date = best_anchor;
  outcome.admission_date = best_admission;
  outcome.offset = best_offset;

  bool all_clauses_hold = true;
  for (const auto& clause : rules.validation) {
    int count = 0;
    for (std::size_t i = 0; i < bundle.events.size(); ++i) {
      const auto& event = bundle.events[i];
      if (!in_code_set(clause.codes, event.code)) continue;
      const std::int64_t offset = event.date - best_admission;
      if (offset < clause.horizon.lo || offset > clause.horizon.hi) continue;
      if (is_repeat(bundle.events, i)) continue;  // same code, same day, no new information
      ++count;
      outcome.validation_hits.push_back(
          ValidationHit{clause.name, event.code, event.date, offset});
    }
    if (count < clause.min_count) all_clauses_hold = false;
  }

  outcome.status = all_clauses_hold ? MatchStatus::Matched : MatchStatus::FailedValidation;
  return outcome;
}

}  // namespace horizons
