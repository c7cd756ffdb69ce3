#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "horizons/ingest.hpp"
#include "horizons/model.hpp"
#include "horizons/rules.hpp"

namespace horizons {

struct EmptyCandidates : std::runtime_error {
  EmptyCandidates() : std::runtime_error("no candidate pairs to select from") {}
};

/// An (anchor, admission) combination whose offset already lies inside the
/// primary horizon; out-of-window pairs are never represented.
struct CandidatePair {
  EpochDay anchor_date;
  EpochDay admission_date;
  std::int64_t offset{0};  // admission_date - anchor_date

  auto operator<=>(const CandidatePair&) const = default;
};

/// All in-horizon (anchor, admission) date combinations, deduplicated on the
/// date pair and ordered by (admission_date, anchor_date). Inputs must be
/// sorted ascending; duplicates in them are fine.
std::vector<CandidatePair> find_candidate_pairs(std::span<const EpochDay> anchor_dates,
                                                std::span<const EpochDay> admission_dates,
                                                Horizon horizon);

/// The pair minimizing |offset|; ties broken by earliest admission date,
/// then earliest anchor date. Throws EmptyCandidates.
CandidatePair select_primary_pair(std::span<const CandidatePair> candidates);

struct ValidationResult {
  bool satisfied{true};
  std::vector<ValidationHit> hits;
};

/// Evaluates every clause against the chosen admission date. Satisfied iff
/// each clause has at least min_count events with a clause code and
/// (event_date - admission_date) inside the clause horizon. Hits list every
/// qualifying event, in (clause order, date, code) order. No clauses means
/// vacuously satisfied.
ValidationResult check_validation(EpochDay admission_date, std::span<const ClaimEvent> events,
                                  std::span<const ValidationClause> clauses);

/// The production classifier: decision ladder NoAnchor -> AnchorNoAdmission
/// -> FailedValidation -> Matched, with validation evaluated against the one
/// chosen pair only (no fallback to other pairs).
MatchOutcome classify_patient(const PatientBundle& bundle, const RuleSet& rules);

/// Independent O(n^2) oracle: exhaustively enumerates every (anchor,
/// admission) combination with no sorting shortcuts. Semantically identical
/// to classify_patient; kept separate so the two can check each other.
MatchOutcome classify_bruteforce(const PatientBundle& bundle, const RuleSet& rules);

using BundleSource = std::function<std::optional<PatientBundle>()>;
using OutcomeSink = std::function<void(const MatchOutcome&)>;

/// Maps classify_patient over a bundle stream, preserving input order.
/// workers > 1 classifies batches in parallel; output is byte-identical to
/// the single-worker run.
void classify_stream(const BundleSource& source, const RuleSet& rules, unsigned workers,
                     const OutcomeSink& sink);

std::vector<MatchOutcome> classify_all(std::span<const PatientBundle> bundles,
                                       const RuleSet& rules, unsigned workers = 1);

}  // namespace horizons
