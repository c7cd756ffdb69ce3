#include "horizons/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <tuple>

namespace horizons {

std::vector<CandidatePair> find_candidate_pairs(std::span<const EpochDay> anchor_dates,
                                                std::span<const EpochDay> admission_dates,
                                                Horizon horizon) {
  std::vector<CandidatePair> pairs;
  size_t window_begin = 0;  // anchors >= admission - hi; advances monotonically
  for (size_t i = 0; i < admission_dates.size(); ++i) {
    const EpochDay admission = admission_dates[i];
    if (i > 0 && admission == admission_dates[i - 1]) continue;  // duplicate admission day

    const std::int64_t lowest_anchor = admission.value - horizon.hi;
    const std::int64_t highest_anchor = admission.value - horizon.lo;
    while (window_begin < anchor_dates.size() && anchor_dates[window_begin].value < lowest_anchor) {
      ++window_begin;
    }
    for (size_t j = window_begin;
         j < anchor_dates.size() && anchor_dates[j].value <= highest_anchor; ++j) {
      if (j > window_begin && anchor_dates[j] == anchor_dates[j - 1]) continue;
      pairs.push_back(CandidatePair{anchor_dates[j], admission,
                                    admission.value - anchor_dates[j].value});
    }
  }
  return pairs;
}

CandidatePair select_primary_pair(std::span<const CandidatePair> candidates) {
  if (candidates.empty()) throw EmptyCandidates();
  const CandidatePair* best = &candidates[0];
  for (const auto& candidate : candidates.subspan(1)) {
    const auto key = [](const CandidatePair& p) {
      return std::tuple(std::abs(p.offset), p.admission_date, p.anchor_date);
    };
    if (key(candidate) < key(*best)) best = &candidate;
  }
  return *best;
}

ValidationResult check_validation(EpochDay admission_date, std::span<const ClaimEvent> events,
                                  std::span<const ValidationClause> clauses) {
  ValidationResult result;
  std::vector<std::pair<EpochDay, Code>> qualifying;
  for (const auto& clause : clauses) {
    // events are date-sorted; narrow to the clause window first
    const EpochDay window_lo = admission_date + clause.horizon.lo;
    const EpochDay window_hi = admission_date + clause.horizon.hi;
    auto first = std::lower_bound(events.begin(), events.end(), window_lo,
                                  [](const ClaimEvent& e, EpochDay d) { return e.date < d; });
    qualifying.clear();
    for (auto it = first; it != events.end() && it->date <= window_hi; ++it) {
      if (clause.codes.count(it->code)) qualifying.emplace_back(it->date, it->code);
    }
    // repeat claims of the same code on the same day carry no information
    std::sort(qualifying.begin(), qualifying.end());
    qualifying.erase(std::unique(qualifying.begin(), qualifying.end()), qualifying.end());
    for (const auto& [date, code] : qualifying) {
      result.hits.push_back(ValidationHit{clause.name, code, date, date - admission_date});
    }
    if (int(qualifying.size()) < clause.min_count) result.satisfied = false;
  }
  return result;
}

MatchOutcome classify_patient(const PatientBundle& bundle, const RuleSet& rules) {
  MatchOutcome outcome;
  outcome.patient_id = bundle.patient_id;

  std::vector<EpochDay> anchor_dates;
  std::vector<EpochDay> admission_dates;
  for (const auto& event : bundle.events) {
    if (rules.anchor_codes.count(event.code)) anchor_dates.push_back(event.date);
    if (rules.admission_codes.count(event.code)) admission_dates.push_back(event.date);
  }

  if (anchor_dates.empty()) {
    outcome.status = MatchStatus::NoAnchor;
    return outcome;
  }

  const auto pairs = find_candidate_pairs(anchor_dates, admission_dates, rules.primary_horizon);
  if (pairs.empty()) {
    outcome.status = MatchStatus::AnchorNoAdmission;
    return outcome;
  }

  const CandidatePair chosen = select_primary_pair(pairs);
  outcome.anchor_date = chosen.anchor_date;
  outcome.admission_date = chosen.admission_date;
  outcome.offset = chosen.offset;

  auto validation = check_validation(chosen.admission_date, bundle.events, rules.validation);
  outcome.validation_hits = std::move(validation.hits);
  outcome.status = validation.satisfied ? MatchStatus::Matched : MatchStatus::FailedValidation;
  return outcome;
}

void classify_stream(const BundleSource& source, const RuleSet& rules, unsigned workers,
                     const OutcomeSink& sink) {
  if (workers < 1) workers = 1;
  const size_t batch_size = workers == 1 ? 1 : size_t(workers) * 64;

  std::vector<PatientBundle> batch;
  std::vector<MatchOutcome> outcomes;
  batch.reserve(batch_size);

  for (;;) {
    batch.clear();
    while (batch.size() < batch_size) {
      auto bundle = source();
      if (!bundle) break;
      batch.push_back(std::move(*bundle));
    }
    if (batch.empty()) break;

    outcomes.assign(batch.size(), MatchOutcome{});
    if (workers == 1 || batch.size() == 1) {
      for (size_t i = 0; i < batch.size(); ++i) outcomes[i] = classify_patient(batch[i], rules);
    } else {
      std::atomic<size_t> next_index{0};
      auto work = [&] {
        for (;;) {
          const size_t i = next_index.fetch_add(1);
          if (i >= batch.size()) return;
          outcomes[i] = classify_patient(batch[i], rules);
        }
      };
      std::vector<std::thread> pool;
      const unsigned n_threads = unsigned(std::min<size_t>(workers, batch.size()));
      pool.reserve(n_threads);
      for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
      for (auto& thread : pool) thread.join();
    }
    for (const auto& outcome : outcomes) sink(outcome);

    if (batch.size() < batch_size) break;  // source drained
  }
}

std::vector<MatchOutcome> classify_all(std::span<const PatientBundle> bundles,
                                       const RuleSet& rules, unsigned workers) {
  std::vector<MatchOutcome> outcomes;
  outcomes.reserve(bundles.size());
  size_t cursor = 0;
  classify_stream(
      [&]() -> std::optional<PatientBundle> {
        if (cursor >= bundles.size()) return std::nullopt;
        return bundles[cursor++];
      },
      rules, workers, [&](const MatchOutcome& outcome) { outcomes.push_back(outcome); });
  return outcomes;
}

}  // namespace horizons
