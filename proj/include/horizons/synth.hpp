#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "horizons/model.hpp"
#include "horizons/results_io.hpp"
#include "horizons/rules.hpp"

namespace horizons {

struct SpecInvalid : std::runtime_error {
  explicit SpecInvalid(const std::string& what) : std::runtime_error(what) {}
};

struct UniverseMismatch : std::runtime_error {
  explicit UniverseMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct AgeWeight {
  int lo{0};
  int hi{0};
  double weight{1.0};
};

/// Generator parameters. Planted patients are constructed so the classifier
/// provably lands on the expected status: Matched patients get one
/// anchor/admission pair at a drawn offset plus in-window validation events;
/// AnchorNoAdmission patients get admissions only outside the primary
/// horizon; FailedValidation patients get a qualifying pair but clause-coded
/// events only outside the clause horizons. Noise codes come from a pool
/// disjoint from every rule code set, so they cannot flip anything.
struct SynthSpec {
  std::uint64_t seed{0};
  std::uint64_t n_matched{0};
  std::uint64_t n_no_anchor{0};
  std::uint64_t n_anchor_no_admission{0};
  std::uint64_t n_failed_validation{0};
  EpochDay span_start;
  EpochDay span_end;
  double noise_events_per_patient{0.0};
  std::vector<std::pair<std::int64_t, double>> offset_distribution;
  std::vector<AgeWeight> age_mix;
  std::array<double, 3> sex_weights{1.0, 1.0, 0.0};  // M, F, U
};

SynthSpec load_synth_spec(std::string_view text);
SynthSpec load_synth_spec_file(const std::filesystem::path& path);

/// Throws SpecInvalid: bad weights, offsets outside the primary horizon, a
/// span too narrow for the rule horizons, failed-validation patients
/// requested against a clause-free rule set, or rule code sets that overlap
/// in ways that make a provable construction impossible.
void validate_spec(const SynthSpec& spec, const RuleSet& rules);

struct GroundTruthLabel {
  std::string patient_id;
  MatchStatus expected_status{MatchStatus::NoAnchor};
  std::optional<std::int64_t> expected_offset;

  bool operator==(const GroundTruthLabel&) const = default;
};

struct SynthResult {
  std::filesystem::path claims_path;
  std::filesystem::path demographics_path;
  std::filesystem::path labels_path;
  std::filesystem::path metadata_path;
  std::uint64_t patients{0};
  std::uint64_t claims_rows{0};
};

/// Writes claims.csv, demographics.csv, labels.csv, metadata.json into
/// out_dir (write-to-temp, rename-on-success). Deterministic function of
/// (spec, rules): same inputs, byte-identical data files. extra_metadata,
/// when given, must be a JSON object; it lands under "run" in metadata.json.
SynthResult generate_cohort(const SynthSpec& spec, const RuleSet& rules,
                            const std::filesystem::path& out_dir,
                            const std::string& extra_metadata = "");

std::vector<GroundTruthLabel> read_labels_csv(std::istream& in);
std::vector<GroundTruthLabel> read_labels_file(const std::filesystem::path& path);

void write_labels_csv(std::ostream& out, std::span<const GroundTruthLabel> labels);

struct LabelDiscrepancy {
  std::string patient_id;
  MatchStatus expected_status{MatchStatus::NoAnchor};
  MatchStatus actual_status{MatchStatus::NoAnchor};
  std::optional<std::int64_t> expected_offset;
  std::optional<std::int64_t> actual_offset;

  bool operator==(const LabelDiscrepancy&) const = default;
};

/// Every patient whose classified status (or offset, when the label pins
/// one) differs from its label. Empty means pass. Throws UniverseMismatch
/// when the two patient_id sets differ.
std::vector<LabelDiscrepancy> verify_labels(std::span<const ResultRow> outcomes,
                                            std::span<const GroundTruthLabel> labels);

}  // namespace horizons
