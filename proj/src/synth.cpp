#include "horizons/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "horizons/ingest.hpp"
#include "horizons/version.hpp"

namespace horizons {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent engine per logical stream. Patient k always sees the same
// draws no matter how many patients come before it.
std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

std::int64_t uniform_i64(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

const json* find_key(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SpecInvalid(where + ": expected a number");
  return v.get<double>();
}

std::uint64_t as_count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw SpecInvalid(where + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

SynthSpec load_synth_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecInvalid(std::string("synth spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SpecInvalid("synth spec must be a JSON object");

  SynthSpec spec;
  if (const json* v = find_key(doc, "seed")) spec.seed = as_count(*v, "seed");
  if (const json* v = find_key(doc, "n_matched")) spec.n_matched = as_count(*v, "n_matched");
  if (const json* v = find_key(doc, "n_no_anchor"))
    spec.n_no_anchor = as_count(*v, "n_no_anchor");
  if (const json* v = find_key(doc, "n_anchor_no_admission"))
    spec.n_anchor_no_admission = as_count(*v, "n_anchor_no_admission");
  if (const json* v = find_key(doc, "n_failed_validation"))
    spec.n_failed_validation = as_count(*v, "n_failed_validation");

  const json* span = find_key(doc, "date_span");
  if (!span || !span->is_object() || !find_key(*span, "start") || !find_key(*span, "end"))
    throw SpecInvalid("date_span with start and end is required");
  try {
    spec.span_start = parse_iso_date((*span)["start"].get<std::string>());
    spec.span_end = parse_iso_date((*span)["end"].get<std::string>());
  } catch (const json::exception&) {
    throw SpecInvalid("date_span.start / date_span.end must be ISO date strings");
  } catch (const MalformedDate& e) {
    throw SpecInvalid(std::string("date_span: ") + e.what());
  }

  if (const json* v = find_key(doc, "noise_events_per_patient"))
    spec.noise_events_per_patient = as_number(*v, "noise_events_per_patient");

  if (const json* v = find_key(doc, "offset_distribution")) {
    if (!v->is_array()) throw SpecInvalid("offset_distribution must be an array");
    for (const json& entry : *v) {
      if (!entry.is_object() || !find_key(entry, "offset") || !find_key(entry, "weight"))
        throw SpecInvalid("offset_distribution entries need offset and weight");
      if (!entry["offset"].is_number_integer())
        throw SpecInvalid("offset_distribution: offset must be an integer");
      spec.offset_distribution.emplace_back(
          entry["offset"].get<std::int64_t>(),
          as_number(entry["weight"], "offset_distribution.weight"));
    }
  }

  // Demographics mix is optional; the defaults give a plausible adult cohort.
  spec.age_mix = {{18, 49, 3.0}, {50, 64, 2.0}, {65, 90, 1.0}};
  spec.sex_weights = {1.0, 1.0, 0.05};
  if (const json* demo = find_key(doc, "demographics")) {
    if (!demo->is_object()) throw SpecInvalid("demographics must be an object");
    if (const json* ages = find_key(*demo, "ages")) {
      if (!ages->is_array() || ages->empty())
        throw SpecInvalid("demographics.ages must be a non-empty array");
      spec.age_mix.clear();
      for (const json& bin : *ages) {
        if (!bin.is_object() || !find_key(bin, "lo") || !find_key(bin, "hi"))
          throw SpecInvalid("demographics.ages entries need lo and hi");
        AgeWeight w;
        if (!bin["lo"].is_number_integer() || !bin["hi"].is_number_integer())
          throw SpecInvalid("demographics.ages: lo and hi must be integers");
        w.lo = bin["lo"].get<int>();
        w.hi = bin["hi"].get<int>();
        if (const json* wt = find_key(bin, "weight"))
          w.weight = as_number(*wt, "demographics.ages.weight");
        spec.age_mix.push_back(w);
      }
    }
    if (const json* sexes = find_key(*demo, "sexes")) {
      if (!sexes->is_object()) throw SpecInvalid("demographics.sexes must be an object");
      spec.sex_weights = {0.0, 0.0, 0.0};
      if (const json* v = find_key(*sexes, "M")) spec.sex_weights[0] = as_number(*v, "sexes.M");
      if (const json* v = find_key(*sexes, "F")) spec.sex_weights[1] = as_number(*v, "sexes.F");
      if (const json* v = find_key(*sexes, "U")) spec.sex_weights[2] = as_number(*v, "sexes.U");
    }
  }
  return spec;
}

SynthSpec load_synth_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecInvalid("cannot open synth spec file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_synth_spec(buf.str());
}

namespace {

std::int64_t max_abs(Horizon h) { return std::max(std::llabs(h.lo), std::llabs(h.hi)); }

// Days an anchor must stay away from the span edges so that every planted
// relative there (admissions out to the primary horizon, clause events out
// to the clause horizons, plus the strictly-outside slack) still lands
// inside the span.
std::int64_t plant_margin(const RuleSet& rules) {
  std::int64_t clause_reach = 0;
  for (const auto& clause : rules.validation)
    clause_reach = std::max(clause_reach, max_abs(clause.horizon));
  return max_abs(rules.primary_horizon) + clause_reach + 7;
}

bool intersects(const std::set<Code>& a, const std::set<Code>& b) {
  for (const Code& c : a)
    if (b.count(c)) return true;
  return false;
}

}  // namespace

void validate_spec(const SynthSpec& spec, const RuleSet& rules) {
  if (spec.span_start > spec.span_end)
    throw SpecInvalid("date_span start is after end");
  if (!(spec.noise_events_per_patient >= 0.0) ||
      !std::isfinite(spec.noise_events_per_patient))
    throw SpecInvalid("noise_events_per_patient must be a finite non-negative number");

  const std::uint64_t total = spec.n_matched + spec.n_no_anchor +
                              spec.n_anchor_no_admission + spec.n_failed_validation;
  if (total > 9'999'999)
    throw SpecInvalid("patient count exceeds the id space (max 9999999)");

  const bool needs_offsets = spec.n_matched + spec.n_failed_validation > 0;
  if (needs_offsets && spec.offset_distribution.empty())
    throw SpecInvalid("offset_distribution is required when matched or "
                      "failed_validation patients are requested");
  double offset_weight_sum = 0.0;
  for (const auto& [offset, weight] : spec.offset_distribution) {
    if (!(weight >= 0.0) || !std::isfinite(weight))
      throw SpecInvalid("offset_distribution weights must be finite and non-negative");
    offset_weight_sum += weight;
    if (!rules.primary_horizon.contains(offset))
      throw SpecInvalid("offset_distribution offset " + std::to_string(offset) +
                        " lies outside the primary horizon [" +
                        std::to_string(rules.primary_horizon.lo) + "," +
                        std::to_string(rules.primary_horizon.hi) + "]");
  }
  if (needs_offsets && !(offset_weight_sum > 0.0))
    throw SpecInvalid("offset_distribution weights sum to zero");

  if (spec.age_mix.empty()) throw SpecInvalid("age mix must not be empty");
  double age_weight_sum = 0.0;
  for (const AgeWeight& bin : spec.age_mix) {
    if (bin.lo < 0 || bin.hi > 130 || bin.lo > bin.hi)
      throw SpecInvalid("age bin [" + std::to_string(bin.lo) + "," +
                        std::to_string(bin.hi) + "] is not a valid age range");
    if (!(bin.weight >= 0.0) || !std::isfinite(bin.weight))
      throw SpecInvalid("age weights must be finite and non-negative");
    age_weight_sum += bin.weight;
  }
  if (!(age_weight_sum > 0.0)) throw SpecInvalid("age weights sum to zero");

  double sex_weight_sum = 0.0;
  for (double w : spec.sex_weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw SpecInvalid("sex weights must be finite and non-negative");
    sex_weight_sum += w;
  }
  if (!(sex_weight_sum > 0.0)) throw SpecInvalid("sex weights sum to zero");

  if (spec.n_failed_validation > 0 && rules.validation.empty())
    throw SpecInvalid("failed_validation patients need at least one validation clause");

  // Provable construction needs clause codes that cannot masquerade as
  // anchors or admissions.
  for (const auto& clause : rules.validation) {
    if (intersects(clause.codes, rules.anchor_codes) ||
        intersects(clause.codes, rules.admission_codes))
      throw SpecInvalid("clause '" + clause.name +
                        "' shares codes with the anchor or admission set; "
                        "planted cohorts would not be provable");
  }

  const std::int64_t margin = plant_margin(rules);
  if (spec.span_end - spec.span_start < 2 * margin)
    throw SpecInvalid("date_span is too narrow for the rule horizons; need at least " +
                      std::to_string(2 * margin + 1) + " days");
}

namespace {

json spec_to_json(const SynthSpec& spec) {
  json doc;
  doc["seed"] = spec.seed;
  doc["n_matched"] = spec.n_matched;
  doc["n_no_anchor"] = spec.n_no_anchor;
  doc["n_anchor_no_admission"] = spec.n_anchor_no_admission;
  doc["n_failed_validation"] = spec.n_failed_validation;
  doc["date_span"] = {{"start", format_iso_date(spec.span_start)},
                      {"end", format_iso_date(spec.span_end)}};
  doc["noise_events_per_patient"] = spec.noise_events_per_patient;
  doc["offset_distribution"] = json::array();
  for (const auto& [offset, weight] : spec.offset_distribution)
    doc["offset_distribution"].push_back({{"offset", offset}, {"weight", weight}});
  json ages = json::array();
  for (const AgeWeight& bin : spec.age_mix)
    ages.push_back({{"lo", bin.lo}, {"hi", bin.hi}, {"weight", bin.weight}});
  doc["demographics"] = {{"ages", std::move(ages)},
                         {"sexes",
                          {{"M", spec.sex_weights[0]},
                           {"F", spec.sex_weights[1]},
                           {"U", spec.sex_weights[2]}}}};
  return doc;
}

struct PlantedEvent {
  EpochDay date;
  Code code;

  auto operator<=>(const PlantedEvent&) const = default;
};

class Planter {
 public:
  Planter(const SynthSpec& spec, const RuleSet& rules)
      : spec_(spec),
        rules_(rules),
        anchor_codes_(rules.anchor_codes.begin(), rules.anchor_codes.end()),
        admission_codes_(rules.admission_codes.begin(), rules.admission_codes.end()) {
    for (const auto& clause : rules.validation)
      clause_codes_.emplace_back(clause.codes.begin(), clause.codes.end());

    // Union of the clause horizons; events planted strictly outside it are
    // outside every clause window no matter which clause code they carry.
    if (!rules.validation.empty()) {
      clause_union_ = rules.validation.front().horizon;
      for (const auto& clause : rules.validation) {
        clause_union_.lo = std::min(clause_union_.lo, clause.horizon.lo);
        clause_union_.hi = std::max(clause_union_.hi, clause.horizon.hi);
      }
    }

    std::vector<double> offset_weights;
    double offset_mass = 0.0;
    for (const auto& [offset, weight] : spec.offset_distribution) {
      offset_values_.push_back(offset);
      offset_weights.push_back(weight);
      offset_mass += weight;
    }
    if (offset_mass > 0.0)
      offset_dist_ = std::discrete_distribution<int>(offset_weights.begin(),
                                                     offset_weights.end());

    std::vector<double> age_weights;
    for (const AgeWeight& bin : spec.age_mix) age_weights.push_back(bin.weight);
    age_bin_dist_ = std::discrete_distribution<int>(age_weights.begin(), age_weights.end());
    sex_dist_ = std::discrete_distribution<int>(spec.sex_weights.begin(),
                                                spec.sex_weights.end());

    // Reserved noise pool, filtered against every code set in the rule file.
    for (CodeSystem system : {CodeSystem::Icd10, CodeSystem::Cpt, CodeSystem::Ndc}) {
      for (int i = 0; i < 10; ++i) {
        Code candidate{system, "ZZN" + std::to_string(i)};
        if (rules.anchor_codes.count(candidate) || rules.admission_codes.count(candidate))
          continue;
        bool in_clause = false;
        for (const auto& clause : rules.validation)
          if (clause.codes.count(candidate)) in_clause = true;
        if (!in_clause) noise_pool_.push_back(std::move(candidate));
      }
    }
    if (noise_pool_.empty())
      throw SpecInvalid("the rule file exhausts the reserved noise code pool");

    const std::int64_t margin = plant_margin(rules);
    anchor_lo_ = spec.span_start + margin;
    anchor_hi_ = spec.span_end - margin;
  }

  struct Patient {
    std::vector<PlantedEvent> events;
    GroundTruthLabel label;
    Demographics demographics;
  };

  Patient make_patient(const std::string& patient_id, MatchStatus status,
                       std::mt19937_64& rng) {
    Patient p;
    p.label.patient_id = patient_id;
    p.label.expected_status = status;
    p.demographics.patient_id = patient_id;

    // Structural draws come first and demographics second, so raising the
    // noise mean perturbs neither labels nor strata.
    switch (status) {
      case MatchStatus::Matched:
        plant_matched(p, rng);
        break;
      case MatchStatus::NoAnchor:
        plant_no_anchor(p, rng);
        break;
      case MatchStatus::AnchorNoAdmission:
        plant_anchor_no_admission(p, rng);
        break;
      case MatchStatus::FailedValidation:
        plant_failed_validation(p, rng);
        break;
    }

    draw_demographics(p, rng);

    if (spec_.noise_events_per_patient > 0.0) {
      std::poisson_distribution<int> noise_count(spec_.noise_events_per_patient);
      int n = noise_count(rng);
      for (int i = 0; i < n; ++i)
        p.events.push_back({random_span_day(rng), pick(noise_pool_, rng)});
    }
    if (p.events.empty()) p.events.push_back({random_span_day(rng), pick(noise_pool_, rng)});

    std::sort(p.events.begin(), p.events.end());
    return p;
  }

 private:
  EpochDay random_anchor_day(std::mt19937_64& rng) {
    return EpochDay{uniform_i64(rng, anchor_lo_.value, anchor_hi_.value)};
  }

  EpochDay random_span_day(std::mt19937_64& rng) {
    return EpochDay{uniform_i64(rng, spec_.span_start.value, spec_.span_end.value)};
  }

  const Code& pick(const std::vector<Code>& codes, std::mt19937_64& rng) {
    return codes[static_cast<std::size_t>(
        uniform_i64(rng, 0, static_cast<std::int64_t>(codes.size()) - 1))];
  }

  std::int64_t draw_offset(std::mt19937_64& rng) {
    return offset_values_[static_cast<std::size_t>(offset_dist_(rng))];
  }

  // Offset strictly outside [h.lo, h.hi], one to six days past an endpoint.
  std::int64_t outside(Horizon h, std::mt19937_64& rng) {
    std::int64_t slack = 1 + uniform_i64(rng, 0, 5);
    return uniform_i64(rng, 0, 1) ? h.hi + slack : h.lo - slack;
  }

  void plant_pair(Patient& p, std::mt19937_64& rng, EpochDay& anchor, EpochDay& admission) {
    anchor = random_anchor_day(rng);
    std::int64_t offset = draw_offset(rng);
    admission = anchor + offset;
    p.events.push_back({anchor, pick(anchor_codes_, rng)});
    p.events.push_back({admission, pick(admission_codes_, rng)});
    p.label.expected_offset = offset;
  }

  void plant_matched(Patient& p, std::mt19937_64& rng) {
    EpochDay anchor, admission;
    plant_pair(p, rng, anchor, admission);
    for (std::size_t i = 0; i < rules_.validation.size(); ++i) {
      const ValidationClause& clause = rules_.validation[i];
      for (int k = 0; k < clause.min_count; ++k) {
        std::int64_t voff = uniform_i64(rng, clause.horizon.lo, clause.horizon.hi);
        p.events.push_back({admission + voff, pick(clause_codes_[i], rng)});
      }
    }
  }

  void plant_failed_validation(Patient& p, std::mt19937_64& rng) {
    EpochDay anchor, admission;
    plant_pair(p, rng, anchor, admission);
    // Clause-coded events only strictly outside the union horizon, so no
    // clause can reach min_count and validation provably fails.
    for (std::size_t i = 0; i < rules_.validation.size(); ++i) {
      int extras = static_cast<int>(uniform_i64(rng, 0, 1));
      for (int k = 0; k < extras; ++k)
        p.events.push_back({admission + outside(clause_union_, rng),
                            pick(clause_codes_[i], rng)});
    }
  }

  void plant_anchor_no_admission(Patient& p, std::mt19937_64& rng) {
    EpochDay anchor = random_anchor_day(rng);
    p.events.push_back({anchor, pick(anchor_codes_, rng)});
    int admissions = static_cast<int>(1 + uniform_i64(rng, 0, 1));
    for (int k = 0; k < admissions; ++k)
      p.events.push_back({anchor + outside(rules_.primary_horizon, rng),
                          pick(admission_codes_, rng)});
    plant_idle_clause_events(p, rng);
  }

  void plant_no_anchor(Patient& p, std::mt19937_64& rng) {
    int admissions = static_cast<int>(uniform_i64(rng, 0, 2));
    for (int k = 0; k < admissions; ++k)
      p.events.push_back({random_span_day(rng), pick(admission_codes_, rng)});
    plant_idle_clause_events(p, rng);
  }

  // Clause-coded events are inert while the ladder stops before validation;
  // a few of them keep the negative classes from looking artificially bare.
  void plant_idle_clause_events(Patient& p, std::mt19937_64& rng) {
    if (clause_codes_.empty()) return;
    int n = static_cast<int>(uniform_i64(rng, 0, 2));
    for (int k = 0; k < n; ++k) {
      std::size_t ci = static_cast<std::size_t>(
          uniform_i64(rng, 0, static_cast<std::int64_t>(clause_codes_.size()) - 1));
      p.events.push_back({random_span_day(rng), pick(clause_codes_[ci], rng)});
    }
  }

  void draw_demographics(Patient& p, std::mt19937_64& rng) {
    const AgeWeight& bin = spec_.age_mix[static_cast<std::size_t>(age_bin_dist_(rng))];
    p.demographics.age = static_cast<int>(uniform_i64(rng, bin.lo, bin.hi));
    p.demographics.sex = static_cast<Sex>(sex_dist_(rng));
    char zip[3];
    std::snprintf(zip, sizeof zip, "%02d", static_cast<int>(uniform_i64(rng, 0, 99)));
    p.demographics.zip2 = std::string(zip, 2);
  }

  const SynthSpec& spec_;
  const RuleSet& rules_;
  std::vector<Code> anchor_codes_;
  std::vector<Code> admission_codes_;
  std::vector<std::vector<Code>> clause_codes_;
  std::vector<Code> noise_pool_;
  Horizon clause_union_{0, 0};
  std::vector<std::int64_t> offset_values_;
  std::discrete_distribution<int> offset_dist_;
  std::discrete_distribution<int> age_bin_dist_;
  std::discrete_distribution<int> sex_dist_;
  EpochDay anchor_lo_;
  EpochDay anchor_hi_;
};

std::string patient_id_for(std::uint64_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "S%07llu",
                static_cast<unsigned long long>(index + 1));
  return buf;
}

}  // namespace

SynthResult generate_cohort(const SynthSpec& spec, const RuleSet& rules,
                            const std::filesystem::path& out_dir,
                            const std::string& extra_metadata) {
  validate_spec(spec, rules);

  json run_extra;
  if (!extra_metadata.empty()) {
    try {
      run_extra = json::parse(extra_metadata);
    } catch (const json::parse_error& e) {
      throw SpecInvalid(std::string("extra metadata is not valid JSON: ") + e.what());
    }
    if (!run_extra.is_object()) throw SpecInvalid("extra metadata must be a JSON object");
  }

  std::filesystem::create_directories(out_dir);

  const std::uint64_t total = spec.n_matched + spec.n_no_anchor +
                              spec.n_anchor_no_admission + spec.n_failed_validation;

  std::vector<MatchStatus> statuses;
  statuses.reserve(total);
  statuses.insert(statuses.end(), spec.n_matched, MatchStatus::Matched);
  statuses.insert(statuses.end(), spec.n_no_anchor, MatchStatus::NoAnchor);
  statuses.insert(statuses.end(), spec.n_anchor_no_admission,
                  MatchStatus::AnchorNoAdmission);
  statuses.insert(statuses.end(), spec.n_failed_validation,
                  MatchStatus::FailedValidation);
  auto assignment_rng = stream_engine(spec.seed, 0);
  std::shuffle(statuses.begin(), statuses.end(), assignment_rng);

  Planter planter(spec, rules);

  SynthResult result;
  result.claims_path = out_dir / "claims.csv";
  result.demographics_path = out_dir / "demographics.csv";
  result.labels_path = out_dir / "labels.csv";
  result.metadata_path = out_dir / "metadata.json";
  result.patients = total;

  const auto tmp = [](const std::filesystem::path& p) {
    std::filesystem::path t = p;
    t += ".tmp";
    return t;
  };

  {
    std::ofstream claims(tmp(result.claims_path), std::ios::trunc);
    std::ofstream demo(tmp(result.demographics_path), std::ios::trunc);
    std::ofstream labels(tmp(result.labels_path), std::ios::trunc);
    if (!claims || !demo || !labels)
      throw SpecInvalid("cannot create output files in " + out_dir.string());

    claims << "patient_id,date,code_system,code\n";
    demo << "patient_id,age,sex,zip2\n";
    labels << "patient_id,expected_status,expected_offset\n";

    for (std::uint64_t i = 0; i < total; ++i) {
      auto rng = stream_engine(spec.seed, i + 1);
      Planter::Patient p = planter.make_patient(patient_id_for(i), statuses[i], rng);

      for (const PlantedEvent& ev : p.events) {
        claims << p.label.patient_id << ',' << format_iso_date(ev.date) << ','
               << to_string(ev.code.system) << ',' << ev.code.value << '\n';
        ++result.claims_rows;
      }
      demo << p.demographics.patient_id << ',' << p.demographics.age << ','
           << to_string(p.demographics.sex) << ','
           << p.demographics.zip2.value_or("") << '\n';
      labels << p.label.patient_id << ',' << to_string(p.label.expected_status) << ',';
      if (p.label.expected_offset) labels << *p.label.expected_offset;
      labels << '\n';
    }

    claims.flush();
    demo.flush();
    labels.flush();
    if (!claims || !demo || !labels)
      throw SpecInvalid("failed writing synthetic cohort files in " + out_dir.string());
  }

  json meta;
  meta["generator"] = "horizons-synth";
  meta["version"] = kVersion;
  meta["rule_name"] = rules.name;
  meta["patients"] = result.patients;
  meta["claims_rows"] = result.claims_rows;
  meta["spec"] = spec_to_json(spec);
  if (!run_extra.empty()) meta["run"] = std::move(run_extra);

  {
    std::ofstream out(tmp(result.metadata_path), std::ios::trunc);
    out << meta.dump(2) << '\n';
    if (!out) throw SpecInvalid("failed writing metadata.json in " + out_dir.string());
  }

  std::filesystem::rename(tmp(result.claims_path), result.claims_path);
  std::filesystem::rename(tmp(result.demographics_path), result.demographics_path);
  std::filesystem::rename(tmp(result.labels_path), result.labels_path);
  std::filesystem::rename(tmp(result.metadata_path), result.metadata_path);
  return result;
}

std::vector<GroundTruthLabel> read_labels_csv(std::istream& in) {
  std::vector<GroundTruthLabel> labels;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != "patient_id,expected_status,expected_offset")
        throw IngestError("labels file: unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    std::size_t c1 = line.find(',');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw MalformedRow(line_no, "expected 3 fields");
    GroundTruthLabel label;
    label.patient_id = line.substr(0, c1);
    if (label.patient_id.empty()) throw MalformedRow(line_no, "empty patient_id");
    std::string status_text = line.substr(c1 + 1, c2 - c1 - 1);
    auto status = match_status_from_string(status_text);
    if (!status) throw MalformedRow(line_no, "unknown status '" + status_text + "'");
    label.expected_status = *status;
    std::string offset_text = line.substr(c2 + 1);
    if (!offset_text.empty()) {
      std::int64_t value = 0;
      auto [ptr, ec] = std::from_chars(offset_text.data(),
                                       offset_text.data() + offset_text.size(), value);
      if (ec != std::errc() || ptr != offset_text.data() + offset_text.size())
        throw MalformedRow(line_no, "bad expected_offset '" + offset_text + "'");
      label.expected_offset = value;
    }
    labels.push_back(std::move(label));
  }
  if (!saw_header) throw IngestError("labels file: missing header");
  return labels;
}

std::vector<GroundTruthLabel> read_labels_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open labels file: " + path.string());
  return read_labels_csv(in);
}

void write_labels_csv(std::ostream& out, std::span<const GroundTruthLabel> labels) {
  out << "patient_id,expected_status,expected_offset\n";
  for (const GroundTruthLabel& label : labels) {
    out << label.patient_id << ',' << to_string(label.expected_status) << ',';
    if (label.expected_offset) out << *label.expected_offset;
    out << '\n';
  }
}

std::vector<LabelDiscrepancy> verify_labels(std::span<const ResultRow> outcomes,
                                            std::span<const GroundTruthLabel> labels) {
  std::map<std::string, const ResultRow*> by_id;
  for (const ResultRow& row : outcomes) {
    if (!by_id.emplace(row.patient_id, &row).second)
      throw UniverseMismatch("duplicate patient_id in results: " + row.patient_id);
  }
  if (by_id.size() != labels.size())
    throw UniverseMismatch("results have " + std::to_string(by_id.size()) +
                           " patients, labels have " + std::to_string(labels.size()));

  std::vector<LabelDiscrepancy> discrepancies;
  std::map<std::string, bool> label_seen;
  for (const GroundTruthLabel& label : labels) {
    if (!label_seen.emplace(label.patient_id, true).second)
      throw UniverseMismatch("duplicate patient_id in labels: " + label.patient_id);
    auto it = by_id.find(label.patient_id);
    if (it == by_id.end())
      throw UniverseMismatch("labeled patient missing from results: " + label.patient_id);
    const ResultRow& row = *it->second;
    bool status_ok = row.status == label.expected_status;
    bool offset_ok = !label.expected_offset || row.offset == label.expected_offset;
    if (!status_ok || !offset_ok) {
      discrepancies.push_back({label.patient_id, label.expected_status, row.status,
                               label.expected_offset, row.offset});
    }
  }
  return discrepancies;
}

}  // namespace horizons
