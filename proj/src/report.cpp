#include "horizons/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace horizons {

std::int64_t percent_tenths(std::uint64_t hospitalized, std::uint64_t cases) {
  if (cases == 0) throw ZeroDenominator();
  // round(1000 * h / c) half away from zero, all in integers
  const std::uint64_t numerator = 2000 * hospitalized + cases;
  return std::int64_t(numerator / (2 * cases));
}

double percent_hospitalized(std::uint64_t hospitalized, std::uint64_t cases) {
  return double(percent_tenths(hospitalized, cases)) / 10.0;
}

std::string format_tenths(std::int64_t tenths) {
  std::ostringstream out;
  if (tenths < 0) out << '-';
  const std::int64_t mag = std::abs(tenths);
  out << mag / 10 << '.' << mag % 10;
  return out.str();
}

AgeBins::AgeBins(std::vector<int> bounds) : bounds_(std::move(bounds)) {
  if (bounds_.empty()) throw BadAgeBins("age bins must be non-empty");
  for (size_t i = 1; i < bounds_.size(); ++i) {
    if (bounds_[i] <= bounds_[i - 1]) {
      throw BadAgeBins("age bins must be strictly ascending");
    }
  }
}

std::size_t AgeBins::index_of(int age) const {
  // 0 is the implicit "<first" stratum
  std::size_t index = 0;
  for (size_t i = 0; i < bounds_.size(); ++i) {
    if (age >= bounds_[i]) index = i + 1;
  }
  return index;
}

std::string AgeBins::label(std::size_t index) const {
  if (index == 0) return "<" + std::to_string(bounds_.front());
  if (index == bounds_.size()) return std::to_string(bounds_.back()) + "+";
  return std::to_string(bounds_[index - 1]) + "-" + std::to_string(bounds_[index] - 1);
}

CohortAccumulator::CohortAccumulator(AgeBins bins)
    : bins_(std::move(bins)), cells_(bins_.stratum_count() + 1) {}

void CohortAccumulator::add(MatchStatus status, const Demographics* demographics) {
  const std::size_t stratum =
      demographics ? bins_.index_of(demographics->age) : bins_.stratum_count();
  const std::size_t sex = demographics ? std::size_t(demographics->sex) : std::size_t(Sex::U);
  auto& cell = cells_[stratum][sex];
  ++cell.cases;
  if (status == MatchStatus::Matched) ++cell.hospitalized;
}

void CohortAccumulator::merge(const CohortAccumulator& other) {
  if (other.bins_.bounds() != bins_.bounds()) {
    throw BadAgeBins("cannot merge accumulators with different bins");
  }
  for (size_t s = 0; s < cells_.size(); ++s) {
    for (size_t x = 0; x < 3; ++x) {
      cells_[s][x].cases += other.cells_[s][x].cases;
      cells_[s][x].hospitalized += other.cells_[s][x].hospitalized;
    }
  }
}

std::vector<CohortRow> CohortAccumulator::rows(bool by_sex) const {
  std::vector<CohortRow> rows;
  const std::size_t unknown = bins_.stratum_count();

  auto make_row = [](std::string label, std::uint64_t cases, std::uint64_t hospitalized) {
    CohortRow row{std::move(label), cases, hospitalized, std::nullopt};
    if (cases > 0) row.percent_tenths = percent_tenths(hospitalized, cases);
    return row;
  };

  auto emit_stratum = [&](std::size_t stratum, const std::string& label, bool always) {
    std::uint64_t cases = 0, hospitalized = 0;
    for (const auto& cell : cells_[stratum]) {
      cases += cell.cases;
      hospitalized += cell.hospitalized;
    }
    if (!always && cases == 0) return;
    rows.push_back(make_row(label, cases, hospitalized));
    if (!by_sex) return;
    for (const Sex sex : {Sex::M, Sex::F, Sex::U}) {
      const auto& cell = cells_[stratum][std::size_t(sex)];
      if (cell.cases == 0) continue;
      rows.push_back(
          make_row(label + "/" + std::string(to_string(sex)), cell.cases, cell.hospitalized));
    }
  };

  emit_stratum(0, bins_.label(0), /*always=*/false);
  for (std::size_t s = 1; s <= bins_.bounds().size(); ++s) {
    emit_stratum(s, bins_.label(s), /*always=*/true);
  }
  emit_stratum(unknown, "unknown", /*always=*/false);

  std::uint64_t all_cases = 0, all_hospitalized = 0;
  std::array<CohortRow, 3> sex_totals{CohortRow{"all/M", 0, 0, {}}, CohortRow{"all/F", 0, 0, {}},
                                      CohortRow{"all/U", 0, 0, {}}};
  for (const auto& strata : cells_) {
    for (size_t x = 0; x < 3; ++x) {
      all_cases += strata[x].cases;
      all_hospitalized += strata[x].hospitalized;
      sex_totals[x].cases += strata[x].cases;
      sex_totals[x].hospitalized += strata[x].hospitalized;
    }
  }
  rows.push_back(make_row("all", all_cases, all_hospitalized));
  if (by_sex) {
    for (auto& total : sex_totals) {
      if (total.cases == 0) continue;
      total.percent_tenths = percent_tenths(total.hospitalized, total.cases);
      rows.push_back(std::move(total));
    }
  }
  return rows;
}

std::vector<CohortRow> aggregate_cohort(std::span<const ResultRow> outcomes,
                                        const std::map<std::string, Demographics>& demographics,
                                        const AgeBins& bins, bool by_sex) {
  CohortAccumulator acc(bins);
  for (const auto& outcome : outcomes) {
    const auto it = demographics.find(outcome.patient_id);
    acc.add(outcome.status, it == demographics.end() ? nullptr : &it->second);
  }
  return acc.rows(by_sex);
}

std::vector<ReferenceRow> load_reference(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ReportError(std::string("malformed reference file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rows") || !doc.at("rows").is_array()) {
    throw ReportError("reference file must be an object with a 'rows' array");
  }
  std::vector<ReferenceRow> rows;
  for (const auto& item : doc.at("rows")) {
    ReferenceRow row;
    try {
      row.stratum = item.at("stratum").get<std::string>();
      row.cases = item.at("cases").get<std::uint64_t>();
      row.hospitalized = item.at("hospitalized").get<std::uint64_t>();
      if (item.contains("percent")) row.percent = item.at("percent").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ReportError(std::string("bad reference row: ") + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ReferenceRow> load_reference_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot open reference file: " + path.string());
  return load_reference(in);
}

std::vector<ComparisonRow> compare_reference(std::span<const CohortRow> cohort,
                                             std::span<const ReferenceRow> reference) {
  std::vector<ComparisonRow> rows;
  for (const auto& ref : reference) {
    const auto it = std::find_if(cohort.begin(), cohort.end(),
                                 [&](const CohortRow& row) { return row.stratum == ref.stratum; });
    if (it == cohort.end()) {
      throw StratumMismatch("reference stratum '" + ref.stratum + "' not present in cohort");
    }
    ComparisonRow row;
    row.stratum = ref.stratum;
    row.reference_cases = ref.cases;
    row.reference_hospitalized = ref.hospitalized;
    row.reference_percent_tenths = percent_tenths(ref.hospitalized, ref.cases);
    if (ref.percent) {
      const std::int64_t printed = std::llround(*ref.percent * 10.0);
      if (printed != row.reference_percent_tenths) {
        throw DataInconsistency("reference stratum '" + ref.stratum + "': file says " +
                                format_tenths(printed) + "% but counts give " +
                                format_tenths(row.reference_percent_tenths) + "%");
      }
    }
    row.observed_cases = it->cases;
    row.observed_hospitalized = it->hospitalized;
    row.observed_percent_tenths = percent_tenths(it->hospitalized, it->cases);
    row.difference_tenths = row.observed_percent_tenths - row.reference_percent_tenths;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_cohort_csv(std::ostream& out, std::span<const CohortRow> rows) {
  out << "stratum,cases,hospitalized,percent\n";
  for (const auto& row : rows) {
    out << row.stratum << ',' << row.cases << ',' << row.hospitalized << ',';
    if (row.percent_tenths) out << format_tenths(*row.percent_tenths);
    out << '\n';
  }
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  out << "stratum,ref_cases,ref_hosp,ref_pct,obs_cases,obs_hosp,obs_pct,diff_points\n";
  for (const auto& row : rows) {
    out << row.stratum << ',' << row.reference_cases << ',' << row.reference_hospitalized << ','
        << format_tenths(row.reference_percent_tenths) << ',' << row.observed_cases << ','
        << row.observed_hospitalized << ',' << format_tenths(row.observed_percent_tenths) << ','
        << format_tenths(row.difference_tenths) << '\n';
  }
}

}  // namespace horizons
