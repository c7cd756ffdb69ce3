#include "horizons/results_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace horizons {

using nlohmann::ordered_json;

ResultRow to_result_row(const MatchOutcome& outcome) {
  ResultRow row;
  row.patient_id = outcome.patient_id;
  row.status = outcome.status;
  row.anchor_date = outcome.anchor_date;
  row.admission_date = outcome.admission_date;
  row.offset = outcome.offset;
  for (const auto& hit : outcome.validation_hits) {
    row.validation_hits.push_back(
        ResultRow::Hit{hit.clause, hit.code.value, hit.date, hit.offset_from_admission});
  }
  return row;
}

std::string result_jsonl_line(const MatchOutcome& outcome) {
  ordered_json obj;
  obj["patient_id"] = outcome.patient_id;
  obj["status"] = std::string(to_string(outcome.status));
  if (outcome.anchor_date) obj["anchor_date"] = format_iso_date(*outcome.anchor_date);
  if (outcome.admission_date) obj["admission_date"] = format_iso_date(*outcome.admission_date);
  if (outcome.offset) obj["offset"] = *outcome.offset;
  auto& hits = obj["validation_hits"] = ordered_json::array();
  for (const auto& hit : outcome.validation_hits) {
    ordered_json h;
    h["clause"] = hit.clause;
    h["code"] = hit.code.value;
    h["date"] = format_iso_date(hit.date);
    h["offset"] = hit.offset_from_admission;
    hits.push_back(std::move(h));
  }
  return obj.dump();
}

void write_results_jsonl(std::ostream& out, const std::vector<MatchOutcome>& outcomes) {
  for (const auto& outcome : outcomes) out << result_jsonl_line(outcome) << '\n';
}

std::vector<ResultRow> read_results_jsonl(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ResultsIoError("results line " + std::to_string(line_no) + ": " + e.what());
    }
    ResultRow row;
    try {
      row.patient_id = obj.at("patient_id").get<std::string>();
      const auto status = match_status_from_string(obj.at("status").get<std::string>());
      if (!status) throw ResultsIoError("unknown status");
      row.status = *status;
      if (obj.contains("anchor_date")) {
        row.anchor_date = parse_iso_date(obj.at("anchor_date").get<std::string>());
      }
      if (obj.contains("admission_date")) {
        row.admission_date = parse_iso_date(obj.at("admission_date").get<std::string>());
      }
      if (obj.contains("offset")) row.offset = obj.at("offset").get<std::int64_t>();
      if (obj.contains("validation_hits")) {
        for (const auto& h : obj.at("validation_hits")) {
          ResultRow::Hit hit;
          hit.clause = h.at("clause").get<std::string>();
          hit.code = h.at("code").get<std::string>();
          hit.date = parse_iso_date(h.at("date").get<std::string>());
          hit.offset = h.at("offset").get<std::int64_t>();
          row.validation_hits.push_back(std::move(hit));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ResultsIoError("results line " + std::to_string(line_no) + ": " + e.what());
    } catch (const MalformedDate& e) {
      throw ResultsIoError("results line " + std::to_string(line_no) + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> read_results_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResultsIoError("cannot open results file: " + path.string());
  return read_results_jsonl(in);
}

}  // namespace horizons
