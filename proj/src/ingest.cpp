#include "horizons/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace horizons {

namespace {

constexpr std::string_view kClaimsHeader = "patient_id,date,code_system,code";
constexpr std::string_view kDemographicsHeader = "patient_id,age,sex,zip2";

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

ClaimEvent parse_claims_csv_row(std::uint64_t line_no, std::string_view line) {
  const auto fields = split_fields(line);
  if (fields.size() != 4) {
    throw MalformedRow(line_no, "expected 4 columns, got " + std::to_string(fields.size()));
  }
  if (fields[0].empty()) {
    throw MalformedRow(line_no, "empty patient_id");
  }
  ClaimEvent event;
  event.patient_id = std::string(fields[0]);
  try {
    event.date = parse_iso_date(fields[1]);
  } catch (const MalformedDate& e) {
    throw MalformedRow(line_no, e.what());
  }
  CodeSystem system;
  try {
    system = code_system_from_string(fields[2]);
  } catch (const UnknownCodeSystem& e) {
    throw MalformedRow(line_no, e.what());
  }
  try {
    event.code = normalize_code(system, fields[3]);
  } catch (const EmptyCode& e) {
    throw MalformedRow(line_no, e.what());
  }
  return event;
}

ClaimEvent parse_claims_jsonl_row(std::uint64_t line_no, std::string_view line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedRow(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw MalformedRow(line_no, "JSONL row is not an object");
  auto str = [&](const char* key) -> std::string {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
      throw MalformedRow(line_no, std::string("missing string field '") + key + "'");
    }
    return obj.at(key).get<std::string>();
  };
  const std::string pid = str("patient_id");
  if (pid.empty()) throw MalformedRow(line_no, "empty patient_id");
  ClaimEvent event;
  event.patient_id = pid;
  try {
    event.date = parse_iso_date(str("date"));
  } catch (const MalformedDate& e) {
    throw MalformedRow(line_no, e.what());
  }
  CodeSystem system;
  try {
    system = code_system_from_string(str("code_system"));
  } catch (const UnknownCodeSystem& e) {
    throw MalformedRow(line_no, e.what());
  }
  try {
    event.code = normalize_code(system, str("code"));
  } catch (const EmptyCode& e) {
    throw MalformedRow(line_no, e.what());
  }
  return event;
}

}  // namespace

ClaimsFormat claims_format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".jsonl" ? ClaimsFormat::Jsonl : ClaimsFormat::Csv;
}

ClaimsReader::ClaimsReader(std::istream& in, ReadOptions options)
    : in_(in), options_(options) {}

bool ClaimsReader::next_line(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_number_;
    strip_cr(line);
    if (line.empty()) continue;  // blank lines are not rows
    if (!header_checked_ && options_.format == ClaimsFormat::Csv) {
      header_checked_ = true;
      if (line != kClaimsHeader) {
        throw IngestError("claims file: expected header '" + std::string(kClaimsHeader) +
                          "', got '" + line + "'");
      }
      continue;
    }
    header_checked_ = true;
    return true;
  }
  return false;
}

std::optional<ClaimEvent> ClaimsReader::read_row() {
  std::string line;
  while (next_line(line)) {
    ++report_.rows_read;
    try {
      ClaimEvent event = options_.format == ClaimsFormat::Csv
                             ? parse_claims_csv_row(line_number_, line)
                             : parse_claims_jsonl_row(line_number_, line);
      ++report_.rows_accepted;
      return event;
    } catch (const MalformedRow& e) {
      if (options_.strict) throw;
      ++report_.rows_rejected;
      if (report_.rejects.size() < options_.reject_cap) {
        report_.rejects.push_back(RejectEntry{e.line_number, e.what()});
      }
    }
  }
  return std::nullopt;
}

std::optional<PatientBundle> ClaimsReader::next() {
  if (!pending_) {
    if (done_) return std::nullopt;
    pending_ = read_row();
    if (!pending_) {
      done_ = true;
      return std::nullopt;
    }
  }

  PatientBundle bundle;
  bundle.patient_id = pending_->patient_id;
  if (!last_emitted_id_.empty() && bundle.patient_id <= last_emitted_id_) {
    throw UnsortedInput("patient '" + bundle.patient_id + "' appears after group '" +
                        last_emitted_id_ + "' closed; input must be grouped and ascending");
  }
  bundle.events.push_back(std::move(*pending_));
  pending_.reset();

  while (auto event = read_row()) {
    if (event->patient_id != bundle.patient_id) {
      pending_ = std::move(event);
      break;
    }
    bundle.events.push_back(std::move(*event));
  }
  if (!pending_) done_ = true;

  std::sort(bundle.events.begin(), bundle.events.end());
  last_emitted_id_ = bundle.patient_id;
  return bundle;
}

namespace {

Demographics parse_demographics_csv_row(std::uint64_t line_no, std::string_view line) {
  const auto fields = split_fields(line);
  if (fields.size() != 4) {
    throw MalformedRow(line_no, "expected 4 columns, got " + std::to_string(fields.size()));
  }
  if (fields[0].empty()) throw MalformedRow(line_no, "empty patient_id");
  Demographics demo;
  demo.patient_id = std::string(fields[0]);

  int age = 0;
  const auto* first = fields[1].data();
  const auto* last = fields[1].data() + fields[1].size();
  const auto [ptr, ec] = std::from_chars(first, last, age);
  if (ec != std::errc() || ptr != last || age < 0) {
    throw MalformedRow(line_no, "bad age '" + std::string(fields[1]) + "'");
  }
  demo.age = age;

  const auto sex = sex_from_string(fields[2]);
  if (!sex) throw MalformedRow(line_no, "bad sex '" + std::string(fields[2]) + "' (want M/F/U)");
  demo.sex = *sex;

  if (!fields[3].empty()) {
    if (fields[3].size() != 2) {
      throw MalformedRow(line_no, "zip2 must be two characters or empty");
    }
    demo.zip2 = std::string(fields[3]);
  }
  return demo;
}

Demographics parse_demographics_jsonl_row(std::uint64_t line_no, std::string_view line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedRow(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw MalformedRow(line_no, "JSONL row is not an object");

  Demographics demo;
  if (!obj.contains("patient_id") || !obj.at("patient_id").is_string()) {
    throw MalformedRow(line_no, "missing string field 'patient_id'");
  }
  demo.patient_id = obj.at("patient_id").get<std::string>();
  if (demo.patient_id.empty()) throw MalformedRow(line_no, "empty patient_id");

  if (!obj.contains("age") || !obj.at("age").is_number_integer() ||
      obj.at("age").get<std::int64_t>() < 0) {
    throw MalformedRow(line_no, "bad age");
  }
  demo.age = obj.at("age").get<int>();

  if (!obj.contains("sex") || !obj.at("sex").is_string()) {
    throw MalformedRow(line_no, "missing string field 'sex'");
  }
  const auto sex = sex_from_string(obj.at("sex").get<std::string>());
  if (!sex) throw MalformedRow(line_no, "bad sex (want M/F/U)");
  demo.sex = *sex;

  if (obj.contains("zip2") && !obj.at("zip2").is_null()) {
    if (!obj.at("zip2").is_string()) throw MalformedRow(line_no, "zip2 must be a string");
    const std::string zip = obj.at("zip2").get<std::string>();
    if (!zip.empty()) {
      if (zip.size() != 2) throw MalformedRow(line_no, "zip2 must be two characters or empty");
      demo.zip2 = zip;
    }
  }
  return demo;
}

}  // namespace

std::map<std::string, Demographics> read_demographics(std::istream& in, ClaimsFormat format) {
  std::map<std::string, Demographics> result;
  std::string line;
  std::uint64_t line_no = 0;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    if (!header_checked && format == ClaimsFormat::Csv) {
      header_checked = true;
      if (line != kDemographicsHeader) {
        throw IngestError("demographics file: expected header '" +
                          std::string(kDemographicsHeader) + "', got '" + line + "'");
      }
      continue;
    }
    header_checked = true;
    Demographics demo = format == ClaimsFormat::Csv
                            ? parse_demographics_csv_row(line_no, line)
                            : parse_demographics_jsonl_row(line_no, line);
    const std::string pid = demo.patient_id;
    if (!result.emplace(pid, std::move(demo)).second) {
      throw DuplicatePatient("duplicate patient '" + pid + "' at line " +
                             std::to_string(line_no));
    }
  }
  return result;
}

std::map<std::string, Demographics> read_demographics_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open demographics file: " + path.string());
  return read_demographics(in, claims_format_for_path(path));
}

namespace {

// Sort key: (patient_id, date text, original line number). ISO dates order
// lexicographically, so no date parsing is needed here; rows the reader will
// reject still flow through keyed by whatever fields they do have.
struct SortRow {
  std::string pid;
  std::string date;
  std::uint64_t line_no{0};
  std::string raw;

  bool operator<(const SortRow& other) const {
    if (int c = pid.compare(other.pid); c != 0) return c < 0;
    if (int c = date.compare(other.date); c != 0) return c < 0;
    return line_no < other.line_no;
  }
};

SortRow make_sort_row(ClaimsFormat format, std::uint64_t line_no, std::string line) {
  SortRow row;
  row.line_no = line_no;
  if (format == ClaimsFormat::Csv) {
    const auto fields = split_fields(line);
    if (!fields.empty()) row.pid = std::string(fields[0]);
    if (fields.size() > 1) row.date = std::string(fields[1]);
  } else {
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_object()) {
      if (obj.contains("patient_id") && obj.at("patient_id").is_string()) {
        row.pid = obj.at("patient_id").get<std::string>();
      }
      if (obj.contains("date") && obj.at("date").is_string()) {
        row.date = obj.at("date").get<std::string>();
      }
    }
  }
  row.raw = std::move(line);
  return row;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_run_record(std::ostream& out, const SortRow& row) {
  write_u32(out, static_cast<std::uint32_t>(row.pid.size()));
  out.write(row.pid.data(), std::streamsize(row.pid.size()));
  write_u32(out, static_cast<std::uint32_t>(row.date.size()));
  out.write(row.date.data(), std::streamsize(row.date.size()));
  write_u64(out, row.line_no);
  write_u32(out, static_cast<std::uint32_t>(row.raw.size()));
  out.write(row.raw.data(), std::streamsize(row.raw.size()));
}

bool read_run_record(std::istream& in, SortRow& row) {
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len))) return false;
  row.pid.resize(len);
  in.read(row.pid.data(), len);
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  row.date.resize(len);
  in.read(row.date.data(), len);
  in.read(reinterpret_cast<char*>(&row.line_no), sizeof(row.line_no));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  row.raw.resize(len);
  in.read(row.raw.data(), len);
  if (!in) throw IoFailure("truncated sort run file");
  return true;
}

}  // namespace

void external_sort_claims(std::istream& in, std::ostream& out,
                          const std::filesystem::path& scratch_dir, SortOptions options) {
  std::vector<std::filesystem::path> run_paths;
  std::vector<SortRow> buffer;
  buffer.reserve(std::min<std::size_t>(options.max_buffer_rows, 1u << 16));

  auto spill = [&]() {
    std::sort(buffer.begin(), buffer.end());
    std::error_code ec;
    std::filesystem::create_directories(scratch_dir, ec);
    auto path = scratch_dir / ("sort_run_" + std::to_string(run_paths.size()) + ".bin");
    std::ofstream run(path, std::ios::binary | std::ios::trunc);
    if (!run) throw IoFailure("cannot create sort run file: " + path.string());
    for (const auto& row : buffer) write_run_record(run, row);
    run.flush();
    if (!run) throw IoFailure("failed writing sort run file: " + path.string());
    run_paths.push_back(std::move(path));
    buffer.clear();
  };

  std::string line;
  std::uint64_t line_no = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    if (!header_done && options.format == ClaimsFormat::Csv) {
      header_done = true;
      out << line << '\n';  // header passes through
      continue;
    }
    header_done = true;
    buffer.push_back(make_sort_row(options.format, line_no, std::move(line)));
    if (buffer.size() >= options.max_buffer_rows) spill();
  }
  if (in.bad()) throw IoFailure("read error while sorting claims");

  if (run_paths.empty()) {
    std::sort(buffer.begin(), buffer.end());
    for (const auto& row : buffer) out << row.raw << '\n';
    if (!out) throw IoFailure("write error while sorting claims");
    return;
  }

  if (!buffer.empty()) spill();

  struct MergeSource {
    std::ifstream stream;
    SortRow row;
  };
  std::vector<std::unique_ptr<MergeSource>> sources;
  for (const auto& path : run_paths) {
    auto src = std::make_unique<MergeSource>();
    src->stream.open(path, std::ios::binary);
    if (!src->stream) throw IoFailure("cannot reopen sort run file: " + path.string());
    if (read_run_record(src->stream, src->row)) sources.push_back(std::move(src));
  }

  auto greater_by_key = [](const MergeSource* a, const MergeSource* b) { return b->row < a->row; };
  std::priority_queue<MergeSource*, std::vector<MergeSource*>, decltype(greater_by_key)> heap(
      greater_by_key);
  for (auto& src : sources) heap.push(src.get());

  while (!heap.empty()) {
    MergeSource* src = heap.top();
    heap.pop();
    out << src->row.raw << '\n';
    if (read_run_record(src->stream, src->row)) heap.push(src);
  }
  if (!out) throw IoFailure("write error while sorting claims");

  for (const auto& path : run_paths) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
}

}  // namespace horizons
