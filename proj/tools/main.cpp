#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "horizons/engine.hpp"
#include "horizons/ingest.hpp"
#include "horizons/report.hpp"
#include "horizons/results_io.hpp"
#include "horizons/rules.hpp"
#include "horizons/sensitivity.hpp"
#include "horizons/synth.hpp"
#include "horizons/version.hpp"
#include "support.hpp"

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace horizons;
using cli::PendingFile;
using cli::ScratchDir;
using cli::UsageError;

std::int64_t parse_int64(const std::string& text, const std::string& what) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw UsageError(what + ": '" + text + "' is not an integer");
  return value;
}

/// "A..B" inclusive, A <= B. Expanded to the full value list.
std::vector<std::int64_t> parse_range(const std::string& text, const std::string& flag) {
  std::size_t sep = text.find("..");
  if (sep == std::string::npos)
    throw UsageError(flag + ": expected A..B, got '" + text + "'");
  std::int64_t lo = parse_int64(text.substr(0, sep), flag);
  std::int64_t hi = parse_int64(text.substr(sep + 2), flag);
  if (lo > hi)
    throw UsageError(flag + ": range start " + std::to_string(lo) +
                     " exceeds end " + std::to_string(hi));
  std::vector<std::int64_t> values;
  values.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t v = lo; v <= hi; ++v) values.push_back(v);
  return values;
}

std::vector<int> parse_bins(const std::string& text) {
  std::vector<int> bounds;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string token = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    std::int64_t v = parse_int64(token, "--bins");
    if (v < 0 || v > 130) throw UsageError("--bins: bound " + token + " out of range");
    bounds.push_back(static_cast<int>(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return bounds;
}

ordered_json file_entry(const fs::path& path) {
  return {{"path", path.string()}, {"sha256", cli::sha256_file(path)}};
}

void write_manifest(const fs::path& out_path, ordered_json manifest) {
  PendingFile file(out_path);
  file.stream() << manifest.dump(2) << '\n';
  file.commit();
}

ordered_json manifest_skeleton(const std::string& command, const std::string& started_at) {
  ordered_json m;
  m["tool"] = "horizons";
  m["version"] = kVersion;
  m["command"] = command;
  m["hash_algorithm"] = "sha256";
  m["started_at"] = started_at;
  return m;
}

struct ClassifyArgs {
  std::string claims, rules, out, demographics;
  bool sorted = false;
  bool strict = false;
  unsigned workers = 1;
};

int run_classify(const ClassifyArgs& args) {
  const std::string started_at = cli::iso_utc_now();
  RuleSet rules = parse_rules_file(args.rules);

  std::map<std::string, Demographics> demographics;
  if (!args.demographics.empty())
    demographics = read_demographics_file(args.demographics);

  const ClaimsFormat format = claims_format_for_path(args.claims);
  std::ifstream claims_in(args.claims, std::ios::binary);
  if (!claims_in) throw IoFailure("cannot open claims file: " + args.claims);

  std::optional<ScratchDir> scratch;
  std::ifstream sorted_in;
  std::istream* feed = &claims_in;
  if (!args.sorted) {
    scratch.emplace();
    const fs::path sorted_path = scratch->path() / "claims.sorted";
    {
      std::ofstream sort_out(sorted_path, std::ios::binary | std::ios::trunc);
      if (!sort_out) throw IoFailure("cannot create scratch file: " + sorted_path.string());
      external_sort_claims(claims_in, sort_out, scratch->path(), {format, 1u << 20});
    }
    sorted_in.open(sorted_path, std::ios::binary);
    if (!sorted_in) throw IoFailure("cannot reopen sorted claims: " + sorted_path.string());
    feed = &sorted_in;
  }

  ClaimsReader reader(*feed, {format, args.strict, 100});

  std::uint64_t patients = 0;
  std::uint64_t by_status[4] = {0, 0, 0, 0};
  {
    PendingFile out(args.out);
    classify_stream([&reader] { return reader.next(); }, rules, args.workers,
                    [&](const MatchOutcome& outcome) {
                      out.stream() << result_jsonl_line(outcome) << '\n';
                      ++patients;
                      ++by_status[static_cast<int>(outcome.status)];
                    });
    out.commit();
  }

  const IngestReport& report = reader.report();

  ordered_json manifest = manifest_skeleton("classify", started_at);
  manifest["flags"] = {{"claims", args.claims},   {"rules", args.rules},
                       {"out", args.out},         {"demographics", args.demographics},
                       {"sorted", args.sorted},   {"strict", args.strict},
                       {"workers", args.workers}};
  manifest["inputs"]["claims"] = file_entry(args.claims);
  manifest["inputs"]["rules"] = file_entry(args.rules);
  if (!args.demographics.empty())
    manifest["inputs"]["demographics"] = file_entry(args.demographics);
  manifest["outputs"]["results"] = file_entry(args.out);
  manifest["counts"] = {
      {"rows_read", report.rows_read},
      {"rows_accepted", report.rows_accepted},
      {"rows_rejected", report.rows_rejected},
      {"patients", patients},
      {"matched", by_status[static_cast<int>(MatchStatus::Matched)]},
      {"no_anchor", by_status[static_cast<int>(MatchStatus::NoAnchor)]},
      {"anchor_no_admission", by_status[static_cast<int>(MatchStatus::AnchorNoAdmission)]},
      {"failed_validation", by_status[static_cast<int>(MatchStatus::FailedValidation)]}};
  if (!args.demographics.empty())
    manifest["counts"]["demographics_patients"] = demographics.size();
  manifest["finished_at"] = cli::iso_utc_now();
  write_manifest(args.out + ".manifest.json", std::move(manifest));

  std::cout << "classified " << patients << " patients: "
            << by_status[static_cast<int>(MatchStatus::Matched)] << " matched, "
            << by_status[static_cast<int>(MatchStatus::NoAnchor)] << " no_anchor, "
            << by_status[static_cast<int>(MatchStatus::AnchorNoAdmission)]
            << " anchor_no_admission, "
            << by_status[static_cast<int>(MatchStatus::FailedValidation)]
            << " failed_validation (" << report.rows_read << " rows read, "
            << report.rows_rejected << " rejected)\n";
  std::cout << "results: " << args.out << '\n';
  return 0;
}

struct ReportArgs {
  std::string results, demographics, out, reference;
  std::string bins = "18,50,65";
  bool by_sex = false;
};

int run_report(const ReportArgs& args) {
  const std::string started_at = cli::iso_utc_now();
  AgeBins bins(parse_bins(args.bins));  // BadAgeBins -> usage error

  std::vector<ResultRow> rows = read_results_file(args.results);
  std::map<std::string, Demographics> demographics =
      read_demographics_file(args.demographics);

  std::vector<CohortRow> cohort = aggregate_cohort(rows, demographics, bins, args.by_sex);
  {
    PendingFile out(args.out);
    write_cohort_csv(out.stream(), cohort);
    out.commit();
  }

  fs::path comparison_path;
  std::size_t comparison_rows = 0;
  if (!args.reference.empty()) {
    std::vector<ReferenceRow> reference = load_reference_file(args.reference);
    std::vector<ComparisonRow> comparison = compare_reference(cohort, reference);
    comparison_rows = comparison.size();
    comparison_path = fs::path(args.out).replace_extension(".comparison.csv");
    PendingFile out(comparison_path);
    write_comparison_csv(out.stream(), comparison);
    out.commit();
  }

  ordered_json manifest = manifest_skeleton("report", started_at);
  manifest["flags"] = {{"results", args.results}, {"demographics", args.demographics},
                       {"bins", args.bins},       {"by_sex", args.by_sex},
                       {"reference", args.reference}, {"out", args.out}};
  manifest["inputs"]["results"] = file_entry(args.results);
  manifest["inputs"]["demographics"] = file_entry(args.demographics);
  if (!args.reference.empty()) manifest["inputs"]["reference"] = file_entry(args.reference);
  manifest["outputs"]["cohort"] = file_entry(args.out);
  if (!comparison_path.empty())
    manifest["outputs"]["comparison"] = file_entry(comparison_path);
  manifest["counts"] = {{"result_rows", rows.size()},
                        {"demographics_patients", demographics.size()},
                        {"cohort_rows", cohort.size()},
                        {"comparison_rows", comparison_rows}};
  manifest["finished_at"] = cli::iso_utc_now();
  write_manifest(args.out + ".manifest.json", std::move(manifest));

  std::cout << "wrote " << cohort.size() << " cohort rows: " << args.out << '\n';
  if (!comparison_path.empty())
    std::cout << "wrote " << comparison_rows
              << " comparison rows: " << comparison_path.string() << '\n';
  return 0;
}

struct SweepArgs {
  std::string claims, rules, out;
  std::string lo, hi;
};

int run_sweep(const SweepArgs& args) {
  const std::string started_at = cli::iso_utc_now();
  std::vector<std::int64_t> lo_values = parse_range(args.lo, "--lo");
  std::vector<std::int64_t> hi_values = parse_range(args.hi, "--hi");

  RuleSet rules = parse_rules_file(args.rules);
  const ClaimsFormat format = claims_format_for_path(args.claims);
  std::ifstream claims_in(args.claims, std::ios::binary);
  if (!claims_in) throw IoFailure("cannot open claims file: " + args.claims);

  // The whole cohort is reclassified once per grid cell, so bundles are
  // ingested fully up front; sort first, then any feed order is accepted.
  ScratchDir scratch;
  const fs::path sorted_path = scratch.path() / "claims.sorted";
  {
    std::ofstream sort_out(sorted_path, std::ios::binary | std::ios::trunc);
    if (!sort_out) throw IoFailure("cannot create scratch file: " + sorted_path.string());
    external_sort_claims(claims_in, sort_out, scratch.path(), {format, 1u << 20});
  }
  std::ifstream sorted_in(sorted_path, std::ios::binary);
  if (!sorted_in) throw IoFailure("cannot reopen sorted claims: " + sorted_path.string());

  ClaimsReader reader(sorted_in, {format, false, 100});
  std::vector<PatientBundle> bundles;
  while (auto bundle = reader.next()) bundles.push_back(std::move(*bundle));

  std::vector<SweepCell> cells = horizon_sweep(bundles, rules, lo_values, hi_values);
  {
    PendingFile out(args.out);
    write_sweep_csv(out.stream(), cells);
    out.commit();
  }

  std::vector<MatchOutcome> base_outcomes = classify_all(bundles, rules);
  OffsetHistogram histogram = offset_histogram(base_outcomes);
  const fs::path histogram_path = fs::path(args.out).replace_extension(".histogram.csv");
  {
    PendingFile out(histogram_path);
    write_histogram_csv(out.stream(), histogram);
    out.commit();
  }

  const IngestReport& report = reader.report();
  ordered_json manifest = manifest_skeleton("sweep", started_at);
  manifest["flags"] = {{"claims", args.claims}, {"rules", args.rules},
                       {"lo", args.lo},         {"hi", args.hi},
                       {"out", args.out}};
  manifest["inputs"]["claims"] = file_entry(args.claims);
  manifest["inputs"]["rules"] = file_entry(args.rules);
  manifest["outputs"]["sweep"] = file_entry(args.out);
  manifest["outputs"]["histogram"] = file_entry(histogram_path);
  manifest["counts"] = {{"rows_read", report.rows_read},
                        {"rows_accepted", report.rows_accepted},
                        {"rows_rejected", report.rows_rejected},
                        {"patients", bundles.size()},
                        {"cells", cells.size()},
                        {"histogram_total", histogram.total}};
  manifest["finished_at"] = cli::iso_utc_now();
  write_manifest(args.out + ".manifest.json", std::move(manifest));

  std::cout << "wrote " << cells.size() << " sweep cells: " << args.out << '\n';
  std::cout << "wrote offset histogram (" << histogram.total
            << " matched patients): " << histogram_path.string() << '\n';
  return 0;
}

struct SynthArgs {
  std::string spec, rules, out_dir;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& args) {
  const std::string started_at = cli::iso_utc_now();
  SynthSpec spec = load_synth_spec_file(args.spec);
  spec.seed = args.seed;
  RuleSet rules = parse_rules_file(args.rules);

  SynthResult result = generate_cohort(spec, rules, args.out_dir);

  // Fold the run manifest into metadata.json so the output stays a four-file
  // contract. Only this "run" section differs between identical-seed runs.
  ordered_json metadata;
  {
    std::ifstream in(result.metadata_path);
    metadata = ordered_json::parse(in);
  }
  ordered_json run = manifest_skeleton("synth", started_at);
  run.erase("tool");
  run.erase("version");
  run["flags"] = {{"spec", args.spec},
                  {"rules", args.rules},
                  {"seed", args.seed},
                  {"out_dir", args.out_dir}};
  run["inputs"]["spec"] = file_entry(args.spec);
  run["inputs"]["rules"] = file_entry(args.rules);
  run["outputs"]["claims"] = file_entry(result.claims_path);
  run["outputs"]["demographics"] = file_entry(result.demographics_path);
  run["outputs"]["labels"] = file_entry(result.labels_path);
  run["finished_at"] = cli::iso_utc_now();
  metadata["run"] = std::move(run);
  write_manifest(result.metadata_path, std::move(metadata));

  std::cout << "generated " << result.patients << " patients (" << result.claims_rows
            << " claim rows) in " << args.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-horizon claims classification toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  ClassifyArgs classify_args;
  CLI::App* classify =
      app.add_subcommand("classify", "Classify a claims file against a rule file");
  classify->add_option("--claims", classify_args.claims, "Claims file (CSV or JSONL)")
      ->required();
  classify->add_option("--rules", classify_args.rules, "Rule file (JSON)")->required();
  classify->add_option("--out", classify_args.out, "Results JSONL path")->required();
  classify->add_option("--demographics", classify_args.demographics,
                       "Demographics file; validated and recorded in the manifest");
  classify->add_flag("--sorted", classify_args.sorted,
                     "Input is already grouped by ascending patient_id (skips the sort pass)");
  classify->add_flag("--strict", classify_args.strict, "Abort on the first malformed row");
  classify->add_option("--workers", classify_args.workers, "Worker threads")
      ->check(CLI::PositiveNumber);

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "Aggregate results into a cohort table");
  report->add_option("--results", report_args.results, "Results JSONL from classify")
      ->required();
  report->add_option("--demographics", report_args.demographics, "Demographics file")
      ->required();
  report->add_option("--bins", report_args.bins,
                     "Ascending age lower bounds (default 18,50,65)");
  report->add_flag("--by-sex", report_args.by_sex, "Add per-sex splits of every stratum");
  report->add_option("--reference", report_args.reference,
                     "Reference JSON; also writes a comparison CSV");
  report->add_option("--out", report_args.out, "Cohort CSV path")->required();

  SweepArgs sweep_args;
  CLI::App* sweep =
      app.add_subcommand("sweep", "Reclassify across a grid of primary horizons");
  sweep->add_option("--claims", sweep_args.claims, "Claims file (CSV or JSONL)")->required();
  sweep->add_option("--rules", sweep_args.rules, "Rule file (JSON)")->required();
  sweep->add_option("--lo", sweep_args.lo, "Horizon start range, e.g. -4..0")->required();
  sweep->add_option("--hi", sweep_args.hi, "Horizon end range, e.g. 7..21")->required();
  sweep->add_option("--out", sweep_args.out, "Sweep CSV path")->required();

  SynthArgs synth_args;
  CLI::App* synth =
      app.add_subcommand("synth", "Generate a labeled synthetic cohort");
  synth->add_option("--spec", synth_args.spec, "Generator spec (JSON)")->required();
  synth->add_option("--rules", synth_args.rules, "Rule file (JSON)")->required();
  synth->add_option("--seed", synth_args.seed, "Generator seed")->required();
  synth->add_option("--out-dir", synth_args.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(classify)) return run_classify(classify_args);
    if (app.got_subcommand(report)) return run_report(report_args);
    if (app.got_subcommand(sweep)) return run_sweep(sweep_args);
    if (app.got_subcommand(synth)) return run_synth(synth_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const BadAgeBins& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
