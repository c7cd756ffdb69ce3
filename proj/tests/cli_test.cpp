#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "horizons/results_io.hpp"
#include "horizons/synth.hpp"
#include "json.hpp"
#include "testutil.hpp"

using namespace horizons;
using testutil::read_file;
using testutil::TempDir;
using testutil::write_file;

namespace {

struct RunResult {
  int exit_code{-1};
  std::string out;
  std::string err;
};

// Runs the built binary with stdout/stderr captured into scratch files.
RunResult run_cli(const TempDir& dir, const std::string& args) {
  const auto out_path = dir.path() / "cli.stdout";
  const auto err_path = dir.path() / "cli.stderr";
  const std::string cmd = std::string("\"") + HORIZONS_CLI_PATH + "\" " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int raw = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

std::string repo_file(const char* rel) {
  return (std::filesystem::path(HORIZONS_REPO_DIR) / rel).string();
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("classify reproduces the worked example end to end") {
  TempDir dir;
  const auto results = dir.path() / "results.jsonl";
  const auto r = run_cli(dir, "classify --claims " + repo_file("fixtures/example_claims.csv") +
                                  " --rules " + repo_file("rules/covid19.json") +
                                  " --demographics " +
                                  repo_file("fixtures/example_demographics.csv") + " --out " +
                                  q(results));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  CHECK(read_file(results) ==
        R"({"patient_id":"P0001","status":"matched","anchor_date":"2020-03-08",)"
        R"("admission_date":"2020-03-10","offset":2,)"
        R"("validation_hits":[{"clause":"resp_dx","code":"J22","date":"2020-03-13","offset":3}]})"
        "\n");

  const auto manifest = nlohmann::json::parse(read_file(results.string() + ".manifest.json"));
  CHECK(manifest.at("tool") == "horizons");
  CHECK(manifest.at("command") == "classify");
  CHECK(manifest.at("hash_algorithm") == "sha256");
  CHECK(manifest.at("counts").at("patients") == 1);
  CHECK(manifest.at("counts").at("matched") == 1);
  CHECK(manifest.at("counts").at("rows_read") == 3);
  CHECK(manifest.at("inputs").at("claims").at("sha256").get<std::string>().size() == 64);
}

TEST_CASE("fatal input problems exit 1 with a diagnostic") {
  TempDir dir;
  const auto r = run_cli(dir, "classify --claims /nonexistent/claims.csv --rules " +
                                  repo_file("rules/covid19.json") + " --out " +
                                  q(dir.path() / "x.jsonl"));
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("error") != std::string::npos);

  const auto bad_rules = dir.path() / "broken.json";
  write_file(bad_rules, "{");
  const auto r2 = run_cli(dir, "classify --claims " + repo_file("fixtures/example_claims.csv") +
                                   " --rules " + q(bad_rules) + " --out " +
                                   q(dir.path() / "x.jsonl"));
  CHECK(r2.exit_code == 1);
  CHECK(!r2.err.empty());

  // strict mode turns a malformed row into a fatal error
  const auto mangled = dir.path() / "mangled.csv";
  write_file(mangled, "patient_id,date,code_system,code\nP1,2020-99-01,ICD10,U07.1\n");
  const auto r3 = run_cli(dir, "classify --strict --claims " + q(mangled) + " --rules " +
                                   repo_file("rules/covid19.json") + " --out " +
                                   q(dir.path() / "x.jsonl"));
  CHECK(r3.exit_code == 1);
}

TEST_CASE("usage problems exit 2") {
  TempDir dir;

  SUBCASE("no subcommand") {
    CHECK(run_cli(dir, "").exit_code == 2);
  }

  SUBCASE("missing required flag") {
    const auto r = run_cli(dir, "classify --claims x.csv --rules y.json");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("--out") != std::string::npos);
  }

  SUBCASE("zero workers") {
    const auto r = run_cli(dir, "classify --claims x.csv --rules y.json --out z --workers 0");
    CHECK(r.exit_code == 2);
  }

  SUBCASE("descending bins") {
    const auto results = dir.path() / "r.jsonl";
    write_file(results, "");
    const auto demo = dir.path() / "d.csv";
    write_file(demo, "patient_id,age,sex,zip2\n");
    const auto r = run_cli(dir, "report --results " + q(results) + " --demographics " + q(demo) +
                                    " --bins 50,18 --out " + q(dir.path() / "c.csv"));
    CHECK(r.exit_code == 2);
  }

  SUBCASE("unknown flag") {
    CHECK(run_cli(dir, "classify --frobnicate").exit_code == 2);
  }

  SUBCASE("backwards sweep range") {
    const auto r = run_cli(dir, "sweep --claims x.csv --rules y.json --lo 4..1 --hi 7..7 --out z");
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("classify output is worker-count invariant through the CLI") {
  TempDir dir;
  const auto spec = dir.path() / "spec.json";
  write_file(spec, R"({
    "n_matched": 2500, "n_no_anchor": 2500,
    "n_anchor_no_admission": 2500, "n_failed_validation": 2500,
    "date_span": {"start": "2020-01-01", "end": "2020-12-31"},
    "noise_events_per_patient": 1.0,
    "offset_distribution": [{"offset": -1, "weight": 1}, {"offset": 3, "weight": 2}]
  })");

  const auto r = run_cli(dir, "synth --spec " + q(spec) + " --rules " +
                                  repo_file("rules/covid19.json") + " --seed 21 --out-dir " +
                                  q(dir.path() / "cohort"));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  const auto claims = dir.path() / "cohort" / "claims.csv";
  const auto one = dir.path() / "one.jsonl";
  const auto eight = dir.path() / "eight.jsonl";
  REQUIRE(run_cli(dir, "classify --sorted --workers 1 --claims " + q(claims) + " --rules " +
                           repo_file("rules/covid19.json") + " --out " + q(one))
              .exit_code == 0);
  REQUIRE(run_cli(dir, "classify --sorted --workers 8 --claims " + q(claims) + " --rules " +
                           repo_file("rules/covid19.json") + " --out " + q(eight))
              .exit_code == 0);

  const std::string bytes_one = read_file(one);
  CHECK(!bytes_one.empty());
  CHECK(bytes_one == read_file(eight));

  // and the pipeline closes: labels verified against CLI results
  const auto outcomes = read_results_file(one);
  const auto labels = read_labels_file(dir.path() / "cohort" / "labels.csv");
  CHECK(verify_labels(outcomes, labels).empty());
}

TEST_CASE("unsorted input classifies identically to presorted input") {
  TempDir dir;
  // Same events as the worked example, deliberately scrambled.
  const auto scrambled = dir.path() / "scrambled.csv";
  write_file(scrambled,
             "patient_id,date,code_system,code\n"
             "P0002,2020-04-01,CPT,99221\n"
             "P0001,2020-03-13,ICD10,J22\n"
             "P0001,2020-03-08,ICD10,U07.1\n"
             "P0002,2020-03-30,ICD10,U07.1\n"
             "P0001,2020-03-10,CPT,99221\n");

  const auto out = dir.path() / "results.jsonl";
  const auto r = run_cli(dir, "classify --claims " + q(scrambled) + " --rules " +
                                  repo_file("rules/covid19.json") + " --out " + q(out));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  const auto rows = read_results_file(out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].patient_id == "P0001");
  CHECK(rows[0].status == MatchStatus::Matched);
  CHECK(rows[1].patient_id == "P0002");
  CHECK(rows[1].status == MatchStatus::FailedValidation);
}

TEST_CASE("report builds the cohort table and reference comparison") {
  TempDir dir;
  const auto claims = dir.path() / "claims.csv";
  write_file(claims,
             "patient_id,date,code_system,code\n"
             "p1,2020-03-01,ICD10,U07.1\n"
             "p1,2020-03-03,CPT,99221\n"
             "p1,2020-03-05,ICD10,J22\n"
             "p2,2020-03-05,ICD10,J22\n"
             "p3,2020-04-01,ICD10,U07.1\n"
             "p3,2020-04-02,CPT,99222\n"
             "p3,2020-04-06,ICD10,J40\n"
             "p4,2020-05-01,ICD10,U07.1\n"
             "p4,2020-05-02,CPT,99221\n");
  const auto demographics = dir.path() / "demographics.csv";
  write_file(demographics,
             "patient_id,age,sex,zip2\n"
             "p1,30,M,\n"
             "p2,55,F,\n"
             "p3,70,M,\n"
             "p4,70,F,\n");

  const auto results = dir.path() / "results.jsonl";
  REQUIRE(run_cli(dir, "classify --claims " + q(claims) + " --rules " +
                           repo_file("rules/covid19.json") + " --out " + q(results))
              .exit_code == 0);

  const auto cohort = dir.path() / "cohort.csv";
  const auto r = run_cli(dir, "report --results " + q(results) + " --demographics " +
                                  q(demographics) + " --reference " +
                                  repo_file("fixtures/cdc_table1.json") + " --out " + q(cohort));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  CHECK(read_file(cohort) ==
        "stratum,cases,hospitalized,percent\n"
        "18-49,1,1,100.0\n"
        "50-64,1,0,0.0\n"
        "65+,2,1,50.0\n"
        "all,4,2,50.0\n");

  CHECK(read_file(dir.path() / "cohort.comparison.csv") ==
        "stratum,ref_cases,ref_hosp,ref_pct,obs_cases,obs_hosp,obs_pct,diff_points\n"
        "18-49,51581445,1533679,3.0,1,1,100.0,97.0\n"
        "50-64,17377602,1604612,9.2,1,0,0.0,-9.2\n"
        "65+,10005696,2808089,28.1,2,1,50.0,21.9\n"
        "all,78964743,5946380,7.5,4,2,50.0,42.5\n");

  const auto manifest = nlohmann::json::parse(read_file(cohort.string() + ".manifest.json"));
  CHECK(manifest.at("command") == "report");
  CHECK(manifest.at("outputs").contains("comparison"));

  // rerunning overwrites cleanly (idempotent modulo timestamps)
  const auto again = run_cli(dir, "report --results " + q(results) + " --demographics " +
                                      q(demographics) + " --out " + q(cohort));
  REQUIRE(again.exit_code == 0);
  CHECK(read_file(cohort).find("65+,2,1,50.0") != std::string::npos);
}

TEST_CASE("reference comparison against an unpopulated stratum fails cleanly") {
  TempDir dir;
  const auto results = dir.path() / "results.jsonl";
  REQUIRE(run_cli(dir, "classify --claims " + repo_file("fixtures/example_claims.csv") +
                           " --rules " + repo_file("rules/covid19.json") + " --out " + q(results))
              .exit_code == 0);

  // One 52-year-old patient: the 18-49 and 65+ reference strata have no
  // observed cases, so their percentages are undefined.
  const auto r = run_cli(dir, "report --results " + q(results) + " --demographics " +
                                  repo_file("fixtures/example_demographics.csv") +
                                  " --reference " + repo_file("fixtures/cdc_table1.json") +
                                  " --out " + q(dir.path() / "cohort.csv"));
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("zero cases") != std::string::npos);
}

TEST_CASE("report with custom bins and sex splits") {
  TempDir dir;
  const auto results = dir.path() / "results.jsonl";
  REQUIRE(run_cli(dir, "classify --claims " + repo_file("fixtures/example_claims.csv") +
                           " --rules " + repo_file("rules/covid19.json") + " --out " + q(results))
              .exit_code == 0);

  const auto cohort = dir.path() / "cohort.csv";
  const auto r = run_cli(dir, "report --results " + q(results) + " --demographics " +
                                  repo_file("fixtures/example_demographics.csv") +
                                  " --bins 40,60 --by-sex --out " + q(cohort));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  const std::string bytes = read_file(cohort);
  CHECK(bytes.find("40-59,1,1,100.0\n40-59/F,1,1,100.0\n") != std::string::npos);
  CHECK(bytes.find("all/F,1,1,100.0\n") != std::string::npos);
}

TEST_CASE("sweep emits the grid, the histogram, and a consistent base cell") {
  TempDir dir;
  const auto spec = dir.path() / "spec.json";
  write_file(spec, R"({
    "n_matched": 300, "n_no_anchor": 100,
    "n_anchor_no_admission": 100, "n_failed_validation": 100,
    "date_span": {"start": "2020-01-01", "end": "2020-12-31"},
    "offset_distribution": [{"offset": -1, "weight": 1},
                            {"offset": 0, "weight": 2},
                            {"offset": 1, "weight": 1}]
  })");
  REQUIRE(run_cli(dir, "synth --spec " + q(spec) + " --rules " + repo_file("rules/covid19.json") +
                           " --seed 4 --out-dir " + q(dir.path() / "cohort"))
              .exit_code == 0);
  const auto claims = dir.path() / "cohort" / "claims.csv";

  const auto results = dir.path() / "results.jsonl";
  REQUIRE(run_cli(dir, "classify --claims " + q(claims) + " --rules " +
                           repo_file("rules/covid19.json") + " --out " + q(results))
              .exit_code == 0);
  const auto classify_manifest =
      nlohmann::json::parse(read_file(results.string() + ".manifest.json"));

  const auto sweep = dir.path() / "sweep.csv";
  const auto r = run_cli(dir, "sweep --claims " + q(claims) + " --rules " +
                                  repo_file("rules/covid19.json") +
                                  " --lo=-2..-1 --hi 13..14 --out " + q(sweep));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);

  const std::string grid = read_file(sweep);
  CHECK(grid.find("lo,hi,candidates_patients,matched_patients") == 0);
  CHECK(std::count(grid.begin(), grid.end(), '\n') == 5);  // header + 2x2 cells

  // The (-2,14) cell is the shipped horizon; it must agree with classify.
  const auto matched = classify_manifest.at("counts").at("matched").get<std::uint64_t>();
  const auto failed = classify_manifest.at("counts").at("failed_validation").get<std::uint64_t>();
  std::ostringstream base_row;
  base_row << "-2,14," << (matched + failed) << ',' << matched << '\n';
  CHECK(grid.find(base_row.str()) != std::string::npos);

  // All planted offsets sit in [-1,1], so the (-1,14) cell keeps every match.
  std::ostringstream narrow_row;
  narrow_row << "-1,14," << (matched + failed) << ',' << matched << '\n';
  CHECK(grid.find(narrow_row.str()) != std::string::npos);

  const std::string histogram = read_file(dir.path() / "sweep.histogram.csv");
  CHECK(histogram.find("offset,count") == 0);
  CHECK(histogram.find("-1,") != std::string::npos);
  CHECK(histogram.find("0,") != std::string::npos);
  CHECK(histogram.find("1,") != std::string::npos);
  CHECK(histogram.find("2,") == std::string::npos);
}

TEST_CASE("sweep over an empty claims file") {
  TempDir dir;
  const auto claims = dir.path() / "empty.csv";
  write_file(claims, "patient_id,date,code_system,code\n");
  const auto sweep = dir.path() / "sweep.csv";
  const auto r = run_cli(dir, "sweep --claims " + q(claims) + " --rules " +
                                  repo_file("rules/covid19.json") + " --lo=-2..-2 --hi 14..14 " +
                                  "--out " + q(sweep));
  CAPTURE(r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(read_file(sweep) ==
        "lo,hi,candidates_patients,matched_patients\n"
        "-2,14,0,0\n");
  CHECK(read_file(dir.path() / "sweep.histogram.csv") == "offset,count\n");
}

TEST_CASE("synth writes four files and repeats itself under one seed") {
  TempDir dir;
  const auto spec = dir.path() / "spec.json";
  write_file(spec, R"({
    "seed": 999,
    "n_matched": 25, "n_no_anchor": 25,
    "n_anchor_no_admission": 25, "n_failed_validation": 25,
    "date_span": {"start": "2020-01-01", "end": "2020-12-31"},
    "offset_distribution": [{"offset": 2, "weight": 1}]
  })");

  // The --seed flag overrides the seed stored in the spec file.
  const auto a = dir.path() / "a";
  const auto b = dir.path() / "b";
  REQUIRE(run_cli(dir, "synth --spec " + q(spec) + " --rules " + repo_file("rules/covid19.json") +
                           " --seed 11 --out-dir " + q(a))
              .exit_code == 0);
  REQUIRE(run_cli(dir, "synth --spec " + q(spec) + " --rules " + repo_file("rules/covid19.json") +
                           " --seed 11 --out-dir " + q(b))
              .exit_code == 0);

  for (const char* name : {"claims.csv", "demographics.csv", "labels.csv"}) {
    CHECK(read_file(a / name) == read_file(b / name));
  }
  const auto meta = nlohmann::json::parse(read_file(a / "metadata.json"));
  CHECK(meta.at("spec").at("seed") == 11);
  CHECK(meta.at("patients") == 100);
  CHECK(meta.at("run").at("flags").at("seed") == 11);
  CHECK(meta.at("run").at("outputs").contains("claims"));

  // A different seed shifts the data.
  const auto c = dir.path() / "c";
  REQUIRE(run_cli(dir, "synth --spec " + q(spec) + " --rules " + repo_file("rules/covid19.json") +
                           " --seed 12 --out-dir " + q(c))
              .exit_code == 0);
  CHECK(read_file(a / "claims.csv") != read_file(c / "claims.csv"));

  // Invalid spec exits 1.
  const auto bad_spec = dir.path() / "bad.json";
  write_file(bad_spec, R"({
    "n_matched": 1,
    "date_span": {"start": "2020-01-01", "end": "2020-12-31"},
    "offset_distribution": [{"offset": 99, "weight": 1}]
  })");
  const auto rbad = run_cli(dir, "synth --spec " + q(bad_spec) + " --rules " +
                                     repo_file("rules/covid19.json") + " --seed 1 --out-dir " +
                                     q(dir.path() / "d"));
  CHECK(rbad.exit_code == 1);
  CHECK(!rbad.err.empty());
}

TEST_CASE("version flag") {
  TempDir dir;
  const auto r = run_cli(dir, "--version");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("0.1.0") != std::string::npos);
}
