#include "horizons/results_io.hpp"

#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "horizons/engine.hpp"
#include "testutil.hpp"

using namespace horizons;

namespace {

MatchOutcome matched_example() {
  MatchOutcome o;
  o.patient_id = "P0001";
  o.status = MatchStatus::Matched;
  o.anchor_date = parse_iso_date("2020-03-08");
  o.admission_date = parse_iso_date("2020-03-10");
  o.offset = 2;
  o.validation_hits.push_back({"resp_dx", Code{CodeSystem::Icd10, "J22"},
                               parse_iso_date("2020-03-13"), 3});
  return o;
}

}  // namespace

TEST_CASE("matched outcome serializes to the documented line") {
  CHECK(result_jsonl_line(matched_example()) ==
        R"({"patient_id":"P0001","status":"matched","anchor_date":"2020-03-08",)"
        R"("admission_date":"2020-03-10","offset":2,)"
        R"("validation_hits":[{"clause":"resp_dx","code":"J22","date":"2020-03-13","offset":3}]})");
}

TEST_CASE("absent fields are omitted, not null") {
  MatchOutcome o;
  o.patient_id = "P0002";
  o.status = MatchStatus::NoAnchor;
  CHECK(result_jsonl_line(o) ==
        R"({"patient_id":"P0002","status":"no_anchor","validation_hits":[]})");

  o.patient_id = "P0003";
  o.status = MatchStatus::AnchorNoAdmission;
  CHECK(result_jsonl_line(o) ==
        R"({"patient_id":"P0003","status":"anchor_no_admission","validation_hits":[]})");

  o.patient_id = "P0004";
  o.status = MatchStatus::FailedValidation;
  o.anchor_date = parse_iso_date("2021-01-05");
  o.admission_date = parse_iso_date("2021-01-03");
  o.offset = -2;
  CHECK(result_jsonl_line(o) ==
        R"({"patient_id":"P0004","status":"failed_validation","anchor_date":"2021-01-05",)"
        R"("admission_date":"2021-01-03","offset":-2,"validation_hits":[]})");
}

TEST_CASE("write then read round-trips every status") {
  std::vector<MatchOutcome> outcomes;
  outcomes.push_back(matched_example());
  {
    MatchOutcome o;
    o.patient_id = "P0002";
    o.status = MatchStatus::NoAnchor;
    outcomes.push_back(o);
    o.patient_id = "P0003";
    o.status = MatchStatus::AnchorNoAdmission;
    outcomes.push_back(o);
    o.patient_id = "P0004";
    o.status = MatchStatus::FailedValidation;
    o.anchor_date = EpochDay{100};
    o.admission_date = EpochDay{99};
    o.offset = -1;
    outcomes.push_back(o);
  }

  std::stringstream buf;
  write_results_jsonl(buf, outcomes);
  const auto rows = read_results_jsonl(buf);

  REQUIRE(rows.size() == outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    CHECK(rows[i] == to_result_row(outcomes[i]));
  }
}

TEST_CASE("round-trip property over random classified bundles") {
  const RuleSet& rs = testutil::covid_rules();
  std::mt19937_64 rng(7020);
  auto bundles = testutil::random_cohort(rng, 400);
  const auto outcomes = classify_all(bundles, rs);

  std::stringstream buf;
  write_results_jsonl(buf, outcomes);
  const auto rows = read_results_jsonl(buf);

  REQUIRE(rows.size() == outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    CHECK(rows[i] == to_result_row(outcomes[i]));
  }
}

TEST_CASE("reader skips blank lines and tolerates CRLF") {
  std::stringstream buf;
  buf << "\r\n"
      << R"({"patient_id":"A","status":"no_anchor","validation_hits":[]})"
      << "\r\n\n"
      << R"({"patient_id":"B","status":"anchor_no_admission"})"
      << "\n";
  const auto rows = read_results_jsonl(buf);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].patient_id == "A");
  CHECK(rows[1].patient_id == "B");
  CHECK(rows[1].status == MatchStatus::AnchorNoAdmission);
  CHECK(rows[1].validation_hits.empty());
}

TEST_CASE("malformed input reports the offending line") {
  SUBCASE("broken json") {
    std::stringstream buf;
    buf << R"({"patient_id":"A","status":"no_anchor","validation_hits":[]})" << '\n'
        << "{not json" << '\n';
    CHECK_THROWS_WITH_AS(read_results_jsonl(buf),
                         doctest::Contains("line 2"), ResultsIoError);
  }

  SUBCASE("unknown status string") {
    std::stringstream buf;
    buf << R"({"patient_id":"A","status":"Matched","validation_hits":[]})" << '\n';
    CHECK_THROWS_AS(read_results_jsonl(buf), ResultsIoError);
  }

  SUBCASE("missing required field") {
    std::stringstream buf;
    buf << R"({"status":"no_anchor"})" << '\n';
    CHECK_THROWS_WITH_AS(read_results_jsonl(buf),
                         doctest::Contains("line 1"), ResultsIoError);
  }

  SUBCASE("bad date inside a hit") {
    std::stringstream buf;
    buf << R"({"patient_id":"A","status":"matched","anchor_date":"2020-01-01",)"
        << R"("admission_date":"2020-01-02","offset":1,)"
        << R"("validation_hits":[{"clause":"c","code":"J22","date":"2020-13-01","offset":1}]})"
        << '\n';
    CHECK_THROWS_WITH_AS(read_results_jsonl(buf),
                         doctest::Contains("line 1"), ResultsIoError);
  }
}

TEST_CASE("read_results_file rejects a missing path") {
  CHECK_THROWS_AS(read_results_file("/nonexistent/results.jsonl"), ResultsIoError);
}
