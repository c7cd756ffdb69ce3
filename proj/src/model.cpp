#include "horizons/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>

namespace horizons {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

EpochDay parse_iso_date(std::string_view text) {
  // Fixed shape YYYY-MM-DD, then Gregorian validity via chrono.
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw MalformedDate("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  const std::string_view ys = text.substr(0, 4);
  const std::string_view ms = text.substr(5, 2);
  const std::string_view ds = text.substr(8, 2);
  if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) {
    throw MalformedDate("non-digit in date '" + std::string(text) + "'");
  }
  int y = 0, m = 0, d = 0;
  std::from_chars(ys.data(), ys.data() + ys.size(), y);
  std::from_chars(ms.data(), ms.data() + ms.size(), m);
  std::from_chars(ds.data(), ds.data() + ds.size(), d);

  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) {
    throw MalformedDate("invalid calendar date '" + std::string(text) + "'");
  }
  const std::chrono::sys_days days{ymd};
  return EpochDay{days.time_since_epoch().count()};
}

std::string format_iso_date(EpochDay day) {
  const std::chrono::sys_days days{std::chrono::days{day.value}};
  const std::chrono::year_month_day ymd{days};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

std::string_view to_string(CodeSystem system) {
  switch (system) {
    case CodeSystem::Icd10: return "ICD10";
    case CodeSystem::Cpt: return "CPT";
    case CodeSystem::Ndc: return "NDC";
  }
  return "ICD10";
}

CodeSystem code_system_from_string(std::string_view text) {
  if (text == "ICD10") return CodeSystem::Icd10;
  if (text == "CPT") return CodeSystem::Cpt;
  if (text == "NDC") return CodeSystem::Ndc;
  throw UnknownCodeSystem("unknown code system '" + std::string(text) + "'");
}

Code normalize_code(CodeSystem system, std::string_view raw) {
  // Trim, drop dots, uppercase. Claims feeds record ICD-10 both with and
  // without dots; equality must not depend on that.
  size_t begin = 0, end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;

  std::string value;
  value.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    const char c = raw[i];
    if (c == '.') continue;
    value.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (value.empty()) {
    throw EmptyCode("code is empty after normalization");
  }
  return Code{system, std::move(value)};
}

std::string_view to_string(Sex sex) {
  switch (sex) {
    case Sex::M: return "M";
    case Sex::F: return "F";
    case Sex::U: return "U";
  }
  return "U";
}

std::optional<Sex> sex_from_string(std::string_view text) {
  if (text == "M") return Sex::M;
  if (text == "F") return Sex::F;
  if (text == "U") return Sex::U;
  return std::nullopt;
}

std::string_view to_string(MatchStatus status) {
  switch (status) {
    case MatchStatus::Matched: return "matched";
    case MatchStatus::NoAnchor: return "no_anchor";
    case MatchStatus::AnchorNoAdmission: return "anchor_no_admission";
    case MatchStatus::FailedValidation: return "failed_validation";
  }
  return "no_anchor";
}

std::optional<MatchStatus> match_status_from_string(std::string_view text) {
  if (text == "matched") return MatchStatus::Matched;
  if (text == "no_anchor") return MatchStatus::NoAnchor;
  if (text == "anchor_no_admission") return MatchStatus::AnchorNoAdmission;
  if (text == "failed_validation") return MatchStatus::FailedValidation;
  return std::nullopt;
}

}  // namespace horizons
