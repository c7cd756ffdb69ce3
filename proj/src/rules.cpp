#include "horizons/rules.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace horizons {

namespace {

using nlohmann::ordered_json;

const ordered_json& require(const ordered_json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw RuleSyntaxError(std::string("missing '") + key + "' in " + where);
  }
  return obj.at(key);
}

std::string require_string(const ordered_json& obj, const char* key, const char* where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) {
    throw RuleSyntaxError(std::string("'") + key + "' in " + where + " must be a string");
  }
  return v.get<std::string>();
}

std::int64_t require_int(const ordered_json& obj, const char* key, const char* where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer()) {
    throw RuleSyntaxError(std::string("'") + key + "' in " + where + " must be an integer");
  }
  return v.get<std::int64_t>();
}

Horizon parse_horizon(const ordered_json& obj, const std::string& where) {
  Horizon h{require_int(obj, "lo", where.c_str()), require_int(obj, "hi", where.c_str())};
  if (h.lo > h.hi) {
    std::ostringstream msg;
    msg << where << ": lo " << h.lo << " > hi " << h.hi;
    throw InvalidHorizon(msg.str());
  }
  return h;
}

std::set<Code> parse_code_set(const ordered_json& obj, const std::string& where,
                              std::vector<std::string>& lint_notes) {
  const std::string system_text = require_string(obj, "system", where.c_str());
  CodeSystem system;
  try {
    system = code_system_from_string(system_text);
  } catch (const UnknownCodeSystem& e) {
    throw RuleSyntaxError(where + ": " + e.what());
  }
  const auto& arr = require(obj, "codes", where.c_str());
  if (!arr.is_array()) {
    throw RuleSyntaxError(where + ": 'codes' must be an array");
  }
  std::set<Code> codes;
  for (const auto& item : arr) {
    if (!item.is_string()) {
      throw RuleSyntaxError(where + ": codes must be strings");
    }
    Code code;
    try {
      code = normalize_code(system, item.get<std::string>());
    } catch (const horizons::EmptyCode&) {
      throw RuleSyntaxError(where + ": empty code");
    }
    if (!codes.insert(code).second) {
      lint_notes.push_back(where + ": duplicate code " + code.value);
    }
  }
  if (codes.empty()) {
    throw horizons::EmptyCodeSet(where + ": empty code set");
  }
  return codes;
}

ordered_json code_set_to_json(const std::set<Code>& codes) {
  // All codes in one set share a system by construction of the file schema.
  ordered_json out;
  out["system"] = std::string(to_string(codes.begin()->system));
  auto& arr = out["codes"] = ordered_json::array();
  for (const auto& code : codes) arr.push_back(code.value);
  return out;
}

}  // namespace

RuleSet parse_rules(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw RuleSyntaxError(std::string("malformed rule file: ") + e.what());
  }
  if (!doc.is_object()) {
    throw RuleSyntaxError("rule file root must be an object");
  }

  RuleSet rs;
  rs.name = require_string(doc, "name", "rule file");
  rs.anchor_codes = parse_code_set(require(doc, "anchor", "rule file"), "anchor", rs.lint_notes);
  rs.admission_codes =
      parse_code_set(require(doc, "admission", "rule file"), "admission", rs.lint_notes);
  rs.primary_horizon = parse_horizon(require(doc, "primary_horizon", "rule file"), "primary_horizon");

  for (const auto& code : rs.anchor_codes) {
    if (rs.admission_codes.count(code)) {
      throw CodeSetConflict("code " + std::string(to_string(code.system)) + ":" + code.value +
                            " appears in both anchor and admission sets");
    }
  }

  if (doc.contains("validation")) {
    const auto& arr = doc.at("validation");
    if (!arr.is_array()) {
      throw RuleSyntaxError("'validation' must be an array");
    }
    std::set<std::string> seen;
    for (const auto& item : arr) {
      ValidationClause clause;
      clause.name = require_string(item, "name", "validation clause");
      if (!seen.insert(clause.name).second) {
        throw DuplicateClauseName("duplicate validation clause name '" + clause.name + "'");
      }
      const std::string where = "validation clause '" + clause.name + "'";
      clause.codes = parse_code_set(item, where, rs.lint_notes);
      clause.horizon = parse_horizon(require(item, "horizon", where.c_str()), where);
      if (item.contains("min_count")) {
        const auto& mc = item.at("min_count");
        if (!mc.is_number_integer() || mc.get<std::int64_t>() < 1) {
          throw RuleSyntaxError(where + ": min_count must be an integer >= 1");
        }
        clause.min_count = mc.get<int>();
      }
      rs.validation.push_back(std::move(clause));
    }
  }
  return rs;
}

RuleSet parse_rules_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RuleSyntaxError("cannot open rule file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rules(buf.str());
}

std::string serialize_rules(const RuleSet& rs) {
  ordered_json doc;
  doc["name"] = rs.name;
  doc["anchor"] = code_set_to_json(rs.anchor_codes);
  doc["admission"] = code_set_to_json(rs.admission_codes);
  doc["primary_horizon"] = {{"lo", rs.primary_horizon.lo}, {"hi", rs.primary_horizon.hi}};
  auto& arr = doc["validation"] = ordered_json::array();
  for (const auto& clause : rs.validation) {
    ordered_json c = code_set_to_json(clause.codes);
    ordered_json out;
    out["name"] = clause.name;
    out["system"] = c["system"];
    out["codes"] = c["codes"];
    out["horizon"] = {{"lo", clause.horizon.lo}, {"hi", clause.horizon.hi}};
    out["min_count"] = clause.min_count;
    arr.push_back(std::move(out));
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate_rules(const RuleSet& rs) {
  std::vector<std::string> warnings = rs.lint_notes;

  // A clause sharing codes with the admission set and a horizon containing 0
  // is satisfied by the chosen admission claim itself.
  for (const auto& clause : rs.validation) {
    if (!clause.horizon.contains(0)) continue;
    for (const auto& code : clause.codes) {
      if (rs.admission_codes.count(code)) {
        warnings.push_back("clause '" + clause.name + "': code " + code.value +
                           " is an admission code and the clause horizon contains 0; "
                           "the admission claim satisfies the clause by itself");
        break;
      }
    }
  }

  // Same trap with the anchor: the chosen anchor sits at offset -(primary
  // offset) from the admission, so any overlap with the mirrored primary
  // horizon lets the anchor claim validate itself.
  const Horizon mirrored{-rs.primary_horizon.hi, -rs.primary_horizon.lo};
  for (const auto& clause : rs.validation) {
    const bool overlaps =
        clause.horizon.lo <= mirrored.hi && mirrored.lo <= clause.horizon.hi;
    if (!overlaps) continue;
    for (const auto& code : clause.codes) {
      if (rs.anchor_codes.count(code)) {
        warnings.push_back("clause '" + clause.name + "': code " + code.value +
                           " is an anchor code and the clause horizon can reach the "
                           "chosen anchor; the anchor claim may satisfy the clause by itself");
        break;
      }
    }
  }
  return warnings;
}

}  // namespace horizons
