#include "obsrisk/scenario_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "obsrisk/errors.hpp"

namespace obsrisk {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// The three scenarios needed to rerun every experiment without authoring a
// file: the uniform toy, a one-stratum alternation witness, and a two-level
// confounder witness for the expertise inversion.
constexpr std::string_view kToy = R"({
  "name": "toy",
  "x_law": {"kind": "uniform", "lo": 0, "hi": 1},
  "u_law": {"levels": []},
  "mu0": "x",
  "mu1": "(0.7 - x)^2",
  "pi0": "x"
})";

constexpr std::string_view kTable1Witness = R"({
  "name": "table1-witness",
  "x_law": {"kind": "discrete", "points": [{"value": 0, "weight": 1}]},
  "u_law": {"levels": []},
  "mu0": "0.8",
  "mu1": "0.2",
  "pi0": "1/3",
  "metadata": {"theta": "0.5", "comparator": "gt"}
})";

constexpr std::string_view kExpertiseWitness = R"({
  "name": "expertise-witness",
  "x_law": {"kind": "discrete", "points": [{"value": 0, "weight": 1}]},
  "u_law": {"levels": [{"value": 0, "weight": 0.5}, {"value": 1, "weight": 0.5}]},
  "mu0": "0.9 - 0.8 * u",
  "mu1": "0.1 + 0.4 * u",
  "pi0": "0.5",
  "metadata": {"pi0_skilled": "0.9 - 0.8 * u", "theta": "0.3", "comparator": "ge"}
})";

[[noreturn]] void invalid(const std::string& what) {
  throw ValidationError("scenario: " + what);
}

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& required,
                  const std::set<std::string>& optional = {}) {
  if (!obj.is_object()) invalid(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!required.count(key) && !optional.count(key)) {
      invalid("unknown key '" + key + "' in " + where);
    }
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) invalid("missing key '" + key + "' in " + where);
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) invalid(where + " must be a number");
  return v.get<double>();
}

std::vector<WeightedPoint> weighted_points(const json& arr,
                                           const std::string& where) {
  if (!arr.is_array()) invalid(where + " must be an array");
  std::vector<WeightedPoint> out;
  for (const auto& item : arr) {
    require_keys(item, where + " entry", {"value", "weight"});
    out.push_back({number(item["value"], where + ".value"),
                   number(item["weight"], where + ".weight")});
  }
  return out;
}

Expression expression_field(const json& doc, const std::string& key) {
  const json& v = doc[key];
  if (!v.is_string()) invalid(key + " must be an expression string");
  try {
    return parse_expression(v.get<std::string>());
  } catch (const ParseError& e) {
    throw ParseError(key + ": " + e.what(), e.offset(), e.expected());
  }
}

ordered_json points_json(const std::vector<WeightedPoint>& pts) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : pts) {
    ordered_json item;
    item["value"] = p.value;
    item["weight"] = p.weight;
    arr.push_back(std::move(item));
  }
  return arr;
}

}  // namespace

ScenarioModel parse_scenario(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what(),
                     std::min<std::size_t>(e.byte, json_text.size()));
  }
  require_keys(doc, "document", {"name", "x_law", "u_law", "mu0", "mu1", "pi0"},
               {"metadata"});
  if (!doc["name"].is_string()) invalid("name must be a string");

  const json& xl = doc["x_law"];
  if (!xl.is_object() || !xl.contains("kind") || !xl["kind"].is_string()) {
    invalid("x_law needs a string 'kind'");
  }
  const std::string kind = xl["kind"].get<std::string>();
  std::optional<CovariateLaw> x_law;
  if (kind == "uniform") {
    require_keys(xl, "x_law", {"kind", "lo", "hi"});
    x_law = CovariateLaw::uniform(number(xl["lo"], "x_law.lo"),
                                  number(xl["hi"], "x_law.hi"));
  } else if (kind == "discrete") {
    require_keys(xl, "x_law", {"kind", "points"});
    x_law = CovariateLaw::discrete(weighted_points(xl["points"], "x_law.points"));
  } else {
    invalid("x_law.kind must be 'uniform' or 'discrete'");
  }

  require_keys(doc["u_law"], "u_law", {"levels"});
  ConfounderLaw u_law(weighted_points(doc["u_law"]["levels"], "u_law.levels"));

  std::map<std::string, std::string> metadata;
  if (doc.contains("metadata")) {
    const json& md = doc["metadata"];
    if (!md.is_object()) invalid("metadata must be an object");
    for (const auto& [key, value] : md.items()) {
      if (!value.is_string()) invalid("metadata." + key + " must be a string");
      metadata[key] = value.get<std::string>();
    }
  }

  return ScenarioModel(doc["name"].get<std::string>(), std::move(*x_law),
                       std::move(u_law), expression_field(doc, "mu0"),
                       expression_field(doc, "mu1"),
                       expression_field(doc, "pi0"), std::move(metadata));
}

ScenarioModel load_scenario(const std::string& name_or_path) {
  if (is_builtin_scenario(name_or_path)) {
    return parse_scenario(builtin_scenario_text(name_or_path));
  }
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) {
    throw ValidationError("scenario: cannot open '" + name_or_path +
                          "' (not a file or built-in scenario)");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const ScenarioModel& model) {
  ordered_json doc;
  doc["name"] = model.name();
  ordered_json xl;
  if (model.x_law().is_discrete()) {
    xl["kind"] = "discrete";
    xl["points"] = points_json(model.x_law().points());
  } else {
    xl["kind"] = "uniform";
    xl["lo"] = model.x_law().lo();
    xl["hi"] = model.x_law().hi();
  }
  doc["x_law"] = std::move(xl);
  doc["u_law"]["levels"] = points_json(model.u_law().levels());
  doc["mu0"] = model.mu0().to_string();
  doc["mu1"] = model.mu1().to_string();
  doc["pi0"] = model.pi0().to_string();
  if (!model.metadata().empty()) {
    ordered_json md = ordered_json::object();
    for (const auto& [k, v] : model.metadata()) md[k] = v;
    doc["metadata"] = std::move(md);
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> builtin_scenario_names() {
  return {"toy", "table1-witness", "expertise-witness"};
}

bool is_builtin_scenario(std::string_view name) {
  return name == "toy" || name == "table1-witness" ||
         name == "expertise-witness";
}

std::string builtin_scenario_text(std::string_view name) {
  if (name == "toy") return std::string(kToy);
  if (name == "table1-witness") return std::string(kTable1Witness);
  if (name == "expertise-witness") return std::string(kExpertiseWitness);
  throw DomainError("unknown built-in scenario '" + std::string(name) + "'");
}

}  // namespace obsrisk
