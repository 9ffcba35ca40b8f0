#include <gtest/gtest.h>

#include <cstring>

#include "json.hpp"
#include "obsrisk/errors.hpp"
#include "obsrisk/scenario_io.hpp"
#include "test_support.hpp"

namespace obsrisk {
namespace {

constexpr const char* kMinimal = R"({
  "name": "m",
  "x_law": {"kind": "uniform", "lo": 0, "hi": 1},
  "u_law": {"levels": []},
  "mu0": "x",
  "mu1": "0.70 * x",
  "pi0": "0.5"
})";

std::string with_field(const std::string& key, nlohmann::json value) {
  auto doc = nlohmann::json::parse(kMinimal);
  doc[key] = std::move(value);
  return doc.dump();
}

bool grid_identical(const ScenarioModel& a, const ScenarioModel& b) {
  for (double x : a.x_law().validation_grid()) {
    for (const auto& lvl : a.marginal_levels()) {
      for (const Expression* pair : {&a.mu0(), &a.mu1(), &a.pi0()}) {
        const Expression& other = pair == &a.mu0()   ? b.mu0()
                                  : pair == &a.mu1() ? b.mu1()
                                                     : b.pi0();
        const double va = pair->evaluate(x, lvl.value);
        const double vb = other.evaluate(x, lvl.value);
        if (std::memcmp(&va, &vb, sizeof va) != 0) return false;
      }
    }
  }
  return true;
}

TEST(LoadScenario, BuiltInToy) {
  const ScenarioModel m = load_scenario("toy");
  EXPECT_FALSE(m.x_law().is_discrete());
  EXPECT_EQ(m.x_law().lo(), 0.0);
  EXPECT_EQ(m.x_law().hi(), 1.0);
  EXPECT_TRUE(m.u_law().empty());
  EXPECT_EQ(m.mu0(), parse_expression("x"));
  EXPECT_EQ(m.mu1(), parse_expression("(0.7-x)^2"));
  EXPECT_EQ(m.pi0(), parse_expression("x"));
  EXPECT_NEAR(score_from(m, baseline_policy(m))(0.5), 0.27, 1e-15);
}

TEST(LoadScenario, AllBuiltInsLoad) {
  for (const auto& name : builtin_scenario_names()) {
    EXPECT_TRUE(is_builtin_scenario(name));
    EXPECT_NO_THROW(load_scenario(name)) << name;
  }
  EXPECT_FALSE(is_builtin_scenario("nope"));
  EXPECT_THROW(load_scenario("/nonexistent/file.json"), ValidationError);
}

TEST(ParseScenario, ConstantOutsideUnitIntervalIsRangeError) {
  EXPECT_THROW(parse_scenario(with_field("mu1", "1.5")), RangeError);
}

TEST(ParseScenario, UnboundConfounderIsValidationError) {
  EXPECT_THROW(parse_scenario(with_field("mu0", "u * x")), ValidationError);
}

TEST(ParseScenario, StructuralErrors) {
  EXPECT_THROW(parse_scenario(with_field("extra", 1)), ValidationError);
  EXPECT_THROW(parse_scenario("{"), ParseError);
  EXPECT_THROW(parse_scenario("[]"), ValidationError);
  EXPECT_THROW(parse_scenario(with_field("mu0", 0.5)), ValidationError);
  EXPECT_THROW(parse_scenario(with_field("mu0", "x +")), ParseError);
  EXPECT_THROW(parse_scenario(with_field("x_law", {{"kind", "normal"}})),
               ValidationError);
  EXPECT_THROW(parse_scenario(with_field("x_law", {{"kind", "uniform"}, {"lo", 0}})),
               ValidationError);
  EXPECT_THROW(parse_scenario(with_field("metadata", {{"theta", 0.5}})),
               ValidationError);
  EXPECT_THROW(parse_scenario(with_field(
                   "u_law", {{"levels", {{{"value", 0}, {"weight", 0.4}}}}})),
               ValidationError);
  auto doc = nlohmann::json::parse(kMinimal);
  doc.erase("pi0");
  EXPECT_THROW(parse_scenario(doc.dump()), ValidationError);
}

TEST(ParseScenario, ExpressionErrorsNameTheField) {
  try {
    parse_scenario(with_field("pi0", "x +"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("pi0", 0), 0u) << e.what();
    EXPECT_EQ(e.offset(), 3u);
  }
}

TEST(DumpScenario, CanonicalLiteralsAndLayout) {
  const std::string text = dump_scenario(parse_scenario(kMinimal));
  EXPECT_EQ(text,
            "{\n"
            "  \"name\": \"m\",\n"
            "  \"x_law\": {\n"
            "    \"kind\": \"uniform\",\n"
            "    \"lo\": 0.0,\n"
            "    \"hi\": 1.0\n"
            "  },\n"
            "  \"u_law\": {\n"
            "    \"levels\": []\n"
            "  },\n"
            "  \"mu0\": \"x\",\n"
            "  \"mu1\": \"0.7 * x\",\n"
            "  \"pi0\": \"0.5\"\n"
            "}\n");
}

TEST(DumpScenario, RoundTripIsGridIdentical) {
  for (const auto& name : builtin_scenario_names()) {
    const ScenarioModel m = load_scenario(name);
    const std::string text = dump_scenario(m);
    const ScenarioModel back = parse_scenario(text);
    EXPECT_TRUE(grid_identical(m, back)) << name;
    EXPECT_EQ(dump_scenario(back), text) << name;
    EXPECT_EQ(back.metadata(), m.metadata());
    EXPECT_EQ(back.x_law(), m.x_law());
    EXPECT_EQ(back.u_law(), m.u_law());
  }
}

TEST(DumpScenario, KeyOrderDoesNotMatter) {
  const std::string reordered = R"({
    "pi0": "0.5", "mu1": "0.70 * x", "u_law": {"levels": []},
    "x_law": {"hi": 1, "lo": 0, "kind": "uniform"}, "mu0": "x", "name": "m"
  })";
  EXPECT_EQ(dump_scenario(parse_scenario(reordered)),
            dump_scenario(parse_scenario(kMinimal)));
}

TEST(DumpScenario, RandomScenariosRoundTrip) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    const ScenarioModel m = testing::random_discrete_scenario(rng);
    const ScenarioModel back = parse_scenario(dump_scenario(m));
    EXPECT_TRUE(grid_identical(m, back));
    EXPECT_EQ(back.x_law(), m.x_law());
    EXPECT_EQ(back.u_law(), m.u_law());
  }
}

}  // namespace
}  // namespace obsrisk
