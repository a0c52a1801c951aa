#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "instr/config.hpp"
#include "instr/ir_text.hpp"

using namespace instr;
using namespace instr::config;
using nlohmann::json;

namespace {

json minimalRule() {
    return json::parse(R"({
      "in": "*",
      "findInstructions": [{"instruction": "sdiv", "operands": ["*", "<t1>"]}],
      "newInstruction": {"instruction": "call", "operands": ["<t1>", "checkDivisionByZero"]},
      "where": "before"})");
}

json withRule(const json& rule) { return {{"phases", json::array({{{"instructionsRules", json::array({rule})}}})}}; }

std::string schemaPath(const json& doc) {
    try {
        parseConfig(doc);
    } catch (const SchemaError& e) {
        return e.path;
    }
    return "<accepted>";
}

} // namespace

TEST(ConfigModel, VariableSyntax) {
    EXPECT_TRUE(isVariable("<t1>"));
    EXPECT_TRUE(isVariable("<addr_2>"));
    EXPECT_FALSE(isVariable("<>"));
    EXPECT_FALSE(isVariable("t1"));
    EXPECT_FALSE(isVariable("<t 1>"));
    EXPECT_FALSE(isVariable("*"));
}

TEST(ConfigModel, StrictDbzParsesFieldForField) {
    Config cfg = parseConfig(testkit::readText(testkit::sourcePath("configs/dbz_strict.json")));
    ASSERT_EQ(cfg.analyses.size(), 1u);
    EXPECT_EQ(cfg.analyses[0].kind, PluginSpec::Kind::Builtin);
    EXPECT_EQ(cfg.analyses[0].name, "range");
    EXPECT_EQ(cfg.analyses[0].source, "libRangeAnalysis.so");
    EXPECT_TRUE(cfg.flags.empty());
    EXPECT_FALSE(cfg.definitionsFile.has_value());
    ASSERT_EQ(cfg.phases.size(), 1u);
    ASSERT_EQ(cfg.phases[0].instructionRules.size(), 1u);
    EXPECT_TRUE(cfg.phases[0].globalRules.empty());
    const InstructionRule& r = cfg.phases[0].instructionRules[0];
    EXPECT_EQ(r.inFunction, "*");
    ASSERT_EQ(r.find.size(), 1u);
    EXPECT_EQ(r.find[0].opcode, ir::Opcode::SDiv);
    EXPECT_EQ(r.find[0].returnValue, "*");
    EXPECT_EQ(r.find[0].operands, (std::vector<std::string>{"*", "<t1>"}));
    EXPECT_FALSE(r.find[0].getTypeSize.has_value());
    ASSERT_EQ(r.conditions.size(), 1u);
    EXPECT_EQ(r.conditions[0].query, (std::vector<std::string>{"canBeZero", "<t1>"}));
    EXPECT_EQ(r.conditions[0].expectedResults, (std::vector<std::string>{"true"}));
    EXPECT_EQ(r.newInstruction.instruction, "call");
    EXPECT_EQ(r.newInstruction.operands, (std::vector<std::string>{"<t1>", "checkDivisionByZero"}));
    EXPECT_EQ(r.where, Where::Before);
    EXPECT_TRUE(r.setFlags.empty());
    EXPECT_FALSE(r.remember.has_value());
}

TEST(ConfigModel, ParsesAllFeatures) {
    Config cfg = parseConfig(testkit::readText(testkit::sourcePath("configs/memsafety.json")));
    EXPECT_EQ(cfg.flags, std::vector<std::string>{"mallocPresent"});
    ASSERT_EQ(cfg.phases.size(), 2u);
    const auto& malloc = cfg.phases[0].instructionRules[2];
    EXPECT_EQ(malloc.where, Where::After);
    EXPECT_EQ(malloc.setFlags, (std::vector<FlagAssignment>{{"mallocPresent", "true"}}));
    EXPECT_EQ(cfg.phases[0].instructionRules[0].remember, std::optional<std::string>("<t1>"));
    EXPECT_EQ(cfg.phases[0].instructionRules[0].find[0].getTypeSize, std::optional<std::string>("<t2>"));
    const auto& g = cfg.phases[1].globalRules.at(0);
    EXPECT_EQ(g.globalVariable, "<t1>");
    EXPECT_EQ(g.getTypeSize, std::optional<std::string>("<t2>"));
    EXPECT_EQ(g.inFunction, "main");
    EXPECT_EQ(cfg.phases[1].instructionRules[1].where, Where::Return);
    EXPECT_EQ(cfg.definitionsFile, std::optional<std::string>("../runtime/checks.ll"));
}

TEST(ConfigModel, JsonRoundTrip) {
    for (const char* name : {"dbz_strict.json", "dbz.json", "overflow.json", "memsafety.json"}) {
        Config cfg = parseConfig(testkit::readText(testkit::sourcePath(std::string("configs/") + name)));
        EXPECT_EQ(parseConfig(toJson(cfg)), cfg) << name;
    }
}

TEST(ConfigModel, SetFlagsExample) {
    json doc = {{"flags", {"loadFlag", "testFlag"}},
                {"phases", json::array({{{"instructionsRules", json::array({minimalRule()})}}})}};
    doc["phases"][0]["instructionsRules"][0]["setFlags"] = json::parse(R"([["loadFlag","true"],["testFlag","false"]])");
    Config cfg = parseConfig(doc);
    EXPECT_EQ(cfg.phases[0].instructionRules[0].setFlags,
              (std::vector<FlagAssignment>{{"loadFlag", "true"}, {"testFlag", "false"}}));
}

TEST(ConfigModel, MissingPhasesIsAnError) {
    EXPECT_EQ(schemaPath(json::parse(R"({"analyses": ["range"]})")), "/phases");
    EXPECT_EQ(schemaPath(json::parse(R"({"phases": []})")), "/phases");
}

TEST(ConfigModel, RejectsUnknownKeys) {
    EXPECT_EQ(schemaPath(json::parse(R"({"phases": [{"instructionsRules": []}], "extra": 1})")), "/extra");
    json r = minimalRule();
    r["findInstructions"][0]["opernds"] = json::array();
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/findInstructions/0/opernds");
}

TEST(ConfigModel, RejectsInvalidRules) {
    json r = minimalRule();
    r["newInstruction"]["operands"] = {"<t9>", "checkDivisionByZero"};
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/newInstruction/operands/0");

    r = minimalRule();
    r["newInstruction"]["instruction"] = "store";
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/newInstruction/instruction");

    r = minimalRule();
    r["newInstruction"]["operands"] = {"<t1>", "<t1>"};
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/newInstruction/operands/1");

    r = minimalRule();
    r["findInstructions"][0]["getTypeSize"] = "<s>";
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/findInstructions/0/getTypeSize");

    r = minimalRule();
    r["where"] = "around";
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/where");

    r = minimalRule();
    r["findInstructions"] = json::parse(R"([{"instruction": "ret"}])");
    r["newInstruction"]["operands"] = {"done"};
    r["where"] = "after";
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/where");

    r = minimalRule();
    r["findInstructions"][0]["instruction"] = "fadd";
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/findInstructions/0/instruction");

    r = minimalRule();
    r["setFlags"] = json::parse(R"([["undeclared","true"]])");
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/setFlags/0");
}

TEST(ConfigModel, EntryRulesMayOnlyTestFlags) {
    json r = json::parse(R"({"in": "main", "where": "return",
        "conditions": [{"query": ["canBeZero", "0"], "expectedResults": ["true"]}],
        "newInstruction": {"instruction": "call", "operands": ["check_leaks"]}})");
    EXPECT_EQ(schemaPath(withRule(r)), "/phases/0/instructionsRules/0/conditions/0/query/0");
    json doc = withRule(r);
    doc["flags"] = {"canBeZero"};
    EXPECT_EQ(schemaPath(doc), "<accepted>");
}

TEST(ConfigModel, GlobalRulesNeedConcreteFunction) {
    json doc = json::parse(R"({"phases": [{"globalVariablesRules": [{
        "findGlobals": {"globalVariable": "<g>"}, "in": "*",
        "newInstruction": {"instruction": "call", "operands": ["<g>", "track"]}}]}]})");
    EXPECT_EQ(schemaPath(doc), "/phases/0/globalVariablesRules/0/in");
}

TEST(ConfigModel, PluginSpecs) {
    Config cfg = parseConfig(json::parse(R"({"analyses": ["range", "points-to", "/opt/lib/libPointsToPlugin.so",
        "exec:python3 plugin.py"], "phases": [{}]})"));
    ASSERT_EQ(cfg.analyses.size(), 4u);
    EXPECT_EQ(cfg.analyses[2].name, "points-to");
    EXPECT_EQ(cfg.analyses[3].kind, PluginSpec::Kind::External);
    EXPECT_EQ(cfg.analyses[3].name, "python3 plugin.py");
    EXPECT_EQ(schemaPath(json::parse(R"({"analyses": ["libFoo.so"], "phases": [{}]})")), "/analyses/0");
}

TEST(ConfigModel, MalformedJson) { EXPECT_THROW(parseConfig(std::string("{\"phases\": [")), JsonError); }

TEST(ConfigModel, ValidateAgainstDefinitions) {
    Config cfg = parseConfig(withRule(minimalRule()));
    ir::Module defs = ir::parseIR("define void @checkDivisionByZero(i64 %v) {\nentry:\n  ret void\n}\n");
    EXPECT_TRUE(validateAgainstDefinitions(cfg, defs).empty());
    ir::Module wrong = ir::parseIR("define i32 @checkDivisionByZero(i64 %v, i64 %w) {\nentry:\n  ret i32 0\n}\n");
    auto w = validateAgainstDefinitions(cfg, wrong);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[0].ruleId, "phases[0].instructionsRules[0]");
    EXPECT_EQ(validateAgainstDefinitions(cfg, ir::Module{}).size(), 1u);
}
