#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "fixtures.hpp"
#include "instr/analysis/external.hpp"
#include "instr/analysis/range.hpp"
#include "instr/errors.hpp"
#include "instr/ir_text.hpp"

using namespace instr;
using namespace instr::analysis;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::string stub(const std::string& mode) {
    return std::string("'") + INSTR_PYTHON + "' '" + testkit::sourcePath("tests/plugins/stub_plugin.py") + "' " + mode;
}

const char* kProg = "define i32 @f(i32 %a, i32 %b) {\nentry:\n  %d = sub i32 %b, 1\n  %q = sdiv i32 %a, %d\n"
                    "  %k = sdiv i32 %a, 4\n  ret i32 %q\n}\n";

ir::Value i32(const std::string& r) { return ir::Value::reg(r, ir::Type::integer(32)); }

std::string failureOf(const std::function<void()>& f) {
    try {
        f();
    } catch (const PluginFailure& e) {
        return e.what();
    }
    return "<no failure>";
}

} // namespace

TEST(PluginProtocol, EncodesArguments) {
    ir::Module m = ir::parseIR(kProg);
    EXPECT_EQ(encodeArg(std::int64_t{8}, "f", &m), json::parse(R"({"kind":"int","value":8})"));
    EXPECT_EQ(encodeArg(std::string("x"), "f", &m), json::parse(R"({"kind":"string","value":"x"})"));
    EXPECT_EQ(encodeArg(ir::Value::intConst(-3, ir::Type::integer(8)), "f", &m),
              json::parse(R"({"kind":"const","type":"i8","value":-3})"));
    EXPECT_EQ(encodeArg(ir::Value::null(), "f", &m), json::parse(R"({"kind":"null"})"));
    EXPECT_EQ(encodeArg(ir::Value::global("g"), "f", &m), json::parse(R"({"kind":"global","name":"g"})"));
    EXPECT_EQ(encodeArg(i32("d"), "f", &m),
              json::parse(R"({"kind":"reg","type":"i32","name":"d","function":"f","def":"%d = sub i32 %b, 1"})"));
    EXPECT_FALSE(encodeArg(i32("a"), "f", &m).contains("def"));
}

TEST(PluginProtocol, TimeoutFromEnvironment) {
    setenv("INSTR_PLUGIN_TIMEOUT_MS", "250", 1);
    EXPECT_EQ(pluginTimeout(), 250ms);
    setenv("INSTR_PLUGIN_TIMEOUT_MS", "bogus", 1);
    EXPECT_EQ(pluginTimeout(), 10000ms);
    unsetenv("INSTR_PLUGIN_TIMEOUT_MS");
    EXPECT_EQ(pluginTimeout(), 10000ms);
}

TEST(ExternalPlugin, HandshakeAndAnswers) {
    std::string log = testkit::writeTemp("stub.log", "");
    setenv("STUB_LOG", log.c_str(), 1);
    {
        ExternalPlugin p(stub("normal"));
        EXPECT_EQ(p.capabilities(), (std::set<std::string>{"canBeZero", "isEven"}));
        EXPECT_TRUE(p.supports("isEven"));
        EXPECT_FALSE(p.supports("isNull"));
        ir::Module m = ir::parseIR(kProg);
        p.prepare(m);
        EXPECT_EQ(p.answer({"canBeZero", {ir::Value::intConst(0, ir::Type::integer(32))}, "f", "entry"}, {}), "true");
        EXPECT_EQ(p.answer({"canBeZero", {ir::Value::intConst(4, ir::Type::integer(32))}, "f", "entry"}, {}), "false");
        EXPECT_EQ(p.answer({"isEven", {std::int64_t{6}}, "f", ""}, {}), "true");
        EXPECT_EQ(p.answer({"canBeZero", {i32("d")}, "f", "entry"}, {}), "true");
    }
    unsetenv("STUB_LOG");
    std::ifstream in(log);
    std::vector<json> reqs;
    for (std::string line; std::getline(in, line);)
        reqs.push_back(json::parse(line));
    ASSERT_EQ(reqs.size(), 4u);
    EXPECT_EQ(reqs[0]["query"], "canBeZero");
    EXPECT_EQ(reqs[0]["function"], "f");
    EXPECT_EQ(reqs[3]["args"][0]["def"], "%d = sub i32 %b, 1");
}

TEST(ExternalPlugin, Failures) {
    EXPECT_NE(failureOf([] { ExternalPlugin p(stub("nohandshake")); }).find("exited unexpectedly"), std::string::npos);
    EXPECT_NE(failureOf([] { ExternalPlugin p("echo '{\"caps\": []}'"); }).find("capabilities"), std::string::npos);
    EXPECT_NE(failureOf([] { ExternalPlugin p("echo hello"); }).find("malformed handshake"), std::string::npos);

    ir::Module m = ir::parseIR(kProg);
    Query q{"canBeZero", {i32("d")}, "f", "entry"};
    std::string crash = failureOf([&] {
        ExternalPlugin p(stub("crash"));
        p.prepare(m);
        p.answer(q, {});
    });
    EXPECT_NE(crash.find("exited unexpectedly"), std::string::npos) << crash;
    EXPECT_EQ(crash.rfind("external plugin '", 0), 0u) << crash;

    std::string bad = failureOf([&] {
        ExternalPlugin p(stub("badjson"));
        p.answer(q, {});
    });
    EXPECT_NE(bad.find("malformed response"), std::string::npos) << bad;

    auto start = std::chrono::steady_clock::now();
    std::string hang = failureOf([&] {
        ExternalPlugin p(stub("hang"), 300ms);
        p.answer(q, {});
    });
    EXPECT_NE(hang.find("timed out"), std::string::npos) << hang;
    EXPECT_LT(std::chrono::steady_clock::now() - start, 5s);
}

TEST(ExternalPlugin, DrivesInstrumentation) {
    json cfgJson = json::parse(R"({"analyses": [], "phases": [{"instructionsRules": [{
        "in": "*", "findInstructions": [{"instruction": "sdiv", "operands": ["*", "<t1>"]}],
        "conditions": [{"query": ["canBeZero", "<t1>"], "expectedResults": ["true"]}],
        "newInstruction": {"instruction": "call", "operands": ["<t1>", "checkDivisionByZero"]},
        "where": "before"}]}]})");
    cfgJson["analyses"] = {"exec:" + stub("normal")};
    config::Config cfg = config::parseConfig(cfgJson);
    ir::Module defs = ir::parseIR("define void @checkDivisionByZero(i64 %v) {\nentry:\n  ret void\n}\n");
    ir::Module m = ir::parseIR(kProg);
    PluginList plugins = makePlugins(cfg, false);
    ASSERT_EQ(plugins.size(), 1u);
    engine::Result r = engine::instrument(m, cfg, defs, plugins);
    EXPECT_EQ(r.inserted, 1u);

    // An "unsupported" answer defers to the next plugin.
    cfgJson["analyses"] = {"exec:" + stub("unsupported"), "range"};
    cfg = config::parseConfig(cfgJson);
    plugins = makePlugins(cfg, false);
    ASSERT_EQ(plugins.size(), 2u);
    r = engine::instrument(m, cfg, defs, plugins);
    EXPECT_EQ(r.inserted, 0u);
    EXPECT_TRUE(r.warnings.empty());

    cfgJson["analyses"] = {"exec:" + stub("unsupported")};
    cfg = config::parseConfig(cfgJson);
    plugins = makePlugins(cfg, false);
    r = engine::instrument(m, cfg, defs, plugins);
    EXPECT_EQ(r.inserted, 0u);
    EXPECT_EQ(r.warnings.size(), 1u);

    cfgJson["analyses"] = {"exec:" + stub("crash")};
    cfg = config::parseConfig(cfgJson);
    plugins = makePlugins(cfg, false);
    EXPECT_THROW(engine::instrument(m, cfg, defs, plugins), PluginFailure);
}
