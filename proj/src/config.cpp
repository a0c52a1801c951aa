#include "instr/config.hpp"

#include <cctype>
#include <initializer_list>
#include <set>

namespace instr::config {

using nlohmann::json;

bool isVariable(std::string_view s) {
    if (s.size() < 3 || s.front() != '<' || s.back() != '>')
        return false;
    auto body = s.substr(1, s.size() - 2);
    if (!(std::isalpha(static_cast<unsigned char>(body[0])) || body[0] == '_'))
        return false;
    for (char c : body)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
            return false;
    return true;
}

std::string_view whereName(Where w) {
    switch (w) {
    case Where::Before:
        return "before";
    case Where::After:
        return "after";
    case Where::Entry:
        return "entry";
    case Where::Return:
        return "return";
    }
    return "?";
}

bool Config::isFlag(std::string_view name) const {
    for (const auto& f : flags)
        if (f == name)
            return true;
    return false;
}

std::string ruleId(std::size_t phase, bool global, std::size_t index) {
    return "phases[" + std::to_string(phase) + "]." + (global ? "globalVariablesRules" : "instructionsRules") + "[" +
           std::to_string(index) + "]";
}

namespace {

void checkKeys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed)
            ok = ok || a == key;
        if (!ok)
            throw SchemaError(path + "/" + key, "unknown key '" + key + "'");
    }
}

const json& requireObject(const json& v, const std::string& path) {
    if (!v.is_object())
        throw SchemaError(path, "expected an object");
    return v;
}

std::string getString(const json& v, const std::string& path) {
    if (!v.is_string())
        throw SchemaError(path, "expected a string");
    return v.get<std::string>();
}

std::vector<std::string> getStringList(const json& v, const std::string& path, bool nonEmpty) {
    if (!v.is_array())
        throw SchemaError(path, "expected an array of strings");
    if (nonEmpty && v.empty())
        throw SchemaError(path, "must not be empty");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(getString(v[i], path + "/" + std::to_string(i)));
    return out;
}

std::string getVariable(const json& v, const std::string& path) {
    std::string s = getString(v, path);
    if (!isVariable(s))
        throw SchemaError(path, "expected a configuration variable like <t1>, found '" + s + "'");
    return s;
}

PluginSpec parsePlugin(const json& v, const std::string& path) {
    std::string s = getString(v, path);
    PluginSpec p;
    p.source = s;
    if (s.rfind("exec:", 0) == 0) {
        p.kind = PluginSpec::Kind::External;
        p.name = s.substr(5);
        if (p.name.find_first_not_of(" \t") == std::string::npos)
            throw SchemaError(path, "external plugin needs a command after 'exec:'");
        return p;
    }
    // Shared-object names used by the original configurations map onto the builtins.
    std::string base = s.substr(s.find_last_of('/') == std::string::npos ? 0 : s.find_last_of('/') + 1);
    if (s == "range" || base == "libRangeAnalysis.so")
        p.name = "range";
    else if (s == "points-to" || base == "libPointsToPlugin.so")
        p.name = "points-to";
    else
        throw SchemaError(path, "unknown plugin '" + s + "' (builtins: range, points-to; external: exec:<command>)");
    return p;
}

InstructionPattern parsePattern(const json& v, const std::string& path) {
    requireObject(v, path);
    checkKeys(v, path, {"instruction", "returnValue", "operands", "getTypeSize"});
    if (!v.contains("instruction"))
        throw SchemaError(path, "missing 'instruction'");
    InstructionPattern p;
    std::string name = getString(v["instruction"], path + "/instruction");
    auto op = ir::opcodeFromName(name);
    if (!op)
        throw SchemaError(path + "/instruction", "unsupported instruction '" + name + "'");
    p.opcode = *op;
    if (v.contains("returnValue"))
        p.returnValue = getString(v["returnValue"], path + "/returnValue");
    if (v.contains("operands"))
        p.operands = getStringList(v["operands"], path + "/operands", false);
    if (v.contains("getTypeSize")) {
        if (p.opcode != ir::Opcode::Load && p.opcode != ir::Opcode::Store && p.opcode != ir::Opcode::Alloca)
            throw SchemaError(path + "/getTypeSize", "getTypeSize can be used only with load, store or alloca");
        p.getTypeSize = getVariable(v["getTypeSize"], path + "/getTypeSize");
    }
    return p;
}

Condition parseCondition(const json& v, const std::string& path) {
    requireObject(v, path);
    checkKeys(v, path, {"query", "expectedResults"});
    if (!v.contains("query"))
        throw SchemaError(path, "missing 'query'");
    if (!v.contains("expectedResults"))
        throw SchemaError(path, "missing 'expectedResults'");
    Condition c;
    c.query = getStringList(v["query"], path + "/query", true);
    c.expectedResults = getStringList(v["expectedResults"], path + "/expectedResults", true);
    return c;
}

std::vector<Condition> parseConditions(const json& rule, const std::string& path) {
    std::vector<Condition> out;
    if (!rule.contains("conditions"))
        return out;
    const json& v = rule["conditions"];
    if (!v.is_array())
        throw SchemaError(path + "/conditions", "expected an array");
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(parseCondition(v[i], path + "/conditions/" + std::to_string(i)));
    return out;
}

NewCall parseNewCall(const json& rule, const std::string& path) {
    if (!rule.contains("newInstruction"))
        throw SchemaError(path, "missing 'newInstruction'");
    std::string p = path + "/newInstruction";
    const json& v = requireObject(rule["newInstruction"], p);
    checkKeys(v, p, {"instruction", "operands"});
    if (!v.contains("instruction"))
        throw SchemaError(p, "missing 'instruction'");
    if (!v.contains("operands"))
        throw SchemaError(p, "missing 'operands'");
    NewCall c;
    c.instruction = getString(v["instruction"], p + "/instruction");
    if (c.instruction != "call")
        throw SchemaError(p + "/instruction", "only call instructions are supported, found '" + c.instruction + "'");
    c.operands = getStringList(v["operands"], p + "/operands", true);
    const std::string& callee = c.operands.back();
    if (isVariable(callee) || callee == "*" || callee.empty())
        throw SchemaError(p + "/operands/" + std::to_string(c.operands.size() - 1),
                          "the last operand must be the name of the called function");
    return c;
}

std::vector<FlagAssignment> parseSetFlags(const json& rule, const std::string& path) {
    std::vector<FlagAssignment> out;
    if (!rule.contains("setFlags"))
        return out;
    const json& v = rule["setFlags"];
    if (!v.is_array())
        throw SchemaError(path + "/setFlags", "expected an array of [flag, value] pairs");
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::string p = path + "/setFlags/" + std::to_string(i);
        auto pair = getStringList(v[i], p, true);
        if (pair.size() != 2)
            throw SchemaError(p, "expected a [flag, value] pair");
        out.emplace_back(pair[0], pair[1]);
    }
    return out;
}

Where parseWhere(const json& v, const std::string& path) {
    std::string s = getString(v, path);
    if (s == "before")
        return Where::Before;
    if (s == "after")
        return Where::After;
    if (s == "entry")
        return Where::Entry;
    if (s == "return")
        return Where::Return;
    throw SchemaError(path, "'where' must be before, after, entry or return, found '" + s + "'");
}

InstructionRule parseInstructionRule(const json& v, const std::string& path) {
    requireObject(v, path);
    checkKeys(v, path,
              {"in", "findInstructions", "conditions", "newInstruction", "where", "setFlags", "remember"});
    InstructionRule r;
    if (v.contains("in"))
        r.inFunction = getString(v["in"], path + "/in");
    if (v.contains("findInstructions")) {
        const json& f = v["findInstructions"];
        if (!f.is_array())
            throw SchemaError(path + "/findInstructions", "expected an array");
        for (std::size_t i = 0; i < f.size(); ++i)
            r.find.push_back(parsePattern(f[i], path + "/findInstructions/" + std::to_string(i)));
    }
    r.conditions = parseConditions(v, path);
    r.newInstruction = parseNewCall(v, path);
    if (!v.contains("where"))
        throw SchemaError(path, "missing 'where'");
    r.where = parseWhere(v["where"], path + "/where");
    r.setFlags = parseSetFlags(v, path);
    if (v.contains("remember"))
        r.remember = getVariable(v["remember"], path + "/remember");
    return r;
}

GlobalRule parseGlobalRule(const json& v, const std::string& path) {
    requireObject(v, path);
    checkKeys(v, path, {"findGlobals", "conditions", "newInstruction", "in", "setFlags", "remember"});
    GlobalRule r;
    if (!v.contains("findGlobals"))
        throw SchemaError(path, "missing 'findGlobals'");
    std::string fp = path + "/findGlobals";
    const json& fg = requireObject(v["findGlobals"], fp);
    checkKeys(fg, fp, {"globalVariable", "getTypeSize"});
    if (!fg.contains("globalVariable"))
        throw SchemaError(fp, "missing 'globalVariable'");
    r.globalVariable = getVariable(fg["globalVariable"], fp + "/globalVariable");
    if (fg.contains("getTypeSize"))
        r.getTypeSize = getVariable(fg["getTypeSize"], fp + "/getTypeSize");
    r.conditions = parseConditions(v, path);
    r.newInstruction = parseNewCall(v, path);
    if (!v.contains("in"))
        throw SchemaError(path, "missing 'in'");
    r.inFunction = getString(v["in"], path + "/in");
    if (r.inFunction == "*")
        throw SchemaError(path + "/in", "global variable rules need a concrete function, '*' is not allowed");
    r.setFlags = parseSetFlags(v, path);
    if (v.contains("remember"))
        r.remember = getVariable(v["remember"], path + "/remember");
    return r;
}

void requireBound(const std::string& s, const std::set<std::string>& bound, const std::string& path) {
    if (isVariable(s) && !bound.count(s))
        throw SchemaError(path, "unbound configuration variable " + s);
}

void validateCommon(const Config& cfg, const std::vector<Condition>& conds, const NewCall& call,
                    const std::vector<FlagAssignment>& setFlags, const std::optional<std::string>& remember,
                    const std::set<std::string>& bound, const std::string& path) {
    for (std::size_t i = 0; i < conds.size(); ++i) {
        std::string cp = path + "/conditions/" + std::to_string(i) + "/query";
        if (isVariable(conds[i].name()))
            throw SchemaError(cp + "/0", "query name cannot be a variable");
        for (std::size_t k = 1; k < conds[i].query.size(); ++k)
            requireBound(conds[i].query[k], bound, cp + "/" + std::to_string(k));
    }
    for (std::size_t k = 0; k + 1 < call.operands.size(); ++k)
        requireBound(call.operands[k], bound, path + "/newInstruction/operands/" + std::to_string(k));
    for (std::size_t i = 0; i < setFlags.size(); ++i)
        if (!cfg.isFlag(setFlags[i].first))
            throw SchemaError(path + "/setFlags/" + std::to_string(i),
                              "flag '" + setFlags[i].first + "' is not declared in 'flags'");
    if (remember)
        requireBound(*remember, bound, path + "/remember");
}

void validate(const Config& cfg) {
    for (std::size_t pi = 0; pi < cfg.phases.size(); ++pi) {
        const Phase& phase = cfg.phases[pi];
        for (std::size_t ri = 0; ri < phase.instructionRules.size(); ++ri) {
            const auto& r = phase.instructionRules[ri];
            std::string path = "/phases/" + std::to_string(pi) + "/instructionsRules/" + std::to_string(ri);
            std::set<std::string> bound;
            if (r.where == Where::Before || r.where == Where::After) {
                if (r.find.empty())
                    throw SchemaError(path + "/findInstructions",
                                      "'before'/'after' rules need a non-empty findInstructions");
                for (const auto& p : r.find) {
                    if (isVariable(p.returnValue))
                        bound.insert(p.returnValue);
                    if (p.operands)
                        for (const auto& o : *p.operands)
                            if (isVariable(o))
                                bound.insert(o);
                    if (p.getTypeSize)
                        bound.insert(*p.getTypeSize);
                }
                if (r.where == Where::After && ir::isTerminator(r.find.back().opcode))
                    throw SchemaError(path + "/where", "cannot insert after a terminator instruction");
            } else {
                for (std::size_t i = 0; i < r.conditions.size(); ++i)
                    if (!cfg.isFlag(r.conditions[i].name()))
                        throw SchemaError(path + "/conditions/" + std::to_string(i) + "/query/0",
                                          "entry/return rules may only use flag queries, '" +
                                              r.conditions[i].name() + "' is not a declared flag");
            }
            validateCommon(cfg, r.conditions, r.newInstruction, r.setFlags, r.remember, bound, path);
        }
        for (std::size_t ri = 0; ri < phase.globalRules.size(); ++ri) {
            const auto& r = phase.globalRules[ri];
            std::string path = "/phases/" + std::to_string(pi) + "/globalVariablesRules/" + std::to_string(ri);
            std::set<std::string> bound{r.globalVariable};
            if (r.getTypeSize)
                bound.insert(*r.getTypeSize);
            validateCommon(cfg, r.conditions, r.newInstruction, r.setFlags, r.remember, bound, path);
        }
    }
}

json conditionsJson(const std::vector<Condition>& conds) {
    json a = json::array();
    for (const auto& c : conds)
        a.push_back({{"query", c.query}, {"expectedResults", c.expectedResults}});
    return a;
}

json setFlagsJson(const std::vector<FlagAssignment>& flags) {
    json a = json::array();
    for (const auto& [f, v] : flags)
        a.push_back(json::array({f, v}));
    return a;
}

} // namespace

Config parseConfig(std::string_view jsonText) {
    json doc;
    try {
        doc = json::parse(jsonText);
    } catch (const json::parse_error& e) {
        throw JsonError(std::string("invalid JSON: ") + e.what());
    }
    return parseConfig(doc);
}

Config parseConfig(const json& doc) {
    requireObject(doc, "");
    checkKeys(doc, "", {"analyses", "flags", "phases", "file"});
    Config cfg;
    if (doc.contains("analyses")) {
        const json& a = doc["analyses"];
        if (!a.is_array())
            throw SchemaError("/analyses", "expected an array");
        for (std::size_t i = 0; i < a.size(); ++i)
            cfg.analyses.push_back(parsePlugin(a[i], "/analyses/" + std::to_string(i)));
    }
    if (doc.contains("flags")) {
        cfg.flags = getStringList(doc["flags"], "/flags", false);
        std::set<std::string> seen;
        for (std::size_t i = 0; i < cfg.flags.size(); ++i)
            if (!seen.insert(cfg.flags[i]).second)
                throw SchemaError("/flags/" + std::to_string(i), "duplicate flag '" + cfg.flags[i] + "'");
    }
    if (doc.contains("file"))
        cfg.definitionsFile = getString(doc["file"], "/file");
    if (!doc.contains("phases"))
        throw SchemaError("/phases", "missing mandatory field 'phases'");
    const json& phases = doc["phases"];
    if (!phases.is_array())
        throw SchemaError("/phases", "expected an array");
    if (phases.empty())
        throw SchemaError("/phases", "must contain at least one phase");
    for (std::size_t pi = 0; pi < phases.size(); ++pi) {
        std::string path = "/phases/" + std::to_string(pi);
        const json& p = requireObject(phases[pi], path);
        checkKeys(p, path, {"instructionsRules", "globalVariablesRules"});
        Phase phase;
        if (p.contains("instructionsRules")) {
            const json& rules = p["instructionsRules"];
            if (!rules.is_array())
                throw SchemaError(path + "/instructionsRules", "expected an array");
            for (std::size_t ri = 0; ri < rules.size(); ++ri)
                phase.instructionRules.push_back(
                    parseInstructionRule(rules[ri], path + "/instructionsRules/" + std::to_string(ri)));
        }
        if (p.contains("globalVariablesRules")) {
            const json& rules = p["globalVariablesRules"];
            if (!rules.is_array())
                throw SchemaError(path + "/globalVariablesRules", "expected an array");
            for (std::size_t ri = 0; ri < rules.size(); ++ri)
                phase.globalRules.push_back(
                    parseGlobalRule(rules[ri], path + "/globalVariablesRules/" + std::to_string(ri)));
        }
        cfg.phases.push_back(std::move(phase));
    }
    validate(cfg);
    return cfg;
}

json toJson(const Config& cfg) {
    json doc = json::object();
    if (!cfg.analyses.empty()) {
        json a = json::array();
        for (const auto& p : cfg.analyses)
            a.push_back(p.source);
        doc["analyses"] = a;
    }
    if (!cfg.flags.empty())
        doc["flags"] = cfg.flags;
    if (cfg.definitionsFile)
        doc["file"] = *cfg.definitionsFile;
    json phases = json::array();
    for (const auto& phase : cfg.phases) {
        json p = json::object();
        if (!phase.instructionRules.empty()) {
            json rules = json::array();
            for (const auto& r : phase.instructionRules) {
                json j = json::object();
                j["in"] = r.inFunction;
                if (!r.find.empty()) {
                    json f = json::array();
                    for (const auto& pat : r.find) {
                        json pj = {{"instruction", std::string(ir::opcodeName(pat.opcode))},
                                   {"returnValue", pat.returnValue}};
                        if (pat.operands)
                            pj["operands"] = *pat.operands;
                        if (pat.getTypeSize)
                            pj["getTypeSize"] = *pat.getTypeSize;
                        f.push_back(pj);
                    }
                    j["findInstructions"] = f;
                }
                if (!r.conditions.empty())
                    j["conditions"] = conditionsJson(r.conditions);
                j["newInstruction"] = {{"instruction", r.newInstruction.instruction},
                                       {"operands", r.newInstruction.operands}};
                j["where"] = std::string(whereName(r.where));
                if (!r.setFlags.empty())
                    j["setFlags"] = setFlagsJson(r.setFlags);
                if (r.remember)
                    j["remember"] = *r.remember;
                rules.push_back(j);
            }
            p["instructionsRules"] = rules;
        }
        if (!phase.globalRules.empty()) {
            json rules = json::array();
            for (const auto& r : phase.globalRules) {
                json j = json::object();
                j["findGlobals"] = {{"globalVariable", r.globalVariable}};
                if (r.getTypeSize)
                    j["findGlobals"]["getTypeSize"] = *r.getTypeSize;
                if (!r.conditions.empty())
                    j["conditions"] = conditionsJson(r.conditions);
                j["newInstruction"] = {{"instruction", r.newInstruction.instruction},
                                       {"operands", r.newInstruction.operands}};
                j["in"] = r.inFunction;
                if (!r.setFlags.empty())
                    j["setFlags"] = setFlagsJson(r.setFlags);
                if (r.remember)
                    j["remember"] = *r.remember;
                rules.push_back(j);
            }
            p["globalVariablesRules"] = rules;
        }
        phases.push_back(p);
    }
    doc["phases"] = phases;
    return doc;
}

std::vector<Warning> validateAgainstDefinitions(const Config& cfg, const ir::Module& defs) {
    std::vector<Warning> out;
    auto check = [&](const std::string& id, const NewCall& call) {
        const ir::Function* f = defs.findFunction(call.callee());
        if (!f) {
            out.push_back({id, "callee '" + call.callee() + "' is not defined in the definitions module"});
            return;
        }
        if (f->params.size() != call.argCount())
            out.push_back({id, "callee '" + call.callee() + "' takes " + std::to_string(f->params.size()) +
                                   " arguments, rule passes " + std::to_string(call.argCount())});
        if (!f->returnType.isVoid())
            out.push_back({id, "callee '" + call.callee() + "' does not return void"});
    };
    for (std::size_t pi = 0; pi < cfg.phases.size(); ++pi) {
        for (std::size_t ri = 0; ri < cfg.phases[pi].instructionRules.size(); ++ri)
            check(ruleId(pi, false, ri), cfg.phases[pi].instructionRules[ri].newInstruction);
        for (std::size_t ri = 0; ri < cfg.phases[pi].globalRules.size(); ++ri)
            check(ruleId(pi, true, ri), cfg.phases[pi].globalRules[ri].newInstruction);
    }
    return out;
}

} // namespace instr::config
