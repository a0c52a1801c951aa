#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "instr/ir.hpp"

namespace instr::config {

/** True for configuration-variable tokens of the form `<identifier>`. */
bool isVariable(std::string_view s);

struct PluginSpec {
    enum class Kind { Builtin, External };
    Kind kind = Kind::Builtin;
    /** Builtin plugin name ("range", "points-to") or the external command line. */
    std::string name;
    /** Text as written in the configuration. */
    std::string source;

    friend bool operator==(const PluginSpec&, const PluginSpec&) = default;
};

struct InstructionPattern {
    ir::Opcode opcode = ir::Opcode::Add;
    std::string returnValue = "*";
    /** Absent: operands are not constrained. */
    std::optional<std::vector<std::string>> operands;
    std::optional<std::string> getTypeSize;

    friend bool operator==(const InstructionPattern&, const InstructionPattern&) = default;
};

struct Condition {
    /** Head is the query name; the tail holds variables or literals. */
    std::vector<std::string> query;
    std::vector<std::string> expectedResults;

    const std::string& name() const { return query.front(); }

    friend bool operator==(const Condition&, const Condition&) = default;
};

struct NewCall {
    std::string instruction = "call";
    /** Arguments followed by the callee name. */
    std::vector<std::string> operands;

    const std::string& callee() const { return operands.back(); }
    std::size_t argCount() const { return operands.size() - 1; }

    friend bool operator==(const NewCall&, const NewCall&) = default;
};

enum class Where { Before, After, Entry, Return };

std::string_view whereName(Where w);

using FlagAssignment = std::pair<std::string, std::string>;

struct InstructionRule {
    std::string inFunction = "*";
    std::vector<InstructionPattern> find;
    std::vector<Condition> conditions;
    NewCall newInstruction;
    Where where = Where::Before;
    std::vector<FlagAssignment> setFlags;
    std::optional<std::string> remember;

    bool appliesIn(std::string_view function) const { return inFunction == "*" || inFunction == function; }

    friend bool operator==(const InstructionRule&, const InstructionRule&) = default;
};

struct GlobalRule {
    std::string globalVariable;
    std::optional<std::string> getTypeSize;
    std::vector<Condition> conditions;
    NewCall newInstruction;
    std::string inFunction;
    std::vector<FlagAssignment> setFlags;
    std::optional<std::string> remember;

    friend bool operator==(const GlobalRule&, const GlobalRule&) = default;
};

struct Phase {
    std::vector<InstructionRule> instructionRules;
    std::vector<GlobalRule> globalRules;

    friend bool operator==(const Phase&, const Phase&) = default;
};

struct Config {
    std::vector<PluginSpec> analyses;
    std::vector<std::string> flags;
    std::vector<Phase> phases;
    /** Path of the definitions module (`file`), as written. */
    std::optional<std::string> definitionsFile;

    bool isFlag(std::string_view name) const;

    friend bool operator==(const Config&, const Config&) = default;
};

/**
 * Parses and validates a JSON configuration. Throws JsonError for malformed
 * JSON and SchemaError (with a JSON-pointer style path) for schema
 * violations, including unknown keys.
 */
Config parseConfig(std::string_view jsonText);
Config parseConfig(const nlohmann::json& doc);
inline Config parseConfig(const std::string& jsonText) { return parseConfig(std::string_view(jsonText)); }
inline Config parseConfig(const char* jsonText) { return parseConfig(std::string_view(jsonText)); }

nlohmann::json toJson(const Config& cfg);

struct Warning {
    std::string ruleId;
    std::string message;
};

/** Identifier used in diagnostics, e.g. `phases[1].instructionsRules[0]`. */
std::string ruleId(std::size_t phase, bool global, std::size_t index);

/** Reports callees missing from `defs` and argument-count mismatches. */
std::vector<Warning> validateAgainstDefinitions(const Config& cfg, const ir::Module& defs);

} // namespace instr::config
