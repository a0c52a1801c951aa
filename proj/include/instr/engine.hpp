#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "instr/analysis/plugin.hpp"
#include "instr/config.hpp"
#include "instr/ir.hpp"

namespace instr::engine {

/** A configuration variable binding: an IR value, or a byte size from getTypeSize. */
using BoundValue = std::variant<ir::Value, std::int64_t>;
using Bindings = std::map<std::string, BoundValue>;

struct Match {
    Bindings bindings;
    /** Block indices of the matched instructions. */
    std::vector<std::size_t> indices;
};

/**
 * Matches `patterns` against consecutive non-synthetic instructions of
 * `block` starting at index `start`. Synthetic instructions between them
 * are skipped; a start index naming a synthetic instruction never matches.
 */
std::optional<Match> matchPattern(const ir::BasicBlock& block, std::size_t start,
                                  const std::vector<config::InstructionPattern>& patterns);

/** Does a pattern operand or return-value literal denote `v`? */
bool literalMatches(const std::string& literal, const ir::Value& v);

struct RuleStats {
    std::string id;
    config::Where where = config::Where::Before;
    std::size_t matches = 0;
    std::size_t applied = 0;
    std::size_t inserted = 0;
    /** Index i: evaluations stopped by condition i. */
    std::vector<std::size_t> rejections;
};

struct EngineState {
    /** Every declared flag is present, initially "false". */
    std::map<std::string, std::string> flags;
    std::vector<analysis::RememberedValue> remembered;
    std::vector<RuleStats> stats;
    std::vector<config::Warning> warnings;
};

/** Site a condition is evaluated at; empty block for entry/return/global rules. */
struct QuerySite {
    std::string function;
    std::string block;
};

/**
 * Conjunction of `conds`. Flag queries compare the flag value; plugin
 * queries ask every supporting plugin in order until one answer is
 * expected. `rejectedAt` receives the index of the first failing condition.
 */
bool evalConditions(const std::vector<config::Condition>& conds, const Bindings& bindings, const QuerySite& site,
                    const config::Config& cfg, EngineState& state, analysis::PluginList& plugins,
                    const std::string& ruleId, std::size_t* rejectedAt = nullptr);

/** Query argument for one query token. */
analysis::QueryArg queryArgument(const std::string& token, const Bindings& bindings);

/**
 * Builds the synthetic call for `call`, checking it against the callee's
 * signature in `defs`. Throws MissingDefinition or CalleeMismatch.
 */
ir::Instruction buildCall(const config::NewCall& call, const Bindings& bindings, const ir::Module& module,
                          const ir::Module& defs, const std::string& ruleId);

/** Names of `used` plus every function of `defs` they reach (calls and function references). */
std::set<std::string> definitionClosure(const ir::Module& defs, const std::set<std::string>& used);

/**
 * Appends the closure of `used` from `defs` to `out`: functions in defs order,
 * then the globals those functions reference. A definition replaces a
 * declaration of the same name; two definitions are a DuplicateDefinition.
 * Returns the names of functions added or completed.
 */
std::vector<std::string> mergeDefinitions(ir::Module& out, const ir::Module& defs, const std::set<std::string>& used);

struct Result {
    ir::Module module;
    nlohmann::json report;
    std::vector<config::Warning> warnings;
    std::size_t inserted = 0;
};

/**
 * Runs all phases of `cfg` on a copy of `input`. Plugins are prepared with
 * `input` before the first query. Throws EngineError subclasses.
 */
Result instrument(const ir::Module& input, const config::Config& cfg, const ir::Module& defs,
                  analysis::PluginList& plugins);

} // namespace instr::engine
