#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "instr/ir.hpp"

namespace instr::analysis {

/** Plugin verdicts are open strings; builtins answer one of these. */
using Answer = std::string;

namespace answers {
inline constexpr std::string_view kTrue = "true";
inline constexpr std::string_view kFalse = "false";
inline constexpr std::string_view kMaybe = "maybe";
/** Returned by a plugin that declines a query it advertised. */
inline constexpr std::string_view kUnsupported = "unsupported";
} // namespace answers

/** A query argument: an IR value, an integer from getTypeSize, or an uninterpreted literal. */
using QueryArg = std::variant<ir::Value, std::int64_t, std::string>;

struct Query {
    std::string name;
    std::vector<QueryArg> args;
    /** Function whose registers the arguments name (empty for global rules). */
    std::string function;
    /** Block of the matched site, when known. */
    std::string block;
};

/** A value stored in the engine's auxiliary list, scoped by its function. */
struct RememberedValue {
    std::string function;
    ir::Value value;

    friend bool operator==(const RememberedValue&, const RememberedValue&) = default;
};

struct QueryContext {
    const std::vector<RememberedValue>* remembered = nullptr;
};

class Plugin {
public:
    virtual ~Plugin() = default;

    virtual std::string name() const = 0;
    virtual bool supports(std::string_view query) const = 0;
    /** Called once with the module being instrumented before any query. */
    virtual void prepare(const ir::Module& module) = 0;
    virtual Answer answer(const Query& query, const QueryContext& ctx) = 0;
};

using PluginList = std::vector<std::unique_ptr<Plugin>>;

/** Answers "maybe" to every query; stands in for all plugins with --no-plugins. */
class MaybePlugin final : public Plugin {
public:
    std::string name() const override { return "maybe"; }
    bool supports(std::string_view) const override { return true; }
    void prepare(const ir::Module&) override {}
    Answer answer(const Query&, const QueryContext&) override { return Answer(answers::kMaybe); }
};

} // namespace instr::analysis
