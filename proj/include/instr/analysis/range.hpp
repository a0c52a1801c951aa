#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "instr/analysis/plugin.hpp"
#include "instr/ir.hpp"

namespace instr::analysis {

/**
 * Closed signed interval. The full range of the value's bit width plays the
 * role of -inf/+inf; an empty interval is bottom.
 */
struct Interval {
    std::int64_t lo = 0;
    std::int64_t hi = -1;

    static Interval bottom() { return {0, -1}; }
    static Interval point(std::int64_t v) { return {v, v}; }
    static Interval full(unsigned width) { return {ir::signedMin(width), ir::signedMax(width)}; }

    bool empty() const { return lo > hi; }
    bool contains(std::int64_t v) const { return !empty() && lo <= v && v <= hi; }
    bool includes(const Interval& o) const { return o.empty() || (!empty() && lo <= o.lo && o.hi <= hi); }
    Interval join(const Interval& o) const;
    Interval meet(const Interval& o) const;

    friend bool operator==(const Interval& a, const Interval& b) {
        return (a.empty() && b.empty()) || (a.lo == b.lo && a.hi == b.hi);
    }
};

using Env = std::map<std::string, Interval>;

/** Result of the intraprocedural range analysis of one function. */
struct FunctionRanges {
    /** Environment at the end of each reachable block (branch refinements included). */
    std::map<std::string, Env> blockEnv;
    /** Interval of each integer register in its defining block (parameters: entry). */
    std::map<std::string, Interval> values;
    std::map<std::string, std::string> definingBlock;
    /** Block visits until the fixed point. */
    std::size_t iterations = 0;
    bool gaveUp = false;

    /** Interval of an integer value, optionally as seen in `block`. Unknown registers are full range. */
    Interval rangeOf(const ir::Value& v, const std::string& block = {}) const;
    bool reachable(const std::string& block) const { return blockEnv.count(block) != 0; }
};

/**
 * Forward fixed point over add/sub/mul/sdiv/udiv/srem/phi and icmp-guarded
 * branches. Parameters, loads and call results start at the full range.
 * A phi that grows more than twice is widened to the next icmp-derived
 * threshold, then to the type bound.
 */
FunctionRanges analyzeRanges(const ir::Function& f);

Answer canBeZero(const Interval& i);
/** `op` must be a binary arithmetic instruction of the analyzed function. */
Answer canOverflow(const ir::Instruction& op, const FunctionRanges& ranges, const std::string& block);

/** Exact mathematical result interval (may exceed the type range), as 128-bit bounds. */
struct WideInterval {
    __int128 lo = 0;
    __int128 hi = -1;
    bool empty() const { return lo > hi; }
};
WideInterval exactResult(ir::Opcode op, const Interval& a, const Interval& b);

/** Builtin "range" plugin: canBeZero(value), canOverflow(op). */
class RangePlugin final : public Plugin {
public:
    std::string name() const override { return "range"; }
    bool supports(std::string_view query) const override;
    void prepare(const ir::Module& module) override;
    Answer answer(const Query& query, const QueryContext& ctx) override;

    const FunctionRanges* ranges(const std::string& function) const;

private:
    const ir::Module* module_ = nullptr;
    std::map<std::string, FunctionRanges> functions_;
};

} // namespace instr::analysis
