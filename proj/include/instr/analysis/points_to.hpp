#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "instr/analysis/plugin.hpp"
#include "instr/ir.hpp"

namespace instr::analysis {

/** Abstract memory object. Identity is (kind, function, name); size is a property of the object. */
struct Location {
    enum class Kind { Null, Unknown, Global, Stack, Heap, Function };

    Kind kind = Kind::Unknown;
    /** Allocating function for stack/heap objects. */
    std::string function;
    /** Allocating register (stack/heap), global or function name. */
    std::string name;
    std::optional<std::uint64_t> size;

    static Location null() { return {Kind::Null, {}, {}, std::nullopt}; }
    static Location unknown() { return {Kind::Unknown, {}, {}, std::nullopt}; }

    friend bool operator<(const Location& a, const Location& b) {
        if (a.kind != b.kind)
            return a.kind < b.kind;
        if (a.function != b.function)
            return a.function < b.function;
        return a.name < b.name;
    }
    friend bool operator==(const Location& a, const Location& b) {
        return a.kind == b.kind && a.function == b.function && a.name == b.name;
    }

    std::string str() const;
};

struct PointsToSet {
    std::set<Location> locations;
    /** Reached through pointer arithmetic (getelementptr). */
    bool derived = false;

    bool contains(Location::Kind k) const;
    bool onlyNull() const { return locations.size() == 1 && locations.begin()->kind == Location::Kind::Null; }

    friend bool operator==(const PointsToSet&, const PointsToSet&) = default;
};

/**
 * Flow- and field-insensitive inclusion-based (Andersen) points-to analysis
 * over a whole module. Allocation sites: alloca, malloc/calloc/realloc,
 * globals. External calls return unknown and let their pointer arguments
 * escape.
 */
class PointsToAnalysis {
public:
    explicit PointsToAnalysis(const ir::Module& module);

    /** An empty result stands for uninitialized or untracked memory and is reported as {unknown}. */
    PointsToSet pointsTo(const std::string& function, const ir::Value& v) const;

    /** One propagation pass over all constraints; returns whether anything changed. */
    bool propagateOnce();

    /** Object may be freed, dangling, or modified by external code while still pointed to. */
    bool mayBeInvalid(const Location& loc) const;
    bool escaped(const Location& loc) const { return escaped_.count(loc) != 0; }

    std::size_t passes() const { return passes_; }

private:
    struct Node {
        std::set<Location> pts;
        bool derived = false;
    };

    enum class CKind { AddrOf, Copy, Derive, Load, Store, Escape, Free };

    struct Constraint {
        CKind kind;
        std::string dst;
        std::string src;
        Location loc;
    };

    std::string operandNode(const std::string& function, const ir::Value& v);
    static std::string regNode(const std::string& function, const std::string& reg);
    static std::string contentNode(const Location& loc);

    void collect(const ir::Module& module);
    bool addAll(Node& dst, const Node& src, bool markDerived);
    void finish(const ir::Module& module);

    std::map<std::string, Node> nodes_;
    std::vector<Constraint> constraints_;
    std::set<Location> escaped_;
    std::set<Location> freed_;
    std::set<Location> dangling_;
    std::size_t passes_ = 0;
};

Answer isNull(const PointsToSet& pts);
Answer isValidPointer(const PointsToSet& pts, std::optional<std::int64_t> len, const PointsToAnalysis& pta);
/** `remembered` values of other functions only match by aliasing, never by identity of registers. */
Answer isRemembered(const std::string& function, const ir::Value& v, const std::vector<RememberedValue>& remembered,
                    const PointsToAnalysis& pta);

/** Builtin "points-to" plugin: isNull(ptr), isValidPointer(addr, len), isRemembered(value). */
class PointsToPlugin final : public Plugin {
public:
    std::string name() const override { return "points-to"; }
    bool supports(std::string_view query) const override;
    void prepare(const ir::Module& module) override;
    Answer answer(const Query& query, const QueryContext& ctx) override;

    const PointsToAnalysis* analysis() const { return pta_ ? &*pta_ : nullptr; }

private:
    std::optional<PointsToAnalysis> pta_;
};

} // namespace instr::analysis
