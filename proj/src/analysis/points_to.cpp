#include "instr/analysis/points_to.hpp"

#include <algorithm>

namespace instr::analysis {

using ir::Opcode;
using ir::Value;

std::string Location::str() const {
    switch (kind) {
    case Kind::Null:
        return "null";
    case Kind::Unknown:
        return "unknown";
    case Kind::Global:
        return "@" + name;
    case Kind::Function:
        return "@" + name + "()";
    case Kind::Stack:
        return "stack(" + function + ":%" + name + ")";
    case Kind::Heap:
        return "heap(" + function + ":%" + name + ")";
    }
    return "?";
}

bool PointsToSet::contains(Location::Kind k) const {
    return std::any_of(locations.begin(), locations.end(), [k](const Location& l) { return l.kind == k; });
}

namespace {

bool isAllocator(const std::string& name) {
    return name == "malloc" || name == "calloc" || name == "realloc";
}

std::optional<std::uint64_t> constArg(const Value& v) {
    if (v.isIntConst() && v.intValue() >= 0)
        return static_cast<std::uint64_t>(v.intValue());
    return std::nullopt;
}

bool typeHoldsPointers(const ir::Type& t) {
    return t.isPointer() || (t.isArray() && typeHoldsPointers(t.element()));
}

void collectInitRefs(const ir::Constant& c, const ir::Type& type, std::set<Location>& out,
                     const ir::Module& module) {
    switch (c.kind) {
    case ir::Constant::Kind::Null:
        out.insert(Location::null());
        break;
    case ir::Constant::Kind::Zero:
        if (typeHoldsPointers(type))
            out.insert(Location::null());
        break;
    case ir::Constant::Kind::GlobalRef:
        if (const auto* g = module.findGlobal(c.name))
            out.insert({Location::Kind::Global, {}, g->name, ir::typeSize(g->type)});
        else
            out.insert({Location::Kind::Function, {}, c.name, std::nullopt});
        break;
    case ir::Constant::Kind::Array:
        for (const auto& e : c.elements)
            collectInitRefs(e, type.element(), out, module);
        break;
    case ir::Constant::Kind::Int:
        break;
    }
}

} // namespace

std::string PointsToAnalysis::regNode(const std::string& function, const std::string& reg) {
    return function + "/%" + reg;
}

std::string PointsToAnalysis::contentNode(const Location& loc) {
    return "*" + std::to_string(static_cast<int>(loc.kind)) + ":" + loc.function + "/" + loc.name;
}

std::string PointsToAnalysis::operandNode(const std::string& function, const Value& v) {
    switch (v.kind()) {
    case Value::Kind::Register:
        return regNode(function, v.name());
    case Value::Kind::Null:
        constraints_.push_back({CKind::AddrOf, "const:null", {}, Location::null()});
        return "const:null";
    case Value::Kind::Global:
        return "const:@" + v.name();
    case Value::Kind::Function: {
        std::string n = "const:@" + v.name() + "()";
        constraints_.push_back({CKind::AddrOf, n, {}, {Location::Kind::Function, {}, v.name(), std::nullopt}});
        return n;
    }
    case Value::Kind::IntConst:
        break;
    }
    return "const:int";
}

PointsToAnalysis::PointsToAnalysis(const ir::Module& module) {
    collect(module);
    while (propagateOnce()) {
    }
    finish(module);
}

void PointsToAnalysis::collect(const ir::Module& module) {
    for (const auto& g : module.globals) {
        Location loc{Location::Kind::Global, {}, g.name, ir::typeSize(g.type)};
        constraints_.push_back({CKind::AddrOf, "const:@" + g.name, {}, loc});
        if (!g.initializer) {
            constraints_.push_back({CKind::Escape, "const:@" + g.name, {}, {}});
            continue;
        }
        std::set<Location> init;
        collectInitRefs(*g.initializer, g.type, init, module);
        for (const auto& l : init)
            constraints_.push_back({CKind::AddrOf, contentNode(loc), {}, l});
    }

    for (const auto& f : module.functions) {
        if (f.isDeclaration())
            continue;
        for (const auto& b : f.blocks) {
            for (const auto& in : b.instructions) {
                const auto& ops = in.operands;
                std::string res = in.result ? regNode(f.name, *in.result) : std::string();
                switch (in.opcode) {
                case Opcode::Alloca:
                    constraints_.push_back(
                        {CKind::AddrOf, res, {}, {Location::Kind::Stack, f.name, *in.result, ir::typeSize(in.type)}});
                    break;
                case Opcode::Load:
                    if (typeHoldsPointers(in.type))
                        constraints_.push_back({CKind::Load, res, operandNode(f.name, ops[0]), {}});
                    break;
                case Opcode::Store:
                    if (typeHoldsPointers(in.type))
                        constraints_.push_back(
                            {CKind::Store, operandNode(f.name, ops[1]), operandNode(f.name, ops[0]), {}});
                    break;
                case Opcode::GetElementPtr:
                    constraints_.push_back({CKind::Derive, res, operandNode(f.name, ops[0]), {}});
                    break;
                case Opcode::Phi:
                    if (in.type.isPointer())
                        for (const auto& v : ops)
                            constraints_.push_back({CKind::Copy, res, operandNode(f.name, v), {}});
                    break;
                case Opcode::Call: {
                    const std::string& callee = in.callee();
                    std::size_t nargs = ops.size() - 1;
                    const ir::Function* target = module.findFunction(callee);
                    if (isAllocator(callee)) {
                        if (!in.result)
                            break;
                        std::optional<std::uint64_t> size;
                        if (callee == "malloc" && nargs == 1)
                            size = constArg(ops[0]);
                        else if (callee == "calloc" && nargs == 2) {
                            auto a = constArg(ops[0]), c = constArg(ops[1]);
                            if (a && c)
                                size = *a * *c;
                        }
                        Location heap{Location::Kind::Heap, f.name, *in.result, size};
                        constraints_.push_back({CKind::AddrOf, res, {}, heap});
                        if (callee == "realloc") {
                            constraints_.push_back({CKind::AddrOf, contentNode(heap), {}, Location::unknown()});
                            if (nargs >= 1)
                                constraints_.push_back({CKind::Free, {}, operandNode(f.name, ops[0]), {}});
                        }
                    } else if (callee == "free") {
                        if (nargs >= 1)
                            constraints_.push_back({CKind::Free, {}, operandNode(f.name, ops[0]), {}});
                    } else if (target && !target->isDeclaration()) {
                        for (std::size_t i = 0; i < nargs && i < target->params.size(); ++i)
                            if (ops[i].type().isPointer())
                                constraints_.push_back(
                                    {CKind::Copy, regNode(target->name, target->params[i].name),
                                     operandNode(f.name, ops[i]), {}});
                        if (in.result && in.type.isPointer())
                            for (const auto& tb : target->blocks) {
                                const auto& term = tb.instructions.back();
                                if (term.opcode == Opcode::Ret && !term.operands.empty())
                                    constraints_.push_back(
                                        {CKind::Copy, res, operandNode(target->name, term.operands[0]), {}});
                            }
                    } else {
                        for (std::size_t i = 0; i < nargs; ++i)
                            if (ops[i].type().isPointer())
                                constraints_.push_back({CKind::Escape, operandNode(f.name, ops[i]), {}, {}});
                        if (in.result && in.type.isPointer())
                            constraints_.push_back({CKind::AddrOf, res, {}, Location::unknown()});
                    }
                    break;
                }
                default:
                    break;
                }
            }
        }
        // Pointer parameters of functions nobody in the module calls come from outside.
        bool called = false;
        for (const auto& g : module.functions)
            for (const auto& b : g.blocks)
                for (const auto& in : b.instructions)
                    if (in.opcode == Opcode::Call && in.callee() == f.name)
                        called = true;
        if (!called)
            for (const auto& p : f.params)
                if (p.type.isPointer())
                    constraints_.push_back({CKind::AddrOf, regNode(f.name, p.name), {}, Location::unknown()});
    }
    constraints_.push_back({CKind::AddrOf, contentNode(Location::unknown()), {}, Location::unknown()});
}

bool PointsToAnalysis::addAll(Node& dst, const Node& src, bool markDerived) {
    bool changed = false;
    for (const auto& l : src.pts)
        changed |= dst.pts.insert(l).second;
    bool d = src.derived || markDerived;
    if (d && !dst.derived && !src.pts.empty()) {
        dst.derived = true;
        changed = true;
    }
    return changed;
}

bool PointsToAnalysis::propagateOnce() {
    ++passes_;
    bool changed = false;
    for (const auto& c : constraints_) {
        switch (c.kind) {
        case CKind::AddrOf:
            changed |= nodes_[c.dst].pts.insert(c.loc).second;
            break;
        case CKind::Copy:
        case CKind::Derive: {
            Node src = nodes_[c.src];
            changed |= addAll(nodes_[c.dst], src, c.kind == CKind::Derive);
            break;
        }
        case CKind::Load: {
            std::set<Location> targets = nodes_[c.src].pts;
            for (const auto& l : targets) {
                if (l.kind == Location::Kind::Null)
                    continue;
                Node content = nodes_[contentNode(l)];
                changed |= addAll(nodes_[c.dst], content, false);
            }
            break;
        }
        case CKind::Store: {
            std::set<Location> targets = nodes_[c.dst].pts;
            Node value = nodes_[c.src];
            for (const auto& l : targets) {
                if (l.kind == Location::Kind::Null)
                    continue;
                if (l.kind == Location::Kind::Unknown) {
                    for (const auto& v : value.pts)
                        if (v.kind != Location::Kind::Null && v.kind != Location::Kind::Unknown)
                            changed |= escaped_.insert(v).second;
                    continue;
                }
                changed |= addAll(nodes_[contentNode(l)], value, false);
            }
            break;
        }
        case CKind::Escape:
            for (const auto& l : nodes_[c.dst].pts)
                if (l.kind != Location::Kind::Null && l.kind != Location::Kind::Unknown)
                    changed |= escaped_.insert(l).second;
            break;
        case CKind::Free:
            for (const auto& l : nodes_[c.src].pts)
                if (l.kind == Location::Kind::Heap)
                    changed |= freed_.insert(l).second;
            break;
        }
    }
    // Anything reachable from an escaped object is escaped too, and external code may overwrite it.
    std::set<Location> work = escaped_;
    for (const auto& l : work) {
        Node& content = nodes_[contentNode(l)];
        changed |= content.pts.insert(Location::unknown()).second;
        for (const auto& inner : std::set<Location>(content.pts))
            if (inner.kind != Location::Kind::Null && inner.kind != Location::Kind::Unknown)
                changed |= escaped_.insert(inner).second;
    }
    return changed;
}

void PointsToAnalysis::finish(const ir::Module& module) {
    // Stack objects that may outlive their frame.
    for (const auto& f : module.functions)
        for (const auto& b : f.blocks) {
            const auto& term = b.instructions.back();
            if (term.opcode != Opcode::Ret || term.operands.empty() || !term.operands[0].isRegister())
                continue;
            for (const auto& l : nodes_[regNode(f.name, term.operands[0].name())].pts)
                if (l.kind == Location::Kind::Stack && l.function == f.name)
                    dangling_.insert(l);
        }
    for (const auto& [key, node] : nodes_) {
        if (key.empty() || key[0] != '*')
            continue;
        // Content of stack objects of the same function is fine; anything else may outlive the frame.
        for (const auto& l : node.pts) {
            if (l.kind != Location::Kind::Stack)
                continue;
            std::string ownerPrefix = "*" + std::to_string(static_cast<int>(Location::Kind::Stack)) + ":" + l.function + "/";
            if (key.rfind(ownerPrefix, 0) != 0)
                dangling_.insert(l);
        }
    }
}

PointsToSet PointsToAnalysis::pointsTo(const std::string& function, const Value& v) const {
    PointsToSet out;
    switch (v.kind()) {
    case Value::Kind::Null:
        out.locations.insert(Location::null());
        return out;
    case Value::Kind::Global: {
        auto it = nodes_.find("const:@" + v.name());
        if (it != nodes_.end())
            out.locations = it->second.pts;
        break;
    }
    case Value::Kind::Function:
        out.locations.insert({Location::Kind::Function, {}, v.name(), std::nullopt});
        return out;
    case Value::Kind::Register: {
        auto it = nodes_.find(regNode(function, v.name()));
        if (it != nodes_.end()) {
            out.locations = it->second.pts;
            out.derived = it->second.derived;
        }
        break;
    }
    case Value::Kind::IntConst:
        break;
    }
    if (out.locations.empty())
        out.locations.insert(Location::unknown());
    return out;
}

bool PointsToAnalysis::mayBeInvalid(const Location& loc) const {
    switch (loc.kind) {
    case Location::Kind::Heap:
        return freed_.count(loc) || escaped_.count(loc);
    case Location::Kind::Stack:
        return dangling_.count(loc) != 0;
    case Location::Kind::Global:
        return false;
    default:
        return true;
    }
}

Answer isNull(const PointsToSet& pts) {
    if (pts.onlyNull())
        return Answer(answers::kTrue);
    if (!pts.contains(Location::Kind::Null) && !pts.contains(Location::Kind::Unknown))
        return Answer(answers::kFalse);
    return Answer(answers::kMaybe);
}

Answer isValidPointer(const PointsToSet& pts, std::optional<std::int64_t> len, const PointsToAnalysis& pta) {
    if (pts.onlyNull())
        return Answer(answers::kFalse);
    if (pts.derived || !len || *len < 0 || pts.contains(Location::Kind::Unknown) ||
        pts.contains(Location::Kind::Null))
        return Answer(answers::kMaybe);
    for (const auto& l : pts.locations) {
        if (!l.size || *l.size < static_cast<std::uint64_t>(*len) || pta.mayBeInvalid(l))
            return Answer(answers::kMaybe);
        if (l.kind == Location::Kind::Function)
            return Answer(answers::kMaybe);
    }
    return Answer(answers::kTrue);
}

namespace {

bool mayOverlap(const PointsToSet& a, const PointsToSet& b, const PointsToAnalysis& pta) {
    for (const auto& l : a.locations)
        if (l.kind != Location::Kind::Null && l.kind != Location::Kind::Unknown && b.locations.count(l))
            return true;
    auto unknownHits = [&](const PointsToSet& u, const PointsToSet& other) {
        if (!u.contains(Location::Kind::Unknown))
            return false;
        for (const auto& l : other.locations)
            if (l.kind == Location::Kind::Unknown || pta.escaped(l))
                return true;
        return false;
    };
    return unknownHits(a, b) || unknownHits(b, a);
}

} // namespace

Answer isRemembered(const std::string& function, const Value& v, const std::vector<RememberedValue>& remembered,
                    const PointsToAnalysis& pta) {
    for (const auto& r : remembered)
        if (r.value == v && (!v.isRegister() || r.function == function))
            return Answer(answers::kTrue);
    PointsToSet mine = pta.pointsTo(function, v);
    for (const auto& r : remembered)
        if (mayOverlap(mine, pta.pointsTo(r.function, r.value), pta))
            return Answer(answers::kMaybe);
    return Answer(answers::kFalse);
}

bool PointsToPlugin::supports(std::string_view query) const {
    return query == "isNull" || query == "isValidPointer" || query == "isRemembered";
}

void PointsToPlugin::prepare(const ir::Module& module) {
    pta_.emplace(module);
}

Answer PointsToPlugin::answer(const Query& q, const QueryContext& ctx) {
    if (!pta_ || q.args.empty())
        return Answer(answers::kMaybe);
    const auto* v = std::get_if<Value>(&q.args[0]);
    if (!v)
        return Answer(answers::kMaybe);
    if (q.name == "isNull")
        return isNull(pta_->pointsTo(q.function, *v));
    if (q.name == "isValidPointer") {
        std::optional<std::int64_t> len;
        if (q.args.size() >= 2) {
            if (const auto* n = std::get_if<std::int64_t>(&q.args[1]))
                len = *n;
            else if (const auto* lv = std::get_if<Value>(&q.args[1]); lv && lv->isIntConst())
                len = lv->intValue();
        }
        return isValidPointer(pta_->pointsTo(q.function, *v), len, *pta_);
    }
    if (q.name == "isRemembered") {
        static const std::vector<RememberedValue> none;
        return isRemembered(q.function, *v, ctx.remembered ? *ctx.remembered : none, *pta_);
    }
    return Answer(answers::kUnsupported);
}

} // namespace instr::analysis
