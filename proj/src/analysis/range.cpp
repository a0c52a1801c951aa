#include "instr/analysis/range.hpp"

#include <algorithm>
#include <limits>

namespace instr::analysis {

using ir::Instruction;
using ir::Opcode;
using ir::Predicate;
using ir::Value;

Interval Interval::join(const Interval& o) const {
    if (empty())
        return o;
    if (o.empty())
        return *this;
    return {std::min(lo, o.lo), std::max(hi, o.hi)};
}

Interval Interval::meet(const Interval& o) const {
    if (empty() || o.empty())
        return bottom();
    Interval r{std::max(lo, o.lo), std::min(hi, o.hi)};
    return r.empty() ? bottom() : r;
}

Interval FunctionRanges::rangeOf(const Value& v, const std::string& block) const {
    if (v.isIntConst())
        return Interval::point(v.intValue());
    if (!v.isRegister() || !v.type().isInt())
        return Interval::full(64);
    if (!block.empty()) {
        auto b = blockEnv.find(block);
        if (b == blockEnv.end())
            return Interval::bottom();
        auto it = b->second.find(v.name());
        if (it != b->second.end())
            return it->second;
    }
    auto it = values.find(v.name());
    if (it != values.end())
        return it->second;
    return Interval::full(v.type().width());
}

namespace {

__int128 truncDiv(__int128 a, __int128 b) {
    return a / b; // C++ division truncates toward zero, like sdiv
}

} // namespace

WideInterval exactResult(Opcode op, const Interval& a, const Interval& b) {
    WideInterval r;
    if (a.empty() || b.empty())
        return r;
    const __int128 alo = a.lo, ahi = a.hi, blo = b.lo, bhi = b.hi;
    switch (op) {
    case Opcode::Add:
        return {alo + blo, ahi + bhi};
    case Opcode::Sub:
        return {alo - bhi, ahi - blo};
    case Opcode::Mul: {
        __int128 c[4] = {alo * blo, alo * bhi, ahi * blo, ahi * bhi};
        return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
    }
    case Opcode::SDiv: {
        // Split the divisor around zero; the quotient is monotone in each operand on each side.
        std::pair<__int128, __int128> parts[2] = {{blo, std::min<__int128>(bhi, -1)},
                                                   {std::max<__int128>(blo, 1), bhi}};
        bool any = false;
        for (auto [dlo, dhi] : parts) {
            if (dlo > dhi)
                continue;
            __int128 c[4] = {truncDiv(alo, dlo), truncDiv(alo, dhi), truncDiv(ahi, dlo), truncDiv(ahi, dhi)};
            __int128 lo = *std::min_element(c, c + 4), hi = *std::max_element(c, c + 4);
            r = any ? WideInterval{std::min(r.lo, lo), std::max(r.hi, hi)} : WideInterval{lo, hi};
            any = true;
        }
        return r;
    }
    case Opcode::UDiv: {
        if (alo < 0 || blo < 0)
            return {0, static_cast<__int128>(std::numeric_limits<std::uint64_t>::max())};
        __int128 dlo = std::max<__int128>(blo, 1);
        if (dlo > bhi)
            return r;
        return {alo / bhi, ahi / dlo};
    }
    case Opcode::SRem: {
        __int128 m = 0;
        if (blo <= -1)
            m = std::max<__int128>(m, -blo);
        if (bhi >= 1)
            m = std::max<__int128>(m, bhi);
        if (m == 0)
            return r;
        if (alo == ahi && blo == bhi)
            return {alo % blo, alo % blo};
        __int128 bound = m - 1;
        if (alo >= 0)
            return {0, std::min(ahi, bound)};
        if (ahi <= 0)
            return {std::max(alo, -bound), 0};
        return {std::max(alo, -bound), std::min(ahi, bound)};
    }
    default:
        break;
    }
    return {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max()};
}

namespace {

Interval clampToType(const WideInterval& w, unsigned width) {
    if (w.empty())
        return Interval::bottom();
    if (w.lo < ir::signedMin(width) || w.hi > ir::signedMax(width))
        return Interval::full(width); // wraps
    return {static_cast<std::int64_t>(w.lo), static_cast<std::int64_t>(w.hi)};
}

struct PhiState {
    Interval value;
    int changes = 0;
};

class RangeSolver {
public:
    explicit RangeSolver(const ir::Function& f) : f_(f) {
        for (std::size_t i = 0; i < f.blocks.size(); ++i)
            index_[f.blocks[i].label] = i;
        preds_.resize(f.blocks.size());
        for (std::size_t i = 0; i < f.blocks.size(); ++i)
            for (const auto& l : f.blocks[i].instructions.back().labels)
                preds_[index_.at(l)].push_back(i);
        computeOrder();
        for (const auto& b : f.blocks)
            for (const auto& in : b.instructions) {
                if (in.result)
                    defs_[*in.result] = &in;
                if (in.opcode == Opcode::ICmp && in.type.isInt())
                    for (const auto& v : in.operands)
                        if (v.isIntConst())
                            for (__int128 d = -1; d <= 1; ++d)
                                thresholds_.insert(static_cast<__int128>(v.intValue()) + d);
            }
    }

    FunctionRanges run() {
        FunctionRanges res;
        if (f_.blocks.empty())
            return res;
        out_.assign(f_.blocks.size(), std::nullopt);
        std::set<std::size_t> work; // keyed by reverse-postorder position
        work.insert(0);
        const std::size_t cap = 1000 * (f_.blocks.size() + 1);
        while (!work.empty()) {
            std::size_t pos = *work.begin();
            work.erase(work.begin());
            std::size_t b = order_[pos];
            if (++res.iterations > cap) {
                res.gaveUp = true;
                break;
            }
            auto env = visit(b);
            if (env && (!out_[b] || *out_[b] != *env)) {
                out_[b] = std::move(env);
                for (const auto& l : f_.blocks[b].instructions.back().labels)
                    work.insert(rpoPos_[index_.at(l)]);
            }
        }
        if (res.gaveUp)
            return giveUp(res.iterations);
        for (std::size_t b = 0; b < f_.blocks.size(); ++b) {
            if (!out_[b])
                continue;
            const std::string& label = f_.blocks[b].label;
            res.blockEnv[label] = *out_[b];
            for (const auto& in : f_.blocks[b].instructions)
                if (in.result && in.resultType().isInt()) {
                    res.values[*in.result] = out_[b]->at(*in.result);
                    res.definingBlock[*in.result] = label;
                }
        }
        for (const auto& p : f_.params)
            if (p.type.isInt()) {
                res.values[p.name] = Interval::full(p.type.width());
                res.definingBlock[p.name] = f_.blocks[0].label;
            }
        return res;
    }

private:
    void computeOrder() {
        std::vector<bool> seen(f_.blocks.size(), false);
        std::vector<std::size_t> post;
        // Iterative DFS to get a reverse postorder.
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        seen[0] = true;
        while (!stack.empty()) {
            auto& [b, k] = stack.back();
            const auto& labels = f_.blocks[b].instructions.back().labels;
            if (k < labels.size()) {
                std::size_t s = index_.at(labels[k++]);
                if (!seen[s]) {
                    seen[s] = true;
                    stack.push_back({s, 0});
                }
            } else {
                post.push_back(b);
                stack.pop_back();
            }
        }
        order_.assign(post.rbegin(), post.rend());
        rpoPos_.assign(f_.blocks.size(), std::numeric_limits<std::size_t>::max());
        for (std::size_t i = 0; i < order_.size(); ++i)
            rpoPos_[order_[i]] = i;
    }

    Interval eval(const Env& env, const Value& v) const {
        if (v.isIntConst())
            return Interval::point(v.intValue());
        if (v.isRegister() && v.type().isInt()) {
            auto it = env.find(v.name());
            if (it != env.end())
                return it->second;
            return Interval::full(v.type().width());
        }
        return Interval::full(64);
    }

    /** Decides an icmp over intervals: 1 true, 0 false, -1 unknown. */
    static int decide(Predicate p, const Interval& a, const Interval& b) {
        if (a.empty() || b.empty())
            return -1;
        bool unsignedOk = a.lo >= 0 && b.lo >= 0;
        switch (p) {
        case Predicate::EQ:
            if (a.lo == a.hi && b.lo == b.hi && a.lo == b.lo)
                return 1;
            return a.meet(b).empty() ? 0 : -1;
        case Predicate::NE:
            if (a.lo == a.hi && b.lo == b.hi && a.lo == b.lo)
                return 0;
            return a.meet(b).empty() ? 1 : -1;
        case Predicate::ULT:
            if (!unsignedOk)
                return -1;
            [[fallthrough]];
        case Predicate::SLT:
            return a.hi < b.lo ? 1 : (a.lo >= b.hi ? 0 : -1);
        case Predicate::ULE:
            if (!unsignedOk)
                return -1;
            [[fallthrough]];
        case Predicate::SLE:
            return a.hi <= b.lo ? 1 : (a.lo > b.hi ? 0 : -1);
        case Predicate::UGT:
            if (!unsignedOk)
                return -1;
            [[fallthrough]];
        case Predicate::SGT:
            return a.lo > b.hi ? 1 : (a.hi <= b.lo ? 0 : -1);
        case Predicate::UGE:
            if (!unsignedOk)
                return -1;
            [[fallthrough]];
        case Predicate::SGE:
            return a.lo >= b.hi ? 1 : (a.hi < b.lo ? 0 : -1);
        }
        return -1;
    }

    static Predicate negate(Predicate p) {
        switch (p) {
        case Predicate::EQ: return Predicate::NE;
        case Predicate::NE: return Predicate::EQ;
        case Predicate::SLT: return Predicate::SGE;
        case Predicate::SLE: return Predicate::SGT;
        case Predicate::SGT: return Predicate::SLE;
        case Predicate::SGE: return Predicate::SLT;
        case Predicate::ULT: return Predicate::UGE;
        case Predicate::ULE: return Predicate::UGT;
        case Predicate::UGT: return Predicate::ULE;
        case Predicate::UGE: return Predicate::ULT;
        }
        return p;
    }

    static Predicate swap(Predicate p) {
        switch (p) {
        case Predicate::SLT: return Predicate::SGT;
        case Predicate::SLE: return Predicate::SGE;
        case Predicate::SGT: return Predicate::SLT;
        case Predicate::SGE: return Predicate::SLE;
        case Predicate::ULT: return Predicate::UGT;
        case Predicate::ULE: return Predicate::UGE;
        case Predicate::UGT: return Predicate::ULT;
        case Predicate::UGE: return Predicate::ULE;
        default: return p;
        }
    }

    /** Constrains `a` given `a p b`. */
    static Interval constrain(Predicate p, const Interval& a, const Interval& b) {
        if (a.empty() || b.empty())
            return Interval::bottom();
        auto sat = [](__int128 v) {
            return static_cast<std::int64_t>(std::clamp<__int128>(v, INT64_MIN, INT64_MAX));
        };
        bool unsignedOk = a.lo >= 0 && b.lo >= 0;
        switch (p) {
        case Predicate::EQ:
            return a.meet(b);
        case Predicate::NE:
            if (b.lo == b.hi) {
                if (a.lo == a.hi && a.lo == b.lo)
                    return Interval::bottom();
                if (a.lo == b.lo)
                    return {a.lo + 1, a.hi};
                if (a.hi == b.lo)
                    return {a.lo, a.hi - 1};
            }
            return a;
        case Predicate::ULT:
            if (b.lo >= 0)
                return a.meet({0, sat(static_cast<__int128>(b.hi) - 1)});
            return a;
        case Predicate::ULE:
            if (b.lo >= 0)
                return a.meet({0, b.hi});
            return a;
        case Predicate::UGT:
            if (!unsignedOk)
                return a;
            return a.meet({sat(static_cast<__int128>(b.lo) + 1), INT64_MAX});
        case Predicate::UGE:
            if (!unsignedOk)
                return a;
            return a.meet({b.lo, INT64_MAX});
        case Predicate::SLT:
            return a.meet({INT64_MIN, sat(static_cast<__int128>(b.hi) - 1)});
        case Predicate::SLE:
            return a.meet({INT64_MIN, b.hi});
        case Predicate::SGT:
            return a.meet({sat(static_cast<__int128>(b.lo) + 1), INT64_MAX});
        case Predicate::SGE:
            return a.meet({b.lo, INT64_MAX});
        }
        return a;
    }

    /** Environment flowing along from -> to, or nullopt when the edge is infeasible. */
    std::optional<Env> edgeEnv(std::size_t from, std::size_t to) const {
        if (!out_[from])
            return std::nullopt;
        Env env = *out_[from];
        const Instruction& term = f_.blocks[from].instructions.back();
        if (term.opcode != Opcode::Br || term.operands.empty() || term.labels[0] == term.labels[1])
            return env;
        bool onTrue = f_.blocks[to].label == term.labels[0];
        Interval c = eval(env, term.operands[0]);
        // i1 true is -1 in the signed representation.
        if (c.lo == c.hi)
            return ((c.lo != 0) == onTrue) ? std::optional<Env>(env) : std::nullopt;
        const Value& cond = term.operands[0];
        if (!cond.isRegister())
            return env;
        auto def = defs_.find(cond.name());
        if (def == defs_.end() || def->second->opcode != Opcode::ICmp || !def->second->type.isInt())
            return env;
        const Instruction& cmp = *def->second;
        Predicate p = onTrue ? cmp.predicate : negate(cmp.predicate);
        const Value& lhs = cmp.operands[0];
        const Value& rhs = cmp.operands[1];
        Interval a = eval(env, lhs), b = eval(env, rhs);
        Interval a2 = constrain(p, a, b);
        Interval b2 = constrain(swap(p), b, a);
        if (a2.empty() || b2.empty())
            return std::nullopt;
        if (lhs.isRegister())
            env[lhs.name()] = a2;
        if (rhs.isRegister())
            env[rhs.name()] = b2;
        return env;
    }

    Interval widen(const Interval& old, const Interval& next, unsigned width) const {
        Interval r = old.join(next);
        const __int128 tmin = ir::signedMin(width), tmax = ir::signedMax(width);
        if (next.lo < old.lo) {
            __int128 v = tmin;
            for (auto it = thresholds_.rbegin(); it != thresholds_.rend(); ++it)
                if (*it <= next.lo && *it >= tmin) {
                    v = *it;
                    break;
                }
            r.lo = static_cast<std::int64_t>(v);
        }
        if (next.hi > old.hi) {
            __int128 v = tmax;
            for (auto t : thresholds_)
                if (t >= next.hi && t <= tmax) {
                    v = t;
                    break;
                }
            r.hi = static_cast<std::int64_t>(v);
        }
        return r;
    }

    std::optional<Env> visit(std::size_t b) {
        const auto& block = f_.blocks[b];
        Env env;
        std::vector<std::optional<Env>> incoming(f_.blocks.size());
        if (b == 0) {
            for (const auto& p : f_.params)
                if (p.type.isInt())
                    env[p.name] = Interval::full(p.type.width());
        } else {
            bool any = false;
            for (std::size_t p : preds_[b]) {
                incoming[p] = edgeEnv(p, b);
                if (!incoming[p])
                    continue;
                if (!any) {
                    env = *incoming[p];
                    any = true;
                    continue;
                }
                for (const auto& [k, v] : *incoming[p]) {
                    auto it = env.find(k);
                    if (it == env.end())
                        env[k] = v;
                    else
                        it->second = it->second.join(v);
                }
            }
            if (!any)
                return std::nullopt;
        }

        for (const auto& in : block.instructions) {
            if (in.opcode == Opcode::Phi) {
                if (!in.type.isInt())
                    continue;
                Interval v = Interval::bottom();
                for (std::size_t k = 0; k < in.operands.size(); ++k) {
                    std::size_t p = index_.at(in.labels[k]);
                    if (incoming[p])
                        v = v.join(eval(*incoming[p], in.operands[k]));
                }
                auto& st = phis_[{b, *in.result}];
                if (st.value.empty()) {
                    st.value = v;
                } else if (!st.value.includes(v)) {
                    ++st.changes;
                    st.value = st.changes > 2 ? widen(st.value, v, in.type.width()) : st.value.join(v);
                }
                env[*in.result] = st.value;
                continue;
            }
            if (!in.result || !in.resultType().isInt())
                continue;
            unsigned w = in.resultType().width();
            switch (in.opcode) {
            case Opcode::Add:
            case Opcode::Sub:
            case Opcode::Mul:
            case Opcode::SDiv:
            case Opcode::UDiv:
            case Opcode::SRem:
                env[*in.result] = clampToType(exactResult(in.opcode, eval(env, in.operands[0]),
                                                          eval(env, in.operands[1])),
                                              w);
                break;
            case Opcode::ICmp: {
                int d = in.type.isInt() ? decide(in.predicate, eval(env, in.operands[0]), eval(env, in.operands[1]))
                                        : -1;
                env[*in.result] = d < 0 ? Interval{-1, 0} : Interval::point(d ? -1 : 0);
                break;
            }
            default:
                env[*in.result] = Interval::full(w);
                break;
            }
        }
        return env;
    }

    FunctionRanges giveUp(std::size_t iterations) const {
        FunctionRanges res;
        res.iterations = iterations;
        res.gaveUp = true;
        Env top;
        for (const auto& p : f_.params)
            if (p.type.isInt()) {
                top[p.name] = Interval::full(p.type.width());
                res.definingBlock[p.name] = f_.blocks[0].label;
            }
        for (const auto& b : f_.blocks)
            for (const auto& in : b.instructions)
                if (in.result && in.resultType().isInt()) {
                    top[*in.result] = Interval::full(in.resultType().width());
                    res.definingBlock[*in.result] = b.label;
                }
        res.values = top;
        for (const auto& b : f_.blocks)
            res.blockEnv[b.label] = top;
        return res;
    }

    const ir::Function& f_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> preds_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> rpoPos_;
    std::map<std::string, const Instruction*> defs_;
    std::set<__int128> thresholds_;
    std::vector<std::optional<Env>> out_;
    std::map<std::pair<std::size_t, std::string>, PhiState> phis_;
};

} // namespace

FunctionRanges analyzeRanges(const ir::Function& f) {
    return RangeSolver(f).run();
}

Answer canBeZero(const Interval& i) {
    if (!i.contains(0))
        return Answer(answers::kFalse);
    if (i.lo == 0 && i.hi == 0)
        return Answer(answers::kTrue);
    return Answer(answers::kMaybe);
}

Answer canOverflow(const Instruction& op, const FunctionRanges& ranges, const std::string& block) {
    if (!ir::isBinaryArith(op.opcode) || !op.type.isInt())
        return Answer(answers::kMaybe);
    if (!ranges.reachable(block))
        return Answer(answers::kFalse);
    if (op.opcode == Opcode::UDiv)
        return Answer(answers::kFalse);
    Interval a = ranges.rangeOf(op.operands[0], block);
    Interval b = ranges.rangeOf(op.operands[1], block);
    unsigned w = op.type.width();
    WideInterval r = exactResult(op.opcode, a, b);
    if (op.opcode == Opcode::SRem) {
        // srem overflows only for MIN % -1.
        bool minByMinusOne = a.contains(ir::signedMin(w)) && b.contains(-1);
        return Answer(minByMinusOne ? answers::kMaybe : answers::kFalse);
    }
    if (r.empty() || (r.lo >= ir::signedMin(w) && r.hi <= ir::signedMax(w)))
        return Answer(answers::kFalse);
    if (r.hi < ir::signedMin(w) || r.lo > ir::signedMax(w))
        return Answer(answers::kTrue);
    return Answer(answers::kMaybe);
}

bool RangePlugin::supports(std::string_view query) const {
    return query == "canBeZero" || query == "canOverflow";
}

void RangePlugin::prepare(const ir::Module& module) {
    module_ = &module;
    functions_.clear();
    for (const auto& f : module.functions)
        if (!f.isDeclaration())
            functions_.emplace(f.name, analyzeRanges(f));
}

const FunctionRanges* RangePlugin::ranges(const std::string& function) const {
    auto it = functions_.find(function);
    return it == functions_.end() ? nullptr : &it->second;
}

Answer RangePlugin::answer(const Query& q, const QueryContext&) {
    if (q.args.empty())
        return Answer(answers::kMaybe);
    const auto* v = std::get_if<Value>(&q.args[0]);
    if (!v) {
        if (const auto* n = std::get_if<std::int64_t>(&q.args[0]); n && q.name == "canBeZero")
            return Answer(*n == 0 ? answers::kTrue : answers::kFalse);
        return Answer(answers::kMaybe);
    }
    const FunctionRanges* fr = ranges(q.function);
    if (q.name == "canBeZero") {
        if (v->isIntConst())
            return canBeZero(Interval::point(v->intValue()));
        if (!v->isRegister() || !v->type().isInt() || !fr)
            return Answer(answers::kMaybe);
        std::string block = q.block;
        if (block.empty() || !fr->reachable(block)) {
            auto it = fr->definingBlock.find(v->name());
            block = it == fr->definingBlock.end() ? std::string() : it->second;
        }
        if (block.empty())
            return Answer(answers::kMaybe);
        return canBeZero(fr->rangeOf(*v, block));
    }
    if (q.name == "canOverflow") {
        if (!v->isRegister() || !fr)
            return Answer(answers::kMaybe);
        const ir::Function* f = module_->findFunction(q.function);
        const Instruction* def = f ? f->definingInstruction(v->name()) : nullptr;
        if (!def)
            return Answer(answers::kMaybe);
        auto it = fr->definingBlock.find(v->name());
        if (it == fr->definingBlock.end())
            return Answer(answers::kMaybe);
        return canOverflow(*def, *fr, it->second);
    }
    return Answer(answers::kUnsupported);
}

} // namespace instr::analysis
