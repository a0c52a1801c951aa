#include "instr/engine.hpp"

#include <algorithm>

namespace instr::engine {

using config::Where;
using ir::Opcode;
using ir::Value;

namespace {

bool bindVar(Bindings& b, const std::string& var, const BoundValue& v) {
    auto [it, inserted] = b.emplace(var, v);
    return inserted || it->second == v;
}

bool matchOne(const ir::Instruction& in, const config::InstructionPattern& p, Bindings& b) {
    if (in.opcode != p.opcode)
        return false;
    if (p.returnValue != "*") {
        if (!in.result)
            return false;
        if (config::isVariable(p.returnValue)) {
            if (!bindVar(b, p.returnValue, Value::reg(*in.result, in.resultType())))
                return false;
        } else if (p.returnValue != "%" + *in.result && p.returnValue != *in.result) {
            return false;
        }
    }
    if (p.operands) {
        const auto& ops = *p.operands;
        if (ops.size() != in.operands.size())
            return false;
        for (std::size_t k = 0; k < ops.size(); ++k) {
            if (ops[k] == "*")
                continue;
            if (config::isVariable(ops[k])) {
                if (!bindVar(b, ops[k], in.operands[k]))
                    return false;
            } else if (!literalMatches(ops[k], in.operands[k])) {
                return false;
            }
        }
    }
    if (p.getTypeSize) {
        if (in.opcode != Opcode::Load && in.opcode != Opcode::Store && in.opcode != Opcode::Alloca)
            return false;
        if (!bindVar(b, *p.getTypeSize, static_cast<std::int64_t>(ir::typeSize(in.type))))
            return false;
    }
    return true;
}

std::size_t phiEnd(const ir::BasicBlock& block) {
    std::size_t i = 0;
    while (i < block.instructions.size() && block.instructions[i].opcode == Opcode::Phi)
        ++i;
    return i;
}

bool parseInt(const std::string& s, std::int64_t& out) {
    if (s.empty())
        return false;
    std::size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size())
        return false;
    for (std::size_t k = i; k < s.size(); ++k)
        if (s[k] < '0' || s[k] > '9')
            return false;
    try {
        out = std::stoll(s);
    } catch (const std::out_of_range&) {
        return false;
    }
    return true;
}

} // namespace

bool literalMatches(const std::string& literal, const Value& v) {
    if (literal == v.str() || literal == v.typedStr())
        return true;
    return (v.isGlobal() || v.isFunction()) && literal == v.name();
}

std::optional<Match> matchPattern(const ir::BasicBlock& block, std::size_t start,
                                  const std::vector<config::InstructionPattern>& patterns) {
    if (patterns.empty() || start >= block.instructions.size() || block.instructions[start].synthetic)
        return std::nullopt;
    Match m;
    std::size_t i = start;
    for (const auto& p : patterns) {
        while (i < block.instructions.size() && block.instructions[i].synthetic)
            ++i;
        if (i >= block.instructions.size() || !matchOne(block.instructions[i], p, m.bindings))
            return std::nullopt;
        m.indices.push_back(i);
        ++i;
    }
    return m;
}

analysis::QueryArg queryArgument(const std::string& token, const Bindings& bindings) {
    if (config::isVariable(token)) {
        const BoundValue& b = bindings.at(token);
        if (const auto* v = std::get_if<Value>(&b))
            return *v;
        return std::get<std::int64_t>(b);
    }
    std::int64_t n = 0;
    if (parseInt(token, n))
        return Value::intConst(n, ir::Type::integer(64));
    if (token == "null")
        return Value::null();
    return token;
}

bool evalConditions(const std::vector<config::Condition>& conds, const Bindings& bindings, const QuerySite& site,
                    const config::Config& cfg, EngineState& state, analysis::PluginList& plugins,
                    const std::string& ruleId, std::size_t* rejectedAt) {
    for (std::size_t ci = 0; ci < conds.size(); ++ci) {
        const auto& c = conds[ci];
        auto expected = [&](const std::string& answer) {
            return std::find(c.expectedResults.begin(), c.expectedResults.end(), answer) != c.expectedResults.end();
        };
        bool ok = false;
        if (cfg.isFlag(c.name())) {
            ok = expected(state.flags[c.name()]);
        } else {
            analysis::Query q;
            q.name = c.name();
            q.function = site.function;
            q.block = site.block;
            for (std::size_t k = 1; k < c.query.size(); ++k)
                q.args.push_back(queryArgument(c.query[k], bindings));
            analysis::QueryContext ctx{&state.remembered};
            bool asked = false;
            for (auto& p : plugins) {
                if (!p->supports(q.name))
                    continue;
                analysis::Answer a;
                try {
                    a = p->answer(q, ctx);
                } catch (const PluginFailure& e) {
                    throw PluginFailure(ruleId + ": plugin '" + p->name() + "' failed on " + q.name + ": " +
                                        e.what());
                }
                if (a == analysis::answers::kUnsupported)
                    continue;
                asked = true;
                if (expected(a)) {
                    ok = true;
                    break;
                }
            }
            if (!asked) {
                std::string msg = "no loaded plugin answers query '" + q.name + "'; condition is unsatisfied";
                bool seen = std::any_of(state.warnings.begin(), state.warnings.end(), [&](const config::Warning& w) {
                    return w.ruleId == ruleId && w.message == msg;
                });
                if (!seen)
                    state.warnings.push_back({ruleId, msg});
            }
        }
        if (!ok) {
            if (rejectedAt)
                *rejectedAt = ci;
            return false;
        }
    }
    return true;
}

ir::Instruction buildCall(const config::NewCall& call, const Bindings& bindings, const ir::Module& module,
                          const ir::Module& defs, const std::string& ruleId) {
    const std::string& callee = call.callee();
    const ir::Function* f = defs.findFunction(callee);
    if (!f)
        throw MissingDefinition(ruleId + ": no definition of '" + callee + "' in the definitions module");
    auto mismatch = [&](const std::string& msg) {
        return CalleeMismatch(ruleId + ": call to '" + callee + "': " + msg);
    };
    if (!f->returnType.isVoid())
        throw mismatch("instrumentation functions must return void");
    if (f->params.size() != call.argCount())
        throw mismatch("expects " + std::to_string(f->params.size()) + " arguments, rule passes " +
                       std::to_string(call.argCount()));
    std::vector<Value> args;
    for (std::size_t k = 0; k < call.argCount(); ++k) {
        const std::string& tok = call.operands[k];
        const ir::Type& pt = f->params[k].type;
        Value v = Value::null();
        if (config::isVariable(tok)) {
            const BoundValue& b = bindings.at(tok);
            if (const auto* bv = std::get_if<Value>(&b))
                v = *bv;
            else
                v = Value::intConst(std::get<std::int64_t>(b), ir::Type::integer(64));
        } else {
            std::int64_t n = 0;
            if (parseInt(tok, n)) {
                v = Value::intConst(n, pt.isInt() ? pt : ir::Type::integer(64));
            } else if (tok == "null") {
                v = Value::null();
            } else if (tok.size() > 1 && tok[0] == '@' && module.findGlobal(tok.substr(1))) {
                v = Value::global(tok.substr(1));
            } else if (tok.size() > 1 && tok[0] == '@' && module.findFunction(tok.substr(1))) {
                v = Value::function(tok.substr(1));
            } else {
                throw mismatch("argument " + std::to_string(k) + " '" + tok + "' is not a value");
            }
        }
        bool kindOk = (pt.isInt() && v.type().isInt()) || (pt.isPointer() && v.type().isPointer());
        if (!kindOk)
            throw mismatch("argument " + std::to_string(k) + " has type " + v.type().str() + ", parameter is " +
                           pt.str());
        args.push_back(v);
    }
    return ir::makeSyntheticCall(callee, std::move(args));
}

std::set<std::string> definitionClosure(const ir::Module& defs, const std::set<std::string>& used) {
    std::set<std::string> seen;
    std::vector<std::string> work(used.begin(), used.end());
    while (!work.empty()) {
        std::string name = work.back();
        work.pop_back();
        if (!seen.insert(name).second)
            continue;
        const ir::Function* f = defs.findFunction(name);
        if (!f)
            continue;
        for (const auto& b : f->blocks)
            for (const auto& in : b.instructions)
                for (const auto& op : in.operands)
                    if (op.isFunction() && !seen.count(op.name()))
                        work.push_back(op.name());
    }
    return seen;
}

std::vector<std::string> mergeDefinitions(ir::Module& out, const ir::Module& defs, const std::set<std::string>& used) {
    std::vector<std::string> added;
    if (used.empty())
        return added;
    std::set<std::string> closure = definitionClosure(defs, used);
    for (const auto& name : closure)
        if (!defs.findFunction(name))
            throw MissingDefinition("'" + name + "' is not defined in the definitions module");

    std::set<std::string> globals;
    for (const auto& f : defs.functions) {
        if (!closure.count(f.name))
            continue;
        for (const auto& b : f.blocks)
            for (const auto& in : b.instructions)
                for (const auto& op : in.operands)
                    if (op.isGlobal())
                        globals.insert(op.name());
        ir::Function* existing = out.findFunction(f.name);
        if (!existing) {
            out.functions.push_back(f);
            added.push_back(f.name);
            continue;
        }
        bool sameSig = existing->returnType == f.returnType && existing->params.size() == f.params.size() &&
                       std::equal(existing->params.begin(), existing->params.end(), f.params.begin(),
                                  [](const ir::Param& a, const ir::Param& b) { return a.type == b.type; });
        if (!sameSig)
            throw CalleeMismatch("'" + f.name + "' has different signatures in the input and definitions modules");
        if (f.isDeclaration())
            continue;
        if (!existing->isDeclaration())
            throw DuplicateDefinition("'" + f.name + "' is defined in both the input and the definitions module");
        *existing = f;
        added.push_back(f.name);
    }
    for (const auto& g : defs.globals) {
        if (!globals.count(g.name))
            continue;
        if (const auto* existing = out.findGlobal(g.name)) {
            if (!(*existing == g))
                throw DuplicateDefinition("global '@" + g.name + "' differs between input and definitions module");
            continue;
        }
        out.globals.push_back(g);
    }
    return added;
}

namespace {

class Runner {
public:
    Runner(const ir::Module& input, const config::Config& cfg, const ir::Module& defs, analysis::PluginList& plugins)
        : out_(input), cfg_(cfg), defs_(defs), plugins_(plugins) {
        for (const auto& f : cfg.flags)
            state_.flags[f] = "false";
    }

    Result run() {
        for (std::size_t pi = 0; pi < cfg_.phases.size(); ++pi)
            runPhase(pi);
        std::vector<std::string> merged = mergeDefinitions(out_, defs_, used_);
        Result r;
        r.inserted = inserted_;
        r.warnings = state_.warnings;
        r.report = report(merged);
        r.module = std::move(out_);
        return r;
    }

private:
    RuleStats& stats(std::size_t pi, bool global, std::size_t ri, Where where, std::size_t nconds) {
        std::string id = config::ruleId(pi, global, ri);
        for (auto& s : state_.stats)
            if (s.id == id)
                return s;
        RuleStats s;
        s.id = id;
        s.where = where;
        s.rejections.assign(nconds, 0);
        state_.stats.push_back(std::move(s));
        return state_.stats.back();
    }

    void applyEffects(const std::vector<config::FlagAssignment>& setFlags, const std::optional<std::string>& remember,
                      const Bindings& b, const std::string& function) {
        for (const auto& [flag, value] : setFlags)
            state_.flags[flag] = value;
        if (remember) {
            const BoundValue& v = b.at(*remember);
            if (const auto* val = std::get_if<Value>(&v))
                state_.remembered.push_back({function, *val});
            else
                state_.remembered.push_back(
                    {function, Value::intConst(std::get<std::int64_t>(v), ir::Type::integer(64))});
        }
    }

    void noteInsert(RuleStats& s, const ir::Instruction& call) {
        ++s.inserted;
        ++inserted_;
        used_.insert(call.callee());
    }

    void insertAtEntry(ir::Function& f, ir::Instruction call) {
        ir::BasicBlock& entry = f.blocks.front();
        std::size_t& cursor = entryCursor_[f.name];
        ir::insertBefore(entry, phiEnd(entry) + cursor, std::move(call));
        ++cursor;
    }

    void runPhase(std::size_t pi) {
        const config::Phase& phase = cfg_.phases[pi];
        const auto& rules = phase.instructionRules;
        for (std::size_t ri = 0; ri < rules.size(); ++ri)
            stats(pi, false, ri, rules[ri].where, rules[ri].conditions.size());
        for (std::size_t ri = 0; ri < phase.globalRules.size(); ++ri)
            stats(pi, true, ri, Where::Entry, phase.globalRules[ri].conditions.size());

        for (auto& f : out_.functions) {
            if (f.isDeclaration())
                continue;
            for (auto& block : f.blocks) {
                std::size_t i = 0;
                while (i < block.instructions.size()) {
                    if (!block.instructions[i].synthetic)
                        i += siteRules(pi, f, block, i);
                    ++i;
                }
            }
        }

        for (std::size_t ri = 0; ri < rules.size(); ++ri) {
            const auto& r = rules[ri];
            if (r.where != Where::Entry && r.where != Where::Return)
                continue;
            RuleStats& s = stats(pi, false, ri, r.where, r.conditions.size());
            std::string id = s.id;
            ++s.matches;
            std::size_t rejected = 0;
            if (!evalConditions(r.conditions, {}, {r.inFunction == "*" ? "" : r.inFunction, ""}, cfg_, state_,
                                plugins_, id, &rejected)) {
                ++stats(pi, false, ri, r.where, 0).rejections[rejected];
                continue;
            }
            RuleStats& st = stats(pi, false, ri, r.where, 0);
            ++st.applied;
            for (auto& f : out_.functions) {
                if (f.isDeclaration() || !r.appliesIn(f.name))
                    continue;
                if (r.where == Where::Entry) {
                    ir::Instruction call = buildCall(r.newInstruction, {}, out_, defs_, id);
                    noteInsert(st, call);
                    insertAtEntry(f, std::move(call));
                    continue;
                }
                for (auto& block : f.blocks) {
                    std::size_t last = block.instructions.size() - 1;
                    if (block.instructions[last].opcode != Opcode::Ret)
                        continue;
                    ir::Instruction call = buildCall(r.newInstruction, {}, out_, defs_, id);
                    noteInsert(st, call);
                    ir::insertBefore(block, last, std::move(call));
                }
            }
            applyEffects(r.setFlags, r.remember, {}, r.inFunction == "*" ? "" : r.inFunction);
        }

        for (std::size_t ri = 0; ri < phase.globalRules.size(); ++ri)
            globalRule(pi, ri, phase.globalRules[ri]);
    }

    /** Tries the phase's site rules at `block[i]`; returns how far the scan position shifted. */
    std::size_t siteRules(std::size_t pi, ir::Function& f, ir::BasicBlock& block, std::size_t i) {
        const auto& rules = cfg_.phases[pi].instructionRules;
        for (std::size_t ri = 0; ri < rules.size(); ++ri) {
            const auto& r = rules[ri];
            if ((r.where != Where::Before && r.where != Where::After) || !r.appliesIn(f.name))
                continue;
            auto m = matchPattern(block, i, r.find);
            if (!m)
                continue;
            RuleStats& s = stats(pi, false, ri, r.where, r.conditions.size());
            std::string id = s.id;
            ++s.matches;
            std::size_t rejected = 0;
            if (!evalConditions(r.conditions, m->bindings, {f.name, block.label}, cfg_, state_, plugins_, id,
                                &rejected)) {
                ++stats(pi, false, ri, r.where, 0).rejections[rejected];
                continue;
            }
            ir::Instruction call = buildCall(r.newInstruction, m->bindings, out_, defs_, id);
            RuleStats& st = stats(pi, false, ri, r.where, 0);
            ++st.applied;
            noteInsert(st, call);
            std::size_t shift = 0;
            std::size_t pe = phiEnd(block);
            if (r.where == Where::Before) {
                std::size_t at = std::max(i, pe);
                ir::insertBefore(block, at, std::move(call));
                shift = at <= i ? 1 : 0;
            } else {
                std::size_t lastIdx = m->indices.back();
                if (lastIdx < pe) {
                    std::size_t at = pe;
                    while (block.instructions[at].synthetic)
                        ++at;
                    ir::insertBefore(block, at, std::move(call));
                } else
                    ir::insertAfter(block, lastIdx, std::move(call));
            }
            applyEffects(r.setFlags, r.remember, m->bindings, f.name);
            return shift;
        }
        return 0;
    }

    void globalRule(std::size_t pi, std::size_t ri, const config::GlobalRule& r) {
        std::string id = config::ruleId(pi, true, ri);
        ir::Function* f = out_.findFunction(r.inFunction);
        if (!f || f->isDeclaration())
            throw UnknownFunction(id + ": function '" + r.inFunction + "' is not defined in the input module");
        std::vector<ir::GlobalVariable> globals = out_.globals;
        for (const auto& g : globals) {
            Bindings b;
            b.emplace(r.globalVariable, Value::global(g.name));
            if (r.getTypeSize)
                b.emplace(*r.getTypeSize, static_cast<std::int64_t>(ir::typeSize(g.type)));
            RuleStats& s = stats(pi, true, ri, Where::Entry, r.conditions.size());
            ++s.matches;
            std::size_t rejected = 0;
            if (!evalConditions(r.conditions, b, {r.inFunction, ""}, cfg_, state_, plugins_, id, &rejected)) {
                ++stats(pi, true, ri, Where::Entry, 0).rejections[rejected];
                continue;
            }
            ir::Instruction call = buildCall(r.newInstruction, b, out_, defs_, id);
            RuleStats& st = stats(pi, true, ri, Where::Entry, 0);
            ++st.applied;
            noteInsert(st, call);
            insertAtEntry(*out_.findFunction(r.inFunction), std::move(call));
            applyEffects(r.setFlags, r.remember, b, r.inFunction);
        }
    }

    nlohmann::json report(const std::vector<std::string>& merged) const {
        nlohmann::json rules = nlohmann::json::array();
        for (const auto& s : state_.stats)
            rules.push_back({{"id", s.id},
                             {"where", std::string(config::whereName(s.where))},
                             {"matches", s.matches},
                             {"applied", s.applied},
                             {"inserted", s.inserted},
                             {"conditionRejections", s.rejections}});
        nlohmann::json flags = nlohmann::json::object();
        for (const auto& [k, v] : state_.flags)
            flags[k] = v;
        nlohmann::json remembered = nlohmann::json::array();
        for (const auto& r : state_.remembered)
            remembered.push_back(r.function.empty() ? r.value.str() : r.function + ":" + r.value.str());
        nlohmann::json warnings = nlohmann::json::array();
        for (const auto& w : state_.warnings)
            warnings.push_back({{"rule", w.ruleId}, {"message", w.message}});
        return {{"inserted", inserted_}, {"rules", rules},         {"flags", flags},
                {"remembered", remembered}, {"merged", merged}, {"warnings", warnings}};
    }

    ir::Module out_;
    const config::Config& cfg_;
    const ir::Module& defs_;
    analysis::PluginList& plugins_;
    EngineState state_;
    std::set<std::string> used_;
    std::map<std::string, std::size_t> entryCursor_;
    std::size_t inserted_ = 0;
};

} // namespace

Result instrument(const ir::Module& input, const config::Config& cfg, const ir::Module& defs,
                  analysis::PluginList& plugins) {
    for (const auto& flag : cfg.flags)
        for (const auto& p : plugins)
            if (p->name() != "maybe" && p->supports(flag))
                throw SchemaError("/flags", "flag '" + flag + "' collides with a query of plugin '" + p->name() + "'");
    for (auto& p : plugins)
        p->prepare(input);
    Runner runner(input, cfg, defs, plugins);
    return runner.run();
}

} // namespace instr::engine
