#include <cctype>
#include <map>
#include <set>
#include <vector>

#include "instr/ir_text.hpp"

namespace instr::ir {

namespace {

enum class Tok { Ident, Local, Global, Int, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    SourcePos pos;
};

bool isIdentChar(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' || c == '-';
}

bool isIdentStart(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0, line = 1, col = 1;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == ';') {
            while (i < text.size() && text[i] != '\n')
                advance(1);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        Token t;
        t.pos = {line, col};
        std::size_t start = i;
        if (c == '%' || c == '@') {
            advance(1);
            std::size_t nameStart = i;
            while (i < text.size() && isIdentChar(text[i]) && text[i] != '-')
                advance(1);
            if (i == nameStart)
                throw SyntaxError(t.pos, std::string("expected a name after '") + c + "'");
            t.kind = c == '%' ? Tok::Local : Tok::Global;
            t.text = std::string(text.substr(nameStart, i - nameStart));
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            advance(1);
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
                advance(1);
            t.kind = Tok::Int;
            t.text = std::string(text.substr(start, i - start));
        } else if (isIdentStart(c)) {
            while (i < text.size() && isIdentChar(text[i]) && text[i] != '-')
                advance(1);
            t.kind = Tok::Ident;
            t.text = std::string(text.substr(start, i - start));
        } else if (std::string_view("=,()[]{}:*").find(c) != std::string_view::npos) {
            advance(1);
            t.kind = Tok::Punct;
            t.text = std::string(1, c);
        } else {
            throw SyntaxError(t.pos, std::string("unexpected character '") + c + "'");
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.pos = {line, col};
    out.push_back(end);
    return out;
}

std::string describe(const Token& t) {
    switch (t.kind) {
    case Tok::End:
        return "end of input";
    case Tok::Local:
        return "'%" + t.text + "'";
    case Tok::Global:
        return "'@" + t.text + "'";
    default:
        return "'" + t.text + "'";
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

    Module parse() {
        while (!at(Tok::End)) {
            if (at(Tok::Global))
                parseGlobal();
            else if (atIdent("declare"))
                parseFunction(false);
            else if (atIdent("define"))
                parseFunction(true);
            else
                throw SyntaxError(peek().pos, "expected a global, 'declare' or 'define', found " + describe(peek()));
        }
        resolve();
        return std::move(module_);
    }

private:
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at(Tok k) const { return peek().kind == k; }
    bool atIdent(std::string_view s) const { return peek().kind == Tok::Ident && peek().text == s; }
    bool atPunct(std::string_view s) const { return peek().kind == Tok::Punct && peek().text == s; }

    Token next() {
        Token t = peek();
        if (pos_ < toks_.size() - 1)
            ++pos_;
        return t;
    }

    Token expect(Tok k, std::string_view what) {
        if (!at(k))
            throw SyntaxError(peek().pos, "expected " + std::string(what) + ", found " + describe(peek()));
        return next();
    }

    void expectPunct(std::string_view p) {
        if (!atPunct(p))
            throw SyntaxError(peek().pos, "expected '" + std::string(p) + "', found " + describe(peek()));
        next();
    }

    void expectIdent(std::string_view s) {
        if (!atIdent(s))
            throw SyntaxError(peek().pos, "expected '" + std::string(s) + "', found " + describe(peek()));
        next();
    }

    bool tryPunct(std::string_view p) {
        if (atPunct(p)) {
            next();
            return true;
        }
        return false;
    }

    Type parseType() {
        const Token& t = peek();
        if (t.kind == Tok::Ident) {
            if (t.text == "ptr") {
                next();
                return Type::pointer();
            }
            if (t.text == "void") {
                next();
                return Type::voidType();
            }
            if (t.text.size() > 1 && t.text[0] == 'i' &&
                t.text.find_first_not_of("0123456789", 1) == std::string::npos) {
                unsigned w = static_cast<unsigned>(std::stoul(t.text.substr(1)));
                if (!isSupportedIntWidth(w))
                    throw SyntaxError(t.pos, "unsupported integer type '" + t.text + "'");
                next();
                return Type::integer(w);
            }
        }
        if (atPunct("[")) {
            SourcePos p = next().pos;
            Token n = expect(Tok::Int, "array length");
            if (n.text[0] == '-')
                throw SyntaxError(n.pos, "negative array length");
            expectIdent("x");
            Type elem = parseType();
            if (elem.isVoid())
                throw SyntaxError(p, "array element type cannot be void");
            expectPunct("]");
            return Type::array(std::stoull(n.text), elem);
        }
        throw SyntaxError(t.pos, "expected a type, found " + describe(t));
    }

    Type parseFirstClassType() {
        SourcePos p = peek().pos;
        Type t = parseType();
        if (t.isVoid())
            throw SyntaxError(p, "void is not a valid operand type");
        return t;
    }

    std::int64_t parseIntLiteral(const Token& t, unsigned width) {
        // Accept [-2^(w-1), 2^w - 1] and normalize to the signed representation.
        bool neg = t.text[0] == '-';
        unsigned long long mag;
        try {
            mag = std::stoull(neg ? t.text.substr(1) : t.text);
        } catch (const std::out_of_range&) {
            throw SyntaxError(t.pos, "integer literal out of range: " + t.text);
        }
        unsigned __int128 limitPos = (static_cast<unsigned __int128>(1) << width) - 1;
        unsigned __int128 limitNeg = static_cast<unsigned __int128>(1) << (width - 1);
        if ((!neg && mag > limitPos) || (neg && mag > limitNeg))
            throw SyntaxError(t.pos, "integer literal " + t.text + " does not fit in i" + std::to_string(width));
        std::uint64_t bits = neg ? (~static_cast<std::uint64_t>(mag) + 1) : static_cast<std::uint64_t>(mag);
        return normalizeToWidth(static_cast<std::int64_t>(bits), width);
    }

    /** Parses an operand of known type. Global names are resolved after the whole module is read. */
    Value parseValue(const Type& type) {
        Token t = next();
        switch (t.kind) {
        case Tok::Local:
            return Value::reg(t.text, type);
        case Tok::Int:
            if (!type.isInt())
                throw SyntaxError(t.pos, "integer constant used with type " + type.str());
            return Value::intConst(parseIntLiteral(t, type.width()), type);
        case Tok::Global:
            if (!type.isPointer())
                throw SyntaxError(t.pos, "global reference used with type " + type.str());
            return Value::global(t.text);
        case Tok::Ident:
            if ((t.text == "true" || t.text == "false") && type.isInt() && type.width() == 1)
                return Value::intConst(t.text == "true" ? 1 : 0, type);
            if (t.text == "null" && type.isPointer())
                return Value::null();
            break;
        default:
            break;
        }
        throw SyntaxError(t.pos, "expected a value of type " + type.str() + ", found " + describe(t));
    }

    Constant parseConstant(const Type& type) {
        const Token& t = peek();
        if (atIdent("zeroinitializer")) {
            next();
            return Constant{Constant::Kind::Zero, 0, {}, {}};
        }
        if (type.isInt()) {
            Value v = parseValue(type);
            if (!v.isIntConst())
                throw SyntaxError(t.pos, "expected an integer initializer");
            return Constant{Constant::Kind::Int, v.intValue(), {}, {}};
        }
        if (type.isPointer()) {
            Value v = parseValue(type);
            if (v.isNull())
                return Constant{Constant::Kind::Null, 0, {}, {}};
            if (v.isGlobal())
                return Constant{Constant::Kind::GlobalRef, 0, v.name(), {}};
            throw SyntaxError(t.pos, "expected null or a global reference");
        }
        if (type.isArray()) {
            SourcePos p = t.pos;
            expectPunct("[");
            Constant c{Constant::Kind::Array, 0, {}, {}};
            if (!atPunct("]")) {
                do {
                    SourcePos ep = peek().pos;
                    Type et = parseType();
                    if (!(et == type.element()))
                        throw SyntaxError(ep, "array element type mismatch");
                    c.elements.push_back(parseConstant(et));
                } while (tryPunct(","));
            }
            expectPunct("]");
            if (c.elements.size() != type.length())
                throw SyntaxError(p, "array initializer has " + std::to_string(c.elements.size()) +
                                         " elements, type expects " + std::to_string(type.length()));
            return c;
        }
        throw SyntaxError(t.pos, "invalid initializer");
    }

    void parseGlobal() {
        Token name = next();
        expectPunct("=");
        GlobalVariable g;
        g.name = name.text;
        bool external = false;
        if (atIdent("external")) {
            next();
            external = true;
        }
        if (atIdent("global")) {
            next();
        } else if (atIdent("constant")) {
            next();
            g.isConstant = true;
        } else {
            throw SyntaxError(peek().pos, "expected 'global' or 'constant', found " + describe(peek()));
        }
        g.type = parseFirstClassType();
        if (!external)
            g.initializer = parseConstant(g.type);
        checkNewTopLevelName(name);
        globalInitRefs_.push_back({module_.globals.size(), name.pos});
        module_.globals.push_back(std::move(g));
    }

    void checkNewTopLevelName(const Token& name) {
        if (!topLevelNames_.insert(name.text).second)
            throw SemanticError(name.pos, "redefinition of '@" + name.text + "'");
    }

    void parseFunction(bool isDefinition) {
        next();
        Function f;
        f.returnType = parseType();
        Token name = expect(Tok::Global, "function name");
        f.name = name.text;
        expectPunct("(");
        if (!atPunct(")")) {
            do {
                ParamPos p;
                p.type = parseFirstClassType();
                p.pos = peek().pos;
                if (at(Tok::Local))
                    p.name = next().text;
                else if (isDefinition)
                    throw SyntaxError(peek().pos, "parameters of a definition need names");
                f.params.push_back({p.name, p.type});
                paramPos_.push_back(p.pos);
            } while (tryPunct(","));
        }
        expectPunct(")");
        checkNewTopLevelName(name);
        FunctionInfo info;
        info.pos = name.pos;
        info.paramPos = std::move(paramPos_);
        paramPos_.clear();
        if (isDefinition) {
            expectPunct("{");
            while (!atPunct("}"))
                parseBlock(f, info);
            next();
            if (f.blocks.empty())
                throw SemanticError(name.pos, "function '@" + f.name + "' has no blocks");
        }
        module_.functions.push_back(std::move(f));
        functionInfo_.push_back(std::move(info));
    }

    struct ParamPos {
        std::string name;
        Type type = Type::voidType();
        SourcePos pos;
    };

    struct FunctionInfo {
        SourcePos pos;
        std::vector<SourcePos> paramPos;
        std::vector<SourcePos> blockPos;
        std::vector<std::vector<SourcePos>> instrPos;
    };

    void parseBlock(Function& f, FunctionInfo& info) {
        const Token& t = peek();
        if (!((t.kind == Tok::Ident || t.kind == Tok::Int) && peek(1).kind == Tok::Punct && peek(1).text == ":"))
            throw SyntaxError(t.pos, "expected a block label, found " + describe(t));
        BasicBlock b;
        b.label = next().text;
        info.blockPos.push_back(t.pos);
        next();
        std::vector<SourcePos> positions;
        while (!atPunct("}") && !(
                   (peek().kind == Tok::Ident || peek().kind == Tok::Int) && peek(1).kind == Tok::Punct &&
                   peek(1).text == ":")) {
            if (at(Tok::End))
                throw SyntaxError(peek().pos, "unexpected end of input inside function body");
            positions.push_back(peek().pos);
            b.instructions.push_back(parseInstruction());
        }
        f.blocks.push_back(std::move(b));
        info.instrPos.push_back(std::move(positions));
    }

    Instruction parseInstruction() {
        Instruction in;
        if (at(Tok::Local)) {
            in.result = next().text;
            expectPunct("=");
        }
        Token opTok = expect(Tok::Ident, "an instruction");
        auto op = opcodeFromName(opTok.text);
        if (!op)
            throw SyntaxError(opTok.pos, "unsupported opcode '" + opTok.text + "'");
        in.opcode = *op;
        bool needsResult = false;
        switch (in.opcode) {
        case Opcode::Alloca:
            in.type = parseFirstClassType();
            needsResult = true;
            break;
        case Opcode::Load:
            in.type = parseFirstClassType();
            expectPunct(",");
            expectIdent("ptr");
            in.operands.push_back(parseValue(Type::pointer()));
            needsResult = true;
            break;
        case Opcode::Store:
            in.type = parseFirstClassType();
            in.operands.push_back(parseValue(in.type));
            expectPunct(",");
            expectIdent("ptr");
            in.operands.push_back(parseValue(Type::pointer()));
            break;
        case Opcode::GetElementPtr:
            in.type = parseFirstClassType();
            expectPunct(",");
            expectIdent("ptr");
            in.operands.push_back(parseValue(Type::pointer()));
            while (tryPunct(",")) {
                SourcePos p = peek().pos;
                Type it = parseType();
                if (!it.isInt())
                    throw SyntaxError(p, "getelementptr index must be an integer");
                in.operands.push_back(parseValue(it));
            }
            needsResult = true;
            break;
        case Opcode::Add:
        case Opcode::Sub:
        case Opcode::Mul:
        case Opcode::SDiv:
        case Opcode::UDiv:
        case Opcode::SRem: {
            SourcePos p = peek().pos;
            in.type = parseType();
            if (!in.type.isInt())
                throw SyntaxError(p, "arithmetic requires an integer type");
            in.operands.push_back(parseValue(in.type));
            expectPunct(",");
            in.operands.push_back(parseValue(in.type));
            needsResult = true;
            break;
        }
        case Opcode::ICmp: {
            Token pt = expect(Tok::Ident, "a comparison predicate");
            auto pred = predicateFromName(pt.text);
            if (!pred)
                throw SyntaxError(pt.pos, "unknown icmp predicate '" + pt.text + "'");
            in.predicate = *pred;
            SourcePos p = peek().pos;
            in.type = parseType();
            if (!in.type.isInt() && !in.type.isPointer())
                throw SyntaxError(p, "icmp requires integer or pointer operands");
            in.operands.push_back(parseValue(in.type));
            expectPunct(",");
            in.operands.push_back(parseValue(in.type));
            needsResult = true;
            break;
        }
        case Opcode::Br:
            if (atIdent("label")) {
                next();
                in.labels.push_back(expect(Tok::Local, "a label").text);
            } else {
                SourcePos p = peek().pos;
                Type ct = parseType();
                if (!(ct == Type::integer(1)))
                    throw SyntaxError(p, "branch condition must be i1");
                in.operands.push_back(parseValue(ct));
                expectPunct(",");
                expectIdent("label");
                in.labels.push_back(expect(Tok::Local, "a label").text);
                expectPunct(",");
                expectIdent("label");
                in.labels.push_back(expect(Tok::Local, "a label").text);
            }
            break;
        case Opcode::Ret:
            in.type = parseType();
            if (!in.type.isVoid())
                in.operands.push_back(parseValue(in.type));
            break;
        case Opcode::Call: {
            in.type = parseType();
            Token callee = expect(Tok::Global, "a callee");
            expectPunct("(");
            if (!atPunct(")")) {
                do {
                    Type argType = parseFirstClassType();
                    in.operands.push_back(parseValue(argType));
                } while (tryPunct(","));
            }
            expectPunct(")");
            in.operands.push_back(Value::function(callee.text));
            needsResult = !in.type.isVoid() && in.result.has_value();
            if (in.type.isVoid() && in.result)
                throw SyntaxError(opTok.pos, "a void call cannot define a value");
            break;
        }
        case Opcode::Phi:
            in.type = parseFirstClassType();
            do {
                expectPunct("[");
                in.operands.push_back(parseValue(in.type));
                expectPunct(",");
                in.labels.push_back(expect(Tok::Local, "a predecessor label").text);
                expectPunct("]");
            } while (tryPunct(","));
            needsResult = true;
            break;
        }
        if (needsResult && !in.result)
            throw SyntaxError(opTok.pos, "'" + opTok.text + "' must define a value");
        if (!needsResult && in.result && in.opcode != Opcode::Call)
            throw SyntaxError(opTok.pos, "'" + opTok.text + "' does not define a value");
        return in;
    }

    void resolve() {
        std::map<std::string, const Function*> functions;
        for (const auto& f : module_.functions)
            functions[f.name] = &f;
        for (const auto& [gi, pos] : globalInitRefs_)
            checkConstantRefs(module_.globals[gi].initializer ? &*module_.globals[gi].initializer : nullptr, pos);

        for (std::size_t fi = 0; fi < module_.functions.size(); ++fi)
            checkFunction(module_.functions[fi], functionInfo_[fi], functions);
    }

    void checkConstantRefs(const Constant* c, SourcePos pos) {
        if (!c)
            return;
        if (c->kind == Constant::Kind::GlobalRef && !topLevelNames_.count(c->name))
            throw SemanticError(pos, "initializer references unknown '@" + c->name + "'");
        for (const auto& e : c->elements)
            checkConstantRefs(&e, pos);
    }

    void checkFunction(Function& f, const FunctionInfo& info, const std::map<std::string, const Function*>& functions) {
        if (f.isDeclaration())
            return;
        std::map<std::string, Type> regs;
        for (std::size_t i = 0; i < f.params.size(); ++i)
            if (!regs.emplace(f.params[i].name, f.params[i].type).second)
                throw SemanticError(info.paramPos[i], "duplicate SSA name '%" + f.params[i].name + "'");
        std::set<std::string> labels;
        for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
            if (!labels.insert(f.blocks[bi].label).second)
                throw SemanticError(info.blockPos[bi], "duplicate block label '" + f.blocks[bi].label + "'");
            for (std::size_t ii = 0; ii < f.blocks[bi].instructions.size(); ++ii) {
                const auto& in = f.blocks[bi].instructions[ii];
                if (in.result && !regs.emplace(*in.result, in.resultType()).second)
                    throw SemanticError(info.instrPos[bi][ii], "duplicate SSA name '%" + *in.result + "'");
            }
        }

        for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
            auto& b = f.blocks[bi];
            if (b.instructions.empty())
                throw SemanticError(info.blockPos[bi], "block '" + b.label + "' has no terminator");
            bool seenNonPhi = false;
            for (std::size_t ii = 0; ii < b.instructions.size(); ++ii) {
                auto& in = b.instructions[ii];
                SourcePos pos = info.instrPos[bi][ii];
                bool last = ii + 1 == b.instructions.size();
                if (isTerminator(in.opcode) != last)
                    throw SemanticError(pos, last ? "block '" + b.label + "' must end with br or ret"
                                                  : "terminator in the middle of block '" + b.label + "'");
                if (in.opcode == Opcode::Phi) {
                    if (seenNonPhi)
                        throw SemanticError(pos, "phi must appear at the beginning of a block");
                } else {
                    seenNonPhi = true;
                }
                for (const auto& l : in.labels)
                    if (!labels.count(l))
                        throw SemanticError(pos, "reference to undefined label '%" + l + "'");
                if (in.opcode == Opcode::Ret && !(in.type == f.returnType))
                    throw SemanticError(pos, "return type " + in.type.str() + " does not match function type " +
                                                 f.returnType.str());
                for (std::size_t oi = 0; oi < in.operands.size(); ++oi) {
                    auto& v = in.operands[oi];
                    if (v.isRegister()) {
                        auto it = regs.find(v.name());
                        if (it == regs.end())
                            throw SemanticError(pos, "use of undefined value '%" + v.name() + "'");
                        if (!(it->second == v.type()))
                            throw SemanticError(pos, "'%" + v.name() + "' has type " + it->second.str() +
                                                         ", used as " + v.type().str());
                    } else if (v.isGlobal()) {
                        if (functions.count(v.name()))
                            v = Value::function(v.name());
                        else if (!module_.findGlobal(v.name()))
                            throw SemanticError(pos, "use of undefined global '@" + v.name() + "'");
                    }
                }
                if (in.opcode == Opcode::Call)
                    checkCall(in, pos, functions);
            }
        }
    }

    static void checkCall(const Instruction& in, SourcePos pos, const std::map<std::string, const Function*>& functions) {
        auto it = functions.find(in.callee());
        if (it == functions.end())
            throw SemanticError(pos, "call to undeclared function '@" + in.callee() + "'");
        const Function& callee = *it->second;
        std::size_t nargs = in.operands.size() - 1;
        if (nargs != callee.params.size())
            throw SemanticError(pos, "call to '@" + callee.name + "' passes " + std::to_string(nargs) +
                                         " arguments, expected " + std::to_string(callee.params.size()));
        if (!(in.type == callee.returnType))
            throw SemanticError(pos, "call to '@" + callee.name + "' uses return type " + in.type.str() +
                                         ", declared " + callee.returnType.str());
        for (std::size_t i = 0; i < nargs; ++i)
            if (in.operands[i].type().kind() != callee.params[i].type.kind())
                throw SemanticError(pos, "argument " + std::to_string(i + 1) + " of call to '@" + callee.name +
                                             "' has type " + in.operands[i].type().str() + ", expected " +
                                             callee.params[i].type.str());
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Module module_;
    std::set<std::string> topLevelNames_;
    std::vector<FunctionInfo> functionInfo_;
    std::vector<SourcePos> paramPos_;
    std::vector<std::pair<std::size_t, SourcePos>> globalInitRefs_;
};

} // namespace

Module parseIR(std::string_view text) {
    return Parser(text).parse();
}

} // namespace instr::ir
