#include <sstream>

#include "instr/ir_text.hpp"

namespace instr::ir {

namespace {

std::string constantStr(const Constant& c, const Type& type) {
    switch (c.kind) {
    case Constant::Kind::Int:
        return Value::intConst(c.value, type).str();
    case Constant::Kind::Null:
        return "null";
    case Constant::Kind::Zero:
        return "zeroinitializer";
    case Constant::Kind::GlobalRef:
        return "@" + c.name;
    case Constant::Kind::Array: {
        std::string s = "[";
        for (std::size_t i = 0; i < c.elements.size(); ++i) {
            if (i)
                s += ", ";
            s += type.element().str() + " " + constantStr(c.elements[i], type.element());
        }
        return s + "]";
    }
    }
    return "?";
}

std::string signature(const Function& f, bool withNames) {
    std::string s = f.returnType.str() + " @" + f.name + "(";
    for (std::size_t i = 0; i < f.params.size(); ++i) {
        if (i)
            s += ", ";
        s += f.params[i].type.str();
        if (withNames && !f.params[i].name.empty())
            s += " %" + f.params[i].name;
    }
    return s + ")";
}

} // namespace

std::string printInstruction(const Instruction& in) {
    std::ostringstream os;
    if (in.result)
        os << "%" << *in.result << " = ";
    os << opcodeName(in.opcode);
    const auto& ops = in.operands;
    switch (in.opcode) {
    case Opcode::Alloca:
        os << " " << in.type.str();
        break;
    case Opcode::Load:
        os << " " << in.type.str() << ", " << ops[0].typedStr();
        break;
    case Opcode::Store:
        os << " " << ops[0].typedStr() << ", " << ops[1].typedStr();
        break;
    case Opcode::GetElementPtr:
        os << " " << in.type.str();
        for (const auto& v : ops)
            os << ", " << v.typedStr();
        break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::SDiv:
    case Opcode::UDiv:
    case Opcode::SRem:
        os << " " << in.type.str() << " " << ops[0].str() << ", " << ops[1].str();
        break;
    case Opcode::ICmp:
        os << " " << predicateName(in.predicate) << " " << in.type.str() << " " << ops[0].str() << ", "
           << ops[1].str();
        break;
    case Opcode::Br:
        if (ops.empty())
            os << " label %" << in.labels[0];
        else
            os << " " << ops[0].typedStr() << ", label %" << in.labels[0] << ", label %" << in.labels[1];
        break;
    case Opcode::Ret:
        if (ops.empty())
            os << " void";
        else
            os << " " << ops[0].typedStr();
        break;
    case Opcode::Call:
        os << " " << in.type.str() << " @" << in.callee() << "(";
        for (std::size_t i = 0; i + 1 < ops.size(); ++i)
            os << (i ? ", " : "") << ops[i].typedStr();
        os << ")";
        break;
    case Opcode::Phi:
        os << " " << in.type.str();
        for (std::size_t i = 0; i < ops.size(); ++i)
            os << (i ? ", " : " ") << "[ " << ops[i].str() << ", %" << in.labels[i] << " ]";
        break;
    }
    return os.str();
}

std::string printIR(const Module& m) {
    std::vector<std::string> sections;
    if (!m.globals.empty()) {
        std::string s;
        for (const auto& g : m.globals) {
            s += "@" + g.name + " = ";
            if (!g.initializer)
                s += "external ";
            s += g.isConstant ? "constant " : "global ";
            s += g.type.str();
            if (g.initializer)
                s += " " + constantStr(*g.initializer, g.type);
            s += "\n";
        }
        sections.push_back(std::move(s));
    }
    for (const auto& f : m.functions) {
        if (f.isDeclaration()) {
            sections.push_back("declare " + signature(f, true) + "\n");
            continue;
        }
        std::string s = "define " + signature(f, true) + " {\n";
        for (const auto& b : f.blocks) {
            s += b.label + ":\n";
            for (const auto& in : b.instructions)
                s += "  " + printInstruction(in) + "\n";
        }
        s += "}\n";
        sections.push_back(std::move(s));
    }
    std::string out;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i)
            out += "\n";
        out += sections[i];
    }
    return out;
}

} // namespace instr::ir
