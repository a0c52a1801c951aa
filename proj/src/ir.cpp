#include "instr/ir.hpp"

#include <array>
#include <stdexcept>

namespace instr::ir {

Type Type::integer(unsigned width) {
    if (!isSupportedIntWidth(width))
        throw std::invalid_argument("unsupported integer width i" + std::to_string(width));
    Type t(Kind::Int);
    t.width_ = width;
    return t;
}

Type Type::array(std::uint64_t length, const Type& element) {
    if (element.isVoid())
        throw std::invalid_argument("array of void");
    Type t(Kind::Array);
    t.length_ = length;
    t.element_ = std::make_shared<const Type>(element);
    return t;
}

std::string Type::str() const {
    switch (kind_) {
    case Kind::Int:
        return "i" + std::to_string(width_);
    case Kind::Pointer:
        return "ptr";
    case Kind::Array:
        return "[" + std::to_string(length_) + " x " + element_->str() + "]";
    case Kind::Void:
        return "void";
    }
    return "?";
}

bool operator==(const Type& a, const Type& b) {
    if (a.kind_ != b.kind_)
        return false;
    switch (a.kind_) {
    case Type::Kind::Int:
        return a.width_ == b.width_;
    case Type::Kind::Array:
        return a.length_ == b.length_ && *a.element_ == *b.element_;
    default:
        return true;
    }
}

bool isSupportedIntWidth(unsigned width) {
    return width == 1 || width == 8 || width == 16 || width == 32 || width == 64;
}

std::uint64_t typeSize(const Type& t) {
    switch (t.kind()) {
    case Type::Kind::Int:
        return (t.width() + 7) / 8;
    case Type::Kind::Pointer:
        return 8;
    case Type::Kind::Array:
        return t.length() * typeSize(t.element());
    case Type::Kind::Void:
        break;
    }
    throw VoidSizeError();
}

std::int64_t normalizeToWidth(std::int64_t v, unsigned width) {
    if (width >= 64)
        return v;
    auto u = static_cast<std::uint64_t>(v) & ((std::uint64_t{1} << width) - 1);
    if (u & (std::uint64_t{1} << (width - 1)))
        u |= ~((std::uint64_t{1} << width) - 1);
    return static_cast<std::int64_t>(u);
}

std::int64_t signedMin(unsigned width) {
    if (width >= 64)
        return INT64_MIN;
    return -(std::int64_t{1} << (width - 1));
}

std::int64_t signedMax(unsigned width) {
    if (width >= 64)
        return INT64_MAX;
    return (std::int64_t{1} << (width - 1)) - 1;
}

Value Value::reg(std::string name, Type type) {
    return Value(Kind::Register, std::move(name), std::move(type));
}

Value Value::intConst(std::int64_t v, Type type) {
    if (!type.isInt())
        throw std::invalid_argument("integer constant of non-integer type");
    Value val(Kind::IntConst, {}, type);
    val.int_ = normalizeToWidth(v, type.width());
    return val;
}

std::string Value::str() const {
    switch (kind_) {
    case Kind::Register:
        return "%" + name_;
    case Kind::IntConst:
        if (type_.width() == 1)
            return int_ ? "true" : "false";
        return std::to_string(int_);
    case Kind::Null:
        return "null";
    case Kind::Global:
    case Kind::Function:
        return "@" + name_;
    }
    return "?";
}

namespace {

struct OpcodeEntry {
    Opcode op;
    std::string_view name;
};

constexpr std::array<OpcodeEntry, 15> kOpcodes{{
    {Opcode::Alloca, "alloca"},
    {Opcode::Load, "load"},
    {Opcode::Store, "store"},
    {Opcode::GetElementPtr, "getelementptr"},
    {Opcode::Add, "add"},
    {Opcode::Sub, "sub"},
    {Opcode::Mul, "mul"},
    {Opcode::SDiv, "sdiv"},
    {Opcode::UDiv, "udiv"},
    {Opcode::SRem, "srem"},
    {Opcode::ICmp, "icmp"},
    {Opcode::Br, "br"},
    {Opcode::Ret, "ret"},
    {Opcode::Call, "call"},
    {Opcode::Phi, "phi"},
}};

constexpr std::array<std::string_view, 10> kPredicates{"eq", "ne", "slt", "sle", "sgt", "sge", "ult", "ule", "ugt", "uge"};

} // namespace

std::string_view opcodeName(Opcode op) {
    for (const auto& e : kOpcodes)
        if (e.op == op)
            return e.name;
    return "?";
}

std::optional<Opcode> opcodeFromName(std::string_view name) {
    for (const auto& e : kOpcodes)
        if (e.name == name)
            return e.op;
    return std::nullopt;
}

bool isTerminator(Opcode op) {
    return op == Opcode::Br || op == Opcode::Ret;
}

bool isBinaryArith(Opcode op) {
    switch (op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::SDiv:
    case Opcode::UDiv:
    case Opcode::SRem:
        return true;
    default:
        return false;
    }
}

std::string_view predicateName(Predicate p) {
    return kPredicates[static_cast<std::size_t>(p)];
}

std::optional<Predicate> predicateFromName(std::string_view name) {
    for (std::size_t i = 0; i < kPredicates.size(); ++i)
        if (kPredicates[i] == name)
            return static_cast<Predicate>(i);
    return std::nullopt;
}

Type Instruction::resultType() const {
    switch (opcode) {
    case Opcode::Alloca:
    case Opcode::GetElementPtr:
        return Type::pointer();
    case Opcode::ICmp:
        return Type::integer(1);
    case Opcode::Load:
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::SDiv:
    case Opcode::UDiv:
    case Opcode::SRem:
    case Opcode::Phi:
    case Opcode::Call:
        return type;
    case Opcode::Store:
    case Opcode::Br:
    case Opcode::Ret:
        break;
    }
    return Type::voidType();
}

const BasicBlock* Function::findBlock(std::string_view label) const {
    for (const auto& b : blocks)
        if (b.label == label)
            return &b;
    return nullptr;
}

std::optional<Type> Function::registerType(std::string_view name) const {
    for (const auto& p : params)
        if (p.name == name)
            return p.type;
    if (const Instruction* def = definingInstruction(name))
        return def->resultType();
    return std::nullopt;
}

const Instruction* Function::definingInstruction(std::string_view reg) const {
    for (const auto& b : blocks)
        for (const auto& i : b.instructions)
            if (i.result && *i.result == reg)
                return &i;
    return nullptr;
}

Function* Module::findFunction(std::string_view name) {
    for (auto& f : functions)
        if (f.name == name)
            return &f;
    return nullptr;
}

const Function* Module::findFunction(std::string_view name) const {
    for (const auto& f : functions)
        if (f.name == name)
            return &f;
    return nullptr;
}

const GlobalVariable* Module::findGlobal(std::string_view name) const {
    for (const auto& g : globals)
        if (g.name == name)
            return &g;
    return nullptr;
}

namespace {

void checkInsertable(const Instruction& instr) {
    if (!instr.synthetic)
        throw std::invalid_argument("only synthetic instructions may be inserted");
    if (isTerminator(instr.opcode))
        throw std::invalid_argument("cannot insert a terminator");
}

} // namespace

void insertBefore(BasicBlock& block, std::size_t index, Instruction instr) {
    checkInsertable(instr);
    if (index > block.instructions.size())
        throw std::out_of_range("insertion index out of range");
    block.instructions.insert(block.instructions.begin() + static_cast<std::ptrdiff_t>(index), std::move(instr));
}

void insertAfter(BasicBlock& block, std::size_t index, Instruction instr) {
    checkInsertable(instr);
    if (index >= block.instructions.size())
        throw std::out_of_range("insertion index out of range");
    if (isTerminator(block.instructions[index].opcode))
        throw TerminatorViolation("cannot insert after the terminator of block '" + block.label + "'");
    block.instructions.insert(block.instructions.begin() + static_cast<std::ptrdiff_t>(index) + 1, std::move(instr));
}

Instruction makeSyntheticCall(std::string callee, std::vector<Value> args) {
    Instruction call;
    call.opcode = Opcode::Call;
    call.type = Type::voidType();
    call.operands = std::move(args);
    call.operands.push_back(Value::function(std::move(callee)));
    call.synthetic = true;
    return call;
}

} // namespace instr::ir
