#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "instr/errors.hpp"

/**
 * In-memory model of the textual SSA IR subset (LLVM-assembly compatible):
 * integer, opaque pointer, array and void types; fifteen opcodes.
 */
namespace instr::ir {

class Type {
public:
    enum class Kind { Int, Pointer, Array, Void };

    static Type integer(unsigned width);
    static Type pointer() { return Type(Kind::Pointer); }
    static Type voidType() { return Type(Kind::Void); }
    static Type array(std::uint64_t length, const Type& element);

    Kind kind() const { return kind_; }
    bool isInt() const { return kind_ == Kind::Int; }
    bool isPointer() const { return kind_ == Kind::Pointer; }
    bool isArray() const { return kind_ == Kind::Array; }
    bool isVoid() const { return kind_ == Kind::Void; }

    unsigned width() const { return width_; }
    std::uint64_t length() const { return length_; }
    const Type& element() const { return *element_; }

    std::string str() const;

    friend bool operator==(const Type& a, const Type& b);

private:
    explicit Type(Kind k) : kind_(k) {}

    Kind kind_ = Kind::Void;
    unsigned width_ = 0;
    std::uint64_t length_ = 0;
    std::shared_ptr<const Type> element_;
};

bool isSupportedIntWidth(unsigned width);

/** Byte size of a type: ceil(w/8) for integers, 8 for pointers, n * elem for arrays. Throws VoidSizeError. */
std::uint64_t typeSize(const Type& t);

/** Sign-extends the low `width` bits of v. */
std::int64_t normalizeToWidth(std::int64_t v, unsigned width);
std::int64_t signedMin(unsigned width);
std::int64_t signedMax(unsigned width);

class Value {
public:
    enum class Kind { Register, IntConst, Null, Global, Function };

    static Value reg(std::string name, Type type);
    /** The value is truncated/sign-extended to the type's width. */
    static Value intConst(std::int64_t v, Type type);
    static Value null() { return Value(Kind::Null, {}, Type::pointer()); }
    static Value global(std::string name) { return Value(Kind::Global, std::move(name), Type::pointer()); }
    static Value function(std::string name) { return Value(Kind::Function, std::move(name), Type::pointer()); }

    Kind kind() const { return kind_; }
    bool isRegister() const { return kind_ == Kind::Register; }
    bool isIntConst() const { return kind_ == Kind::IntConst; }
    bool isNull() const { return kind_ == Kind::Null; }
    bool isGlobal() const { return kind_ == Kind::Global; }
    bool isFunction() const { return kind_ == Kind::Function; }

    const std::string& name() const { return name_; }
    const Type& type() const { return type_; }
    std::int64_t intValue() const { return int_; }

    /** Operand text without the type: `%x`, `42`, `null`, `@g`, `@f` (i1 constants print as true/false). */
    std::string str() const;
    /** `<type> <operand>` form. */
    std::string typedStr() const { return type_.str() + " " + str(); }

    friend bool operator==(const Value&, const Value&) = default;

private:
    Value(Kind k, std::string name, Type t) : kind_(k), name_(std::move(name)), type_(std::move(t)) {}

    Kind kind_;
    std::string name_;
    Type type_;
    std::int64_t int_ = 0;
};

enum class Opcode { Alloca, Load, Store, GetElementPtr, Add, Sub, Mul, SDiv, UDiv, SRem, ICmp, Br, Ret, Call, Phi };

std::string_view opcodeName(Opcode op);
std::optional<Opcode> opcodeFromName(std::string_view name);
bool isTerminator(Opcode op);
bool isBinaryArith(Opcode op);

enum class Predicate { EQ, NE, SLT, SLE, SGT, SGE, ULT, ULE, UGT, UGE };

std::string_view predicateName(Predicate p);
std::optional<Predicate> predicateFromName(std::string_view name);

/**
 * One instruction. `type` is the type annotation written in the text; its
 * role depends on the opcode (allocated type for alloca, loaded type for
 * load, stored value type for store, source element type for
 * getelementptr, operand type for arithmetic/icmp/phi, return type for call
 * and ret).
 *
 * Operand layout as seen by pattern matching:
 *   load [ptr], store [value, ptr], getelementptr [base, idx...],
 *   binary ops and icmp [lhs, rhs], br [cond] or [], ret [value] or [],
 *   call [args..., callee], phi [incoming values...], alloca [].
 * Branch targets and phi predecessors live in `labels`.
 */
struct Instruction {
    Opcode opcode = Opcode::Ret;
    std::optional<std::string> result;
    Type type = Type::voidType();
    std::vector<Value> operands;
    std::vector<std::string> labels;
    Predicate predicate = Predicate::EQ;
    bool synthetic = false;

    /** Type of the value defined by the instruction (void when none). */
    Type resultType() const;
    /** Callee name of a call instruction. */
    const std::string& callee() const { return operands.back().name(); }

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct BasicBlock {
    std::string label;
    std::vector<Instruction> instructions;

    friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct Param {
    std::string name; // empty in declarations without names
    Type type;

    friend bool operator==(const Param&, const Param&) = default;
};

struct Function {
    std::string name;
    Type returnType = Type::voidType();
    std::vector<Param> params;
    std::vector<BasicBlock> blocks;

    bool isDeclaration() const { return blocks.empty(); }
    const BasicBlock* findBlock(std::string_view label) const;
    /** Un-typed lookup of a register definition (parameter or instruction result). */
    std::optional<Type> registerType(std::string_view name) const;
    const Instruction* definingInstruction(std::string_view reg) const;

    friend bool operator==(const Function&, const Function&) = default;
};

/** Global initializer constant. */
struct Constant {
    enum class Kind { Int, Null, Zero, GlobalRef, Array };
    Kind kind = Kind::Zero;
    std::int64_t value = 0;
    std::string name;
    std::vector<Constant> elements;

    friend bool operator==(const Constant&, const Constant&) = default;
};

struct GlobalVariable {
    std::string name;
    Type type = Type::integer(32);
    bool isConstant = false;
    std::optional<Constant> initializer; // absent for `external global`

    friend bool operator==(const GlobalVariable&, const GlobalVariable&) = default;
};

struct Module {
    std::vector<GlobalVariable> globals;
    std::vector<Function> functions;

    Function* findFunction(std::string_view name);
    const Function* findFunction(std::string_view name) const;
    const GlobalVariable* findGlobal(std::string_view name) const;

    friend bool operator==(const Module&, const Module&) = default;
};

/**
 * Inserts a synthetic non-terminator instruction at `index` (0..size).
 * Throws std::out_of_range or std::invalid_argument on contract violations.
 */
void insertBefore(BasicBlock& block, std::size_t index, Instruction instr);

/** Inserts after the instruction at `index`; throws TerminatorViolation if that is the terminator. */
void insertAfter(BasicBlock& block, std::size_t index, Instruction instr);

/** Builds a synthetic `call void @callee(args...)`. */
Instruction makeSyntheticCall(std::string callee, std::vector<Value> args);

} // namespace instr::ir
