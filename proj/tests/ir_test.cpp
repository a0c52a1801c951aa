#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "instr/ir.hpp"
#include "instr/ir_text.hpp"

using namespace instr;
using namespace instr::ir;

namespace {

template <class E>
void expectThrow(const std::string& text, const std::string& fragment) {
    try {
        parseIR(text);
        ADD_FAILURE() << "no error for: " << text;
    } catch (const E& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

} // namespace

TEST(Types, Sizes) {
    EXPECT_EQ(typeSize(Type::integer(1)), 1u);
    EXPECT_EQ(typeSize(Type::integer(8)), 1u);
    EXPECT_EQ(typeSize(Type::integer(16)), 2u);
    EXPECT_EQ(typeSize(Type::integer(32)), 4u);
    EXPECT_EQ(typeSize(Type::integer(64)), 8u);
    EXPECT_EQ(typeSize(Type::pointer()), 8u);
    EXPECT_EQ(typeSize(Type::array(10, Type::integer(32))), 40u);
    EXPECT_EQ(typeSize(Type::array(2, Type::array(3, Type::integer(16)))), 12u);
    EXPECT_THROW(typeSize(Type::voidType()), VoidSizeError);
}

TEST(Types, Printing) {
    EXPECT_EQ(Type::array(4, Type::pointer()).str(), "[4 x ptr]");
    EXPECT_EQ(Type::integer(8).str(), "i8");
    EXPECT_TRUE(Type::array(2, Type::integer(8)) == Type::array(2, Type::integer(8)));
    EXPECT_FALSE(Type::array(2, Type::integer(8)) == Type::array(3, Type::integer(8)));
}

TEST(Values, ConstantsAreNormalized) {
    EXPECT_EQ(Value::intConst(255, Type::integer(8)).intValue(), -1);
    EXPECT_EQ(Value::intConst(1, Type::integer(1)).str(), "true");
    EXPECT_EQ(Value::intConst(0, Type::integer(1)).str(), "false");
    EXPECT_EQ(Value::reg("x", Type::integer(32)).typedStr(), "i32 %x");
    EXPECT_EQ(Value::null().str(), "null");
}

TEST(Parser, MinimalModule) {
    Module m = parseIR("define i32 @main() { entry: ret i32 0 }");
    ASSERT_EQ(m.functions.size(), 1u);
    ASSERT_EQ(m.functions[0].blocks.size(), 1u);
    EXPECT_EQ(m.functions[0].blocks[0].instructions.size(), 1u);
}

TEST(Parser, SdivOperands) {
    Module m = parseIR("define i32 @f(i32 %a, i32 %b) {\nentry:\n  %x = sdiv i32 %a, %b\n  ret i32 %x\n}\n");
    const Instruction& in = m.functions[0].blocks[0].instructions[0];
    EXPECT_EQ(in.opcode, Opcode::SDiv);
    EXPECT_EQ(*in.result, "x");
    ASSERT_EQ(in.operands.size(), 2u);
    EXPECT_EQ(in.operands[0].name(), "a");
    EXPECT_EQ(in.operands[1].name(), "b");
}

TEST(Parser, CallCalleeIsLastOperand) {
    Module m = parseIR("declare ptr @malloc(i64)\ndefine void @f() {\nentry:\n  %p = call ptr @malloc(i64 8)\n  ret void\n}\n");
    const Instruction& in = m.functions[1].blocks[0].instructions[0];
    ASSERT_EQ(in.operands.size(), 2u);
    EXPECT_TRUE(in.operands[1].isFunction());
    EXPECT_EQ(in.callee(), "malloc");
    EXPECT_EQ(in.operands[0].intValue(), 8);
}

TEST(Parser, GlobalsAndArrays) {
    Module m = parseIR("@a = global [2 x i32] [i32 1, i32 2]\n@p = global ptr @a\n@e = external global i8\n"
                       "@z = constant [4 x i8] zeroinitializer\n");
    ASSERT_EQ(m.globals.size(), 4u);
    EXPECT_EQ(m.globals[0].initializer->elements.size(), 2u);
    EXPECT_EQ(m.globals[1].initializer->kind, Constant::Kind::GlobalRef);
    EXPECT_FALSE(m.globals[2].initializer.has_value());
    EXPECT_TRUE(m.globals[3].isConstant);
}

TEST(Parser, ErrorsCarryPositions) {
    try {
        parseIR("define i32 @f() {\nentry:\n  %x = fadd i32 1, 2\n  ret i32 %x\n}\n");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.pos.line, 3u);
        EXPECT_EQ(e.pos.column, 8u);
        EXPECT_NE(std::string(e.what()).find("unsupported opcode 'fadd'"), std::string::npos);
    }
}

TEST(Parser, RejectsMalformedModules) {
    expectThrow<SemanticError>("define i32 @f() {\nentry:\n  %x = add i32 1, 2\n}\n", "must end with br or ret");
    expectThrow<SemanticError>("define i32 @f() {\nentry:\n  ret i32 0\n  ret i32 1\n}\n", "terminator");
    expectThrow<SemanticError>("define i32 @f() {\nentry:\n  ret i32 %y\n}\n", "%y");
    expectThrow<SemanticError>("define void @f() {\nentry:\n  br label %nowhere\n}\n", "nowhere");
    expectThrow<SemanticError>(
        "define i32 @f() {\nentry:\n  %x = add i32 1, 2\n  %x = add i32 1, 3\n  ret i32 %x\n}\n", "%x");
    expectThrow<SemanticError>("define void @f() {\nentry:\n  call void @g()\n  ret void\n}\n", "@g");
    expectThrow<SemanticError>(
        "define i32 @f(i32 %a) {\nentry:\n  br label %b\nb:\n  %y = add i32 %a, 1\n  %p = phi i32 [ %a, %entry ]\n"
        "  ret i32 %p\n}\n",
        "phi");
    expectThrow<SyntaxError>("define i32 @f() {\nentry:\n  %x = add i7 1, 2\n  ret i32 0\n}\n", "i7");
    expectThrow<SemanticError>("declare void @g(i32)\ndefine void @f() {\nentry:\n  call void @g(ptr null)\n"
                               "  ret void\n}\n",
                               "ptr");
    expectThrow<SemanticError>("define void @f() {\nentry:\n  ret i32 0\n}\n", "ret");
}

TEST(Parser, AcceptsIntegerWidthsAtCalls) {
    EXPECT_NO_THROW(parseIR("declare void @chk(i64)\ndefine void @f(i32 %d) {\nentry:\n  call void @chk(i32 %d)\n"
                            "  ret void\n}\n"));
}

TEST(Printer, CanonicalForm) {
    std::string text = "@g = global i32 7\n\ndeclare void @h(i32)\n\ndefine i32 @f(i32 %a) {\nentry:\n"
                       "  %c = icmp slt i32 %a, 10\n  br i1 %c, label %then, label %done\nthen:\n"
                       "  %s = add i32 %a, 1\n  br label %done\ndone:\n  %r = phi i32 [ %a, %entry ], [ %s, %then ]\n"
                       "  ret i32 %r\n}\n";
    EXPECT_EQ(printIR(parseIR(text)), text);
    EXPECT_EQ(printIR(Module{}), "");
}

TEST(Printer, RoundTripsEveryRepositoryModule) {
    std::vector<std::string> files = testkit::listFiles("corpus", ".ll");
    for (const auto& f : testkit::listFiles("corpus/golden", ".ll"))
        files.push_back(f);
    for (const auto& f : testkit::listFiles("tests/soundness", ".ll"))
        files.push_back(f);
    files.push_back(testkit::sourcePath("runtime/checks.ll"));
    ASSERT_GT(files.size(), 30u);
    for (const auto& path : files) {
        Module m = testkit::parseFile(path);
        std::string printed = printIR(m);
        EXPECT_EQ(parseIR(printed), m) << path;
        EXPECT_EQ(printIR(parseIR(printed)), printed) << path;
    }
}

TEST(Mutation, InsertBeforeAndAfter) {
    Module m = parseIR("define i32 @f(i32 %a) {\nentry:\n  %x = add i32 %a, 1\n  ret i32 %x\n}\n");
    BasicBlock& b = m.functions[0].blocks[0];
    insertBefore(b, 0, makeSyntheticCall("pre", {Value::reg("a", Type::integer(32))}));
    insertAfter(b, 1, makeSyntheticCall("post", {}));
    ASSERT_EQ(b.instructions.size(), 4u);
    EXPECT_EQ(b.instructions[0].callee(), "pre");
    EXPECT_TRUE(b.instructions[0].synthetic);
    EXPECT_EQ(b.instructions[2].callee(), "post");
    EXPECT_THROW(insertAfter(b, 3, makeSyntheticCall("late", {})), TerminatorViolation);
    Instruction notSynthetic = makeSyntheticCall("x", {});
    notSynthetic.synthetic = false;
    EXPECT_THROW(insertBefore(b, 0, notSynthetic), std::invalid_argument);
    EXPECT_THROW(insertBefore(b, 9, makeSyntheticCall("x", {})), std::out_of_range);
}

TEST(Mutation, SyntheticCallPrints) {
    Instruction c = makeSyntheticCall("checkDivisionByZero", {Value::reg("d", Type::integer(32))});
    EXPECT_EQ(printInstruction(c), "call void @checkDivisionByZero(i32 %d)");
    EXPECT_TRUE(c.type.isVoid());
}
