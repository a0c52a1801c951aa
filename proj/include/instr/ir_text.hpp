#pragma once

#include <string>
#include <string_view>

#include "instr/ir.hpp"

namespace instr::ir {

/**
 * Parses the textual IR subset (grammar in docs/ir-subset.md).
 * Throws SyntaxError / SemanticError carrying line and column.
 * Parsed instructions are never synthetic.
 */
Module parseIR(std::string_view text);

/** Canonical printer; parseIR(printIR(m)) == m for every parsed module. */
std::string printIR(const Module& m);

std::string printInstruction(const Instruction& instr);

} // namespace instr::ir
