#pragma once

#include <string_view>

#include "instr/config.hpp"
#include "instr/ir.hpp"

/** Shipped configurations and instrumentation-function definitions, embedded at build time. */
namespace instr::distrib {

/** sdiv/udiv/srem guarded by canBeZero, expected ["true","maybe"]. */
config::Config configDivByZero();
/** Strict division-by-zero rule: sdiv only, expected ["true"]. */
config::Config configDivByZeroStrict();
config::Config configOverflow();
config::Config configMemSafety();

/** runtime/checks.ll. */
ir::Module definitionsModule();

/** Raw text of an embedded file: "dbz.json", "dbz_strict.json", "overflow.json", "memsafety.json", "checks.ll". */
std::string_view embeddedText(std::string_view name);

} // namespace instr::distrib
