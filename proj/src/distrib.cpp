#include "instr/distrib.hpp"

#include <stdexcept>
#include <string>

#include "instr/ir_text.hpp"
#include "instr_embedded.hpp"

namespace instr::distrib {

std::string_view embeddedText(std::string_view name) {
    for (const auto& f : embedded::kFiles)
        if (f.name == name)
            return f.text;
    throw std::out_of_range("no embedded file '" + std::string(name) + "'");
}

config::Config configDivByZero() { return config::parseConfig(embeddedText("dbz.json")); }
config::Config configDivByZeroStrict() { return config::parseConfig(embeddedText("dbz_strict.json")); }
config::Config configOverflow() { return config::parseConfig(embeddedText("overflow.json")); }
config::Config configMemSafety() { return config::parseConfig(embeddedText("memsafety.json")); }

ir::Module definitionsModule() { return ir::parseIR(embeddedText("checks.ll")); }

} // namespace instr::distrib
