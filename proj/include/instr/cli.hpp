#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace instr::cli {

enum ExitCode { kOk = 0, kUsage = 1, kInputError = 2, kEngineError = 3 };

/**
 * `instr <config> <input> [<definitions>] [<output>]` with --output, --report
 * and --no-plugins. `args` excludes the program name.
 */
int runMain(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int runMain(int argc, char** argv);

/** Writes `data` to a temporary file next to `path` and renames it over `path`. */
void writeFileAtomic(const std::string& path, const std::string& data);

} // namespace instr::cli
