#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "instr/analysis/plugin.hpp"
#include "instr/config.hpp"
#include "instr/engine.hpp"
#include "instr/ir.hpp"

namespace instr::testkit {

std::string sourcePath(const std::string& rel);
std::string readText(const std::string& path);
ir::Module parseFile(const std::string& path);

/** Files of a repository directory with the given extension, sorted. */
std::vector<std::string> listFiles(const std::string& relDir, const std::string& ext);

struct CorpusCase {
    std::string name;
    std::string input;
    std::string config;
    std::string golden;
    std::size_t inserted = 0;
    std::size_t insertedNoPlugins = 0;
    bool strictReduction = false;
    nlohmann::json counts;
    nlohmann::json flags;
};

std::vector<CorpusCase> loadManifest();

/** Instruments `input` with the config at `configPath`, using the shipped definitions. */
engine::Result runConfig(const ir::Module& input, const std::string& configPath, bool noPlugins);

/** Number of calls inserted (synthetic instructions) per callee. */
std::size_t countCalls(const ir::Module& m, const std::string& callee);

/** Each block of `original` appears as an instruction subsequence of the same block in `out`. */
bool frameHolds(const ir::Module& original, const ir::Module& out, std::string* why = nullptr);

/** Writes a temporary file and returns its path. */
std::string writeTemp(const std::string& name, const std::string& text);

/** Runs the instr binary; returns the exit status and captures stderr. */
int runInstr(const std::string& args, std::string* stderrText = nullptr);

} // namespace instr::testkit
