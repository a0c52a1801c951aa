#include "fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <sys/wait.h>
#include <unistd.h>

#include "instr/analysis/external.hpp"
#include "instr/distrib.hpp"
#include "instr/ir_text.hpp"

namespace instr::testkit {

namespace fs = std::filesystem;

std::string sourcePath(const std::string& rel) { return (fs::path(INSTR_SOURCE_DIR) / rel).string(); }

std::string readText(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ir::Module parseFile(const std::string& path) { return ir::parseIR(readText(path)); }

std::vector<std::string> listFiles(const std::string& relDir, const std::string& ext) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(sourcePath(relDir)))
        if (e.is_regular_file() && e.path().extension() == ext)
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CorpusCase> loadManifest() {
    nlohmann::json doc = nlohmann::json::parse(readText(sourcePath("corpus/manifest.json")));
    std::vector<CorpusCase> out;
    for (const auto& c : doc["cases"]) {
        CorpusCase cc;
        cc.name = c["name"];
        cc.input = sourcePath("corpus/" + c["input"].get<std::string>());
        cc.config = sourcePath(c["config"].get<std::string>());
        cc.golden = sourcePath("corpus/" + c["golden"].get<std::string>());
        cc.inserted = c["inserted"];
        cc.insertedNoPlugins = c["insertedNoPlugins"];
        cc.strictReduction = c.value("strictReduction", false);
        cc.counts = c.value("calls", nlohmann::json::object());
        cc.flags = c.value("flags", nlohmann::json::object());
        out.push_back(std::move(cc));
    }
    return out;
}

engine::Result runConfig(const ir::Module& input, const std::string& configPath, bool noPlugins) {
    config::Config cfg = config::parseConfig(readText(configPath));
    analysis::PluginList plugins = analysis::makePlugins(cfg, noPlugins);
    return engine::instrument(input, cfg, distrib::definitionsModule(), plugins);
}

std::size_t countCalls(const ir::Module& m, const std::string& callee) {
    std::size_t n = 0;
    for (const auto& f : m.functions)
        for (const auto& b : f.blocks)
            for (const auto& in : b.instructions)
                if (in.synthetic && in.opcode == ir::Opcode::Call && in.callee() == callee)
                    ++n;
    return n;
}

bool frameHolds(const ir::Module& original, const ir::Module& out, std::string* why) {
    for (const auto& f : original.functions) {
        const ir::Function* g = out.findFunction(f.name);
        if (!g || g->blocks.size() != f.blocks.size()) {
            if (why)
                *why = "function @" + f.name + " missing or reshaped";
            return false;
        }
        for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
            const auto& a = f.blocks[bi].instructions;
            const auto& b = g->blocks[bi].instructions;
            std::size_t k = 0;
            for (const auto& in : b) {
                if (k < a.size() && ir::printInstruction(in) == ir::printInstruction(a[k]))
                    ++k;
            }
            if (k != a.size() || g->blocks[bi].label != f.blocks[bi].label) {
                if (why)
                    *why = "block " + f.blocks[bi].label + " of @" + f.name + " lost instruction " +
                           std::to_string(k);
                return false;
            }
        }
    }
    return true;
}

std::string writeTemp(const std::string& name, const std::string& text) {
    fs::path dir = fs::temp_directory_path() / ("instr-test-" + std::to_string(getpid()));
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
}

int runInstr(const std::string& args, std::string* stderrText) {
    std::string errFile = writeTemp("stderr.txt", "");
    std::string cmd = std::string("'") + INSTR_BINARY + "' " + args + " 2>'" + errFile + "' >/dev/null";
    int status = std::system(cmd.c_str());
    if (stderrText)
        *stderrText = readText(errFile);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace instr::testkit
