#include "instr/cli.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <sys/stat.h>
#include <unistd.h>

#include "instr/analysis/external.hpp"
#include "instr/config.hpp"
#include "instr/engine.hpp"
#include "instr/ir_text.hpp"

namespace instr::cli {

namespace fs = std::filesystem;

namespace {

std::string readFile(const std::string& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(path + ": cannot read " + what + " file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ir::Module parseFile(const std::string& path, const std::string& what) {
    std::string text = readFile(path, what);
    try {
        return ir::parseIR(text);
    } catch (const InputError& e) {
        throw InputError(path + ":" + e.what());
    }
}

} // namespace

void writeFileAtomic(const std::string& path, const std::string& data) {
    fs::path target(path);
    fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
    std::string tmpl = (dir / ("." + target.filename().string() + ".XXXXXX")).string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    int fd = mkstemp(buf.data());
    if (fd < 0)
        throw EngineError(path + ": cannot create temporary file: " + std::strerror(errno));
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            int e = errno;
            close(fd);
            unlink(buf.data());
            throw EngineError(path + ": write failed: " + std::strerror(e));
        }
        off += static_cast<std::size_t>(n);
    }
    fchmod(fd, 0644);
    close(fd);
    if (std::rename(buf.data(), path.c_str()) != 0) {
        int e = errno;
        unlink(buf.data());
        throw EngineError(path + ": cannot replace file: " + std::strerror(e));
    }
}

int runMain(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Instruments textual SSA IR according to a JSON rule configuration.", "instr"};
    std::string configPath, inputPath;
    std::optional<std::string> defsPos, outputPos, outputOpt, reportPath;
    bool noPlugins = false;
    app.add_option("config", configPath, "JSON configuration")->required();
    app.add_option("input", inputPath, "IR module to instrument")->required();
    app.add_option("definitions", defsPos, "IR module defining the instrumentation functions (default: config 'file')");
    app.add_option("output-file", outputPos, "output path");
    app.add_option("--output", outputOpt, "output path (default out.ll)");
    app.add_option("--report", reportPath, "write the JSON instrumentation report here");
    app.add_flag("--no-plugins", noPlugins, "answer every plugin query with \"maybe\"");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "instr: " << e.what() << "\n" << app.help();
        return kUsage;
    }

    try {
        config::Config cfg = config::parseConfig(readFile(configPath, "configuration"));
        ir::Module input = parseFile(inputPath, "input");

        std::string defsPath;
        if (defsPos) {
            defsPath = *defsPos;
        } else if (cfg.definitionsFile) {
            fs::path p(*cfg.definitionsFile);
            defsPath = p.is_absolute() ? p.string() : (fs::path(configPath).parent_path() / p).string();
        } else {
            throw InputError(configPath + ": no definitions module given and the configuration has no 'file'");
        }
        ir::Module defs = parseFile(defsPath, "definitions");

        for (const auto& w : config::validateAgainstDefinitions(cfg, defs))
            err << "warning: " << configPath << ": " << w.ruleId << ": " << w.message << "\n";

        analysis::PluginList plugins = analysis::makePlugins(cfg, noPlugins);
        engine::Result result = engine::instrument(input, cfg, defs, plugins);
        for (const auto& w : result.warnings)
            err << "warning: " << configPath << ": " << w.ruleId << ": " << w.message << "\n";

        std::string outPath = outputOpt ? *outputOpt : outputPos ? *outputPos : "out.ll";
        writeFileAtomic(outPath, ir::printIR(result.module));
        if (reportPath)
            writeFileAtomic(*reportPath, result.report.dump(2) + "\n");
        return kOk;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kEngineError;
    }
}

int runMain(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return runMain(args, std::cout, std::cerr);
}

} // namespace instr::cli
