#pragma once

#include <chrono>
#include <set>
#include <string>

#include <json.hpp>
#include <sys/types.h>

#include "instr/analysis/plugin.hpp"
#include "instr/config.hpp"

namespace instr::analysis {

/** Per-query timeout: INSTR_PLUGIN_TIMEOUT_MS when set to a positive integer, else 10 s. */
std::chrono::milliseconds pluginTimeout();

/** JSON encoding of a query argument (see docs/plugin-protocol.md). */
nlohmann::json encodeArg(const QueryArg& arg, const std::string& function, const ir::Module* module);

/**
 * Plugin running as a child process (`/bin/sh -c command`). The child
 * first prints its capability list, then answers one request line with
 * one response line. Any protocol violation, crash, or timeout raises
 * PluginFailure.
 */
class ExternalPlugin final : public Plugin {
public:
    ExternalPlugin(std::string command, std::chrono::milliseconds timeout = pluginTimeout());
    ~ExternalPlugin() override;
    ExternalPlugin(const ExternalPlugin&) = delete;
    ExternalPlugin& operator=(const ExternalPlugin&) = delete;

    std::string name() const override { return command_; }
    bool supports(std::string_view query) const override;
    void prepare(const ir::Module& module) override { module_ = &module; }
    Answer answer(const Query& query, const QueryContext& ctx) override;

    const std::set<std::string>& capabilities() const { return caps_; }

private:
    std::string readLine();
    void writeLine(const std::string& line);
    [[noreturn]] void fail(const std::string& msg);

    std::string command_;
    std::chrono::milliseconds timeout_;
    pid_t pid_ = -1;
    int in_ = -1;
    int out_ = -1;
    std::string buffer_;
    std::set<std::string> caps_;
    const ir::Module* module_ = nullptr;
};

/** Instantiates the plugins of `cfg.analyses` in order; with `noPlugins` a single MaybePlugin. */
PluginList makePlugins(const config::Config& cfg, bool noPlugins);

} // namespace instr::analysis
