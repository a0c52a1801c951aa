#include "instr/analysis/external.hpp"

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "instr/analysis/points_to.hpp"
#include "instr/analysis/range.hpp"
#include "instr/ir_text.hpp"

namespace instr::analysis {

using nlohmann::json;

std::chrono::milliseconds pluginTimeout() {
    if (const char* env = std::getenv("INSTR_PLUGIN_TIMEOUT_MS")) {
        char* end = nullptr;
        long long v = std::strtoll(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return std::chrono::milliseconds(v);
    }
    return std::chrono::milliseconds(10000);
}

json encodeArg(const QueryArg& arg, const std::string& function, const ir::Module* module) {
    if (const auto* n = std::get_if<std::int64_t>(&arg))
        return {{"kind", "int"}, {"value", *n}};
    if (const auto* s = std::get_if<std::string>(&arg))
        return {{"kind", "string"}, {"value", *s}};
    const ir::Value& v = std::get<ir::Value>(arg);
    switch (v.kind()) {
    case ir::Value::Kind::IntConst:
        return {{"kind", "const"}, {"type", v.type().str()}, {"value", v.intValue()}};
    case ir::Value::Kind::Null:
        return {{"kind", "null"}};
    case ir::Value::Kind::Global:
        return {{"kind", "global"}, {"name", v.name()}};
    case ir::Value::Kind::Function:
        return {{"kind", "function"}, {"name", v.name()}};
    case ir::Value::Kind::Register:
        break;
    }
    json j = {{"kind", "reg"}, {"type", v.type().str()}, {"name", v.name()}, {"function", function}};
    if (module)
        if (const ir::Function* f = module->findFunction(function))
            if (const ir::Instruction* def = f->definingInstruction(v.name()))
                j["def"] = ir::printInstruction(*def);
    return j;
}

ExternalPlugin::ExternalPlugin(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
    std::signal(SIGPIPE, SIG_IGN);
    int toChild[2];
    int fromChild[2];
    if (pipe(toChild) != 0)
        fail(std::string("pipe: ") + std::strerror(errno));
    if (pipe(fromChild) != 0) {
        close(toChild[0]);
        close(toChild[1]);
        fail(std::string("pipe: ") + std::strerror(errno));
    }
    pid_ = fork();
    if (pid_ < 0) {
        for (int fd : {toChild[0], toChild[1], fromChild[0], fromChild[1]})
            close(fd);
        fail(std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
        setpgid(0, 0);
        dup2(toChild[0], STDIN_FILENO);
        dup2(fromChild[1], STDOUT_FILENO);
        for (int fd : {toChild[0], toChild[1], fromChild[0], fromChild[1]})
            close(fd);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid_, pid_);
    close(toChild[0]);
    close(fromChild[1]);
    in_ = toChild[1];
    out_ = fromChild[0];
    fcntl(in_, F_SETFD, FD_CLOEXEC);
    fcntl(out_, F_SETFD, FD_CLOEXEC);

    std::string line = readLine();
    json hs;
    try {
        hs = json::parse(line);
    } catch (const json::parse_error&) {
        fail("malformed handshake: " + line);
    }
    if (!hs.is_object() || !hs.contains("capabilities") || !hs["capabilities"].is_array())
        fail("handshake lacks a 'capabilities' array");
    for (const auto& c : hs["capabilities"]) {
        if (!c.is_string())
            fail("capability names must be strings");
        caps_.insert(c.get<std::string>());
    }
}

ExternalPlugin::~ExternalPlugin() {
    if (in_ >= 0)
        close(in_);
    if (out_ >= 0)
        close(out_);
    if (pid_ > 0) {
        int status = 0;
        bool reaped = false;
        for (int i = 0; i < 50 && !reaped; ++i) {
            reaped = waitpid(pid_, &status, WNOHANG) != 0;
            if (!reaped)
                usleep(2000);
        }
        kill(-pid_, SIGKILL);
        if (!reaped)
            waitpid(pid_, &status, 0);
    }
}

void ExternalPlugin::fail(const std::string& msg) {
    throw PluginFailure("external plugin '" + command_ + "': " + msg);
}

bool ExternalPlugin::supports(std::string_view query) const {
    return caps_.count(std::string(query)) != 0;
}

std::string ExternalPlugin::readLine() {
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0)
            fail("timed out after " + std::to_string(timeout_.count()) + " ms");
        pollfd p{out_, POLLIN, 0};
        int r = poll(&p, 1, static_cast<int>(left.count()));
        if (r < 0) {
            if (errno == EINTR)
                continue;
            fail(std::string("poll: ") + std::strerror(errno));
        }
        if (r == 0)
            continue;
        char buf[4096];
        ssize_t n = read(out_, buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            fail(std::string("read: ") + std::strerror(errno));
        }
        if (n == 0)
            fail("process exited unexpectedly");
        buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

void ExternalPlugin::writeLine(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = write(in_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            fail(std::string("write: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

Answer ExternalPlugin::answer(const Query& query, const QueryContext&) {
    json args = json::array();
    for (const auto& a : query.args)
        args.push_back(encodeArg(a, query.function, module_));
    json req = {{"query", query.name}, {"args", args}};
    if (!query.function.empty())
        req["function"] = query.function;
    writeLine(req.dump());
    std::string line = readLine();
    json resp;
    try {
        resp = json::parse(line);
    } catch (const json::parse_error&) {
        fail("malformed response: " + line);
    }
    if (!resp.is_object() || !resp.contains("answer") || !resp["answer"].is_string())
        fail("response lacks a string 'answer': " + line);
    return resp["answer"].get<std::string>();
}

PluginList makePlugins(const config::Config& cfg, bool noPlugins) {
    PluginList out;
    if (noPlugins) {
        out.push_back(std::make_unique<MaybePlugin>());
        return out;
    }
    for (const auto& spec : cfg.analyses) {
        if (spec.kind == config::PluginSpec::Kind::External)
            out.push_back(std::make_unique<ExternalPlugin>(spec.name));
        else if (spec.name == "range")
            out.push_back(std::make_unique<RangePlugin>());
        else
            out.push_back(std::make_unique<PointsToPlugin>());
    }
    return out;
}

} // namespace instr::analysis
