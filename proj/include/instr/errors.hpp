#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace instr {

/** Base of every error raised by the library. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** Malformed or invalid input: IR text, JSON, schema. The CLI maps these to exit code 2. */
class InputError : public Error {
public:
    using Error::Error;
};

/** Failure while instrumenting (definitions, plugins). The CLI maps these to exit code 3. */
class EngineError : public Error {
public:
    using Error::Error;
};

struct SourcePos {
    std::size_t line = 0;
    std::size_t column = 0;
};

class SyntaxError : public InputError {
public:
    SyntaxError(SourcePos pos, const std::string& msg)
        : InputError(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + msg), pos(pos) {}
    SourcePos pos;
};

class SemanticError : public InputError {
public:
    SemanticError(SourcePos pos, const std::string& msg)
        : InputError(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + msg), pos(pos) {}
    SourcePos pos;
};

class JsonError : public InputError {
public:
    using InputError::InputError;
};

class SchemaError : public InputError {
public:
    SchemaError(std::string path, const std::string& msg)
        : InputError(path + ": " + msg), path(std::move(path)) {}
    std::string path;
};

class VoidSizeError : public Error {
public:
    VoidSizeError() : Error("size of void type is undefined") {}
};

class TerminatorViolation : public EngineError {
public:
    using EngineError::EngineError;
};

class CalleeMismatch : public EngineError {
public:
    using EngineError::EngineError;
};

class MissingDefinition : public EngineError {
public:
    using EngineError::EngineError;
};

class DuplicateDefinition : public EngineError {
public:
    using EngineError::EngineError;
};

class UnknownFunction : public EngineError {
public:
    using EngineError::EngineError;
};

class PluginFailure : public EngineError {
public:
    using EngineError::EngineError;
};

} // namespace instr
