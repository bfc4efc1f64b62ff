#pragma once

#include <stdexcept>
#include <string>

namespace dcad {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed DSL text. Carries the position and the set of tokens that would
/// have been accepted there.
class SyntaxError : public Error {
public:
    SyntaxError(std::string message, int line, int col, std::string expected)
        : Error(format(message, line, col, expected)), line_(line), col_(col),
          expected_(std::move(expected)), bare_(std::move(message)) {}

    int line() const { return line_; }
    int col() const { return col_; }
    const std::string& expected() const { return expected_; }
    const std::string& bare_message() const { return bare_; }

private:
    static std::string format(const std::string& m, int line, int col, const std::string& exp) {
        std::string s = std::to_string(line) + ":" + std::to_string(col) + ": " + m;
        if (!exp.empty()) s += " (expected " + exp + ")";
        return s;
    }
    int line_;
    int col_;
    std::string expected_;
    std::string bare_;
};

/// Failure while executing a validated program (bad index, undefined solid,
/// degenerate clamp band, ...).
class InterpError : public Error {
public:
    InterpError(const std::string& message, int line, int col)
        : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
          line_(line), col_(col) {}
    int line() const { return line_; }
    int col() const { return col_; }

private:
    int line_;
    int col_;
};

/// A graph node or tape instruction produced a non-finite value.
class NumericError : public Error {
public:
    NumericError(const std::string& message, long where)
        : Error(message), where_(where) {}
    /// Node id (graph evaluation) or instruction index (tape evaluation).
    long where() const { return where_; }

private:
    long where_;
};

class TopologyError : public Error {
public:
    using Error::Error;
};

/// Volume too close to zero for a center of mass to be defined.
class DegenerateVolume : public Error {
public:
    using Error::Error;
};

/// Edit does not fit the mesh it is applied to.
class EditError : public Error {
public:
    using Error::Error;
};

} // namespace dcad
