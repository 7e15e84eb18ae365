#pragma once

#include <stdexcept>
#include <string>

namespace pmfvb {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Input that is well-formed but unusable for fitting (e.g. a variable that is
/// never observed).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input that parses but cannot be converted (e.g. a rating value outside the
/// configured map).
class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `line` and `column` are 1-based; 0 means unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        if (line == 0) return what;
        std::string s = "line " + std::to_string(line);
        if (column != 0) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

}  // namespace pmfvb
