#pragma once

#include <stdexcept>
#include <string>

namespace sseg {

// All pipeline errors carry a short category tag so callers (CLI, bindings)
// can prefix messages uniformly.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(category + ": " + message), category_(std::move(category)) {}

    const std::string& category() const { return category_; }

private:
    std::string category_;
};

class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& m) : Error("geometry", m) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& m) : Error("parse", m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error("io", m) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& m) : Error("usage", m) {}
};

}  // namespace sseg
