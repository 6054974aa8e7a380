#pragma once

#include <stdexcept>
#include <string>

namespace map2seq {

// Base class for all errors raised by the library. `kind` is a stable
// machine-readable tag used by the CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct OutOfRangeError : Error {
    explicit OutOfRangeError(const std::string& what) : Error("out_of_range", what) {}
};

struct DegenerateInputError : Error {
    explicit DegenerateInputError(const std::string& what) : Error("degenerate_input", what) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error("schema_mismatch", what) {}
};

struct NoPathError : Error {
    explicit NoPathError(const std::string& what) : Error("no_path", what) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error("shape_mismatch", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config_invalid", what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error("non_finite", what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace map2seq
