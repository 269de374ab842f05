#pragma once

#include <stdexcept>
#include <string>

namespace vitreforge {

// Error taxonomy. The CLI maps these onto process exit codes:
// config problems exit 3, data/format/IO problems exit 2.

// Tensor shape or dimension mismatch.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed container (bad magic, unparseable index, duplicate key).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid container with inconsistent payload (truncation,
// offset past end of file).
struct CorruptionError : std::runtime_error {
    explicit CorruptionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Index declares a dtype this build does not read.
struct UnsupportedDtypeError : std::runtime_error {
    explicit UnsupportedDtypeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Archive does not satisfy an expected key/shape schema.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (bad stage layout, head without classifier, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vitreforge
