#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stnet {

/// Base for every error raised by the library. The CLI maps subclasses onto
/// exit codes (config 2, numeric 3, io 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents or layer boundaries that do not compose.
class ShapeError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Non-finite values, domain violations, divergence.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::size_t index)
        : Error(what + " (flat index " + std::to_string(index) + ")"), index_(index) {}
    explicit NumericError(const std::string& what) : Error(what), index_(npos) {}
    std::size_t index() const noexcept { return index_; }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::size_t index_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or version-mismatched files.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TrainingError : public NumericError {
public:
    TrainingError(const std::string& what, int stage, int epoch)
        : NumericError(what + " (stage " + std::to_string(stage) + ", epoch " +
                       std::to_string(epoch) + ")"),
          stage_(stage), epoch_(epoch) {}
    int stage() const noexcept { return stage_; }
    int epoch() const noexcept { return epoch_; }

private:
    int stage_;
    int epoch_;
};

}  // namespace stnet
