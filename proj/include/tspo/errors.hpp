#pragma once

#include <stdexcept>
#include <string>

namespace tspo {

// Shape/value violations of an operation's preconditions.
class InvalidArgumentError : public std::invalid_argument {
public:
    explicit InvalidArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Mathematically degenerate inputs (zero vectors fed to cosine, etc).
class DegenerateInputError : public std::invalid_argument {
public:
    explicit DegenerateInputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed on-disk data. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::uint64_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::uint64_t offset;
};

// Dataset generation could not produce enough records within the attempt budget.
class GenerationExhaustedError : public std::runtime_error {
public:
    explicit GenerationExhaustedError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite math was required.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tspo
