#pragma once

#include <stdexcept>
#include <string>

namespace affdepth {

// Malformed or inconsistent input data (shape mismatch, bad file, missing score).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical precondition failed (singular system, divergence, too few samples).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File parse failure; carries the byte offset where parsing stopped.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace affdepth
