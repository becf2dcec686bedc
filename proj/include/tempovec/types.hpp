#pragma once
// Shared primitives: timestamps, identifiers, error hierarchy.

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tempovec {

// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;

inline Timestamp now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// Base class for all engine errors. CLI maps these to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / persistence failures (unreadable file, write error, ...).
class IoError : public Error {
public:
    using Error::Error;
};

// A complete frame failed its CRC or contains an impossible encoding.
class CorruptLogError : public Error {
public:
    CorruptLogError(const std::string& what, std::uint64_t byte_offset)
        : Error(what + " at byte offset " + std::to_string(byte_offset)),
          offset_(byte_offset) {}
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

// Vector length does not match the store's configured dimension.
class DimensionMismatchError : public Error {
public:
    DimensionMismatchError(std::size_t expected, std::size_t got)
        : Error("embedding dimension mismatch: expected " + std::to_string(expected) +
                ", got " + std::to_string(got)) {}
};

// Write would violate a uniqueness or liveness precondition.
class ConflictError : public Error {
public:
    using Error::Error;
};

// Hot/cold tiers disagree about a record that should be live.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Embedding provider failure; retryable means the same call may later succeed.
class EmbeddingError : public Error {
public:
    explicit EmbeddingError(const std::string& what, bool retryable = false)
        : Error(what), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

// Caller misuse: bad arguments, out-of-range versions, timestamp regressions.
class UsageError : public Error {
public:
    using Error::Error;
};

// Another process holds the writer lock.
class LockError : public Error {
public:
    using Error::Error;
};

} // namespace tempovec
