#pragma once

#include <stdexcept>
#include <string>

namespace presgan {

// Bad user input: malformed config, shape mismatch, out-of-range hyperparameter.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Arithmetic breakdown at runtime: non-finite values, singular matrices,
// exhausted sampler retries.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem trouble: unreadable path, failed write, malformed file payload.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace presgan
