#pragma once

#include <stdexcept>
#include <string>

namespace ostb {

// Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
// NumericError -> 4. Anything else -> 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ostb
