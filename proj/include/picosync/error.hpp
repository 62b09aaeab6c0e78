#pragma once

#include <stdexcept>

namespace picosync {

/// Invalid parameters. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace picosync
