#pragma once

#include <stdexcept>
#include <string>

namespace timewarp {

// Raised when the simulation state can no longer be trusted: an anti-message
// whose target provably never existed, a rollback that would cross the
// committed horizon, a missing snapshot. The harness maps this to exit code 1.
class ProtocolFault : public std::runtime_error {
public:
    explicit ProtocolFault(const std::string& what) : std::runtime_error(what) {}
};

// Unusable run configuration (bad file, out-of-range value). The harness
// maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Contract violations are plain logic errors (caller bugs, not corruption).
inline void require(bool cond, const char* what) {
    if (!cond) throw std::logic_error(what);
}

inline void check_protocol(bool cond, const std::string& what) {
    if (!cond) throw ProtocolFault(what);
}

}  // namespace timewarp
