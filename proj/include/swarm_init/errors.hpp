#ifndef SWARM_INIT_ERRORS_HPP
#define SWARM_INIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace swarm_init {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SWARM_INIT_DEFINE_ERROR(Name)                                       \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

// numerics
SWARM_INIT_DEFINE_ERROR(InvalidMatrix);
SWARM_INIT_DEFINE_ERROR(NotPSD);
SWARM_INIT_DEFINE_ERROR(Overflow);
SWARM_INIT_DEFINE_ERROR(InvalidProbability);
SWARM_INIT_DEFINE_ERROR(DimensionMismatch);

// orbit / drag
SWARM_INIT_DEFINE_ERROR(InvalidRegime);
SWARM_INIT_DEFINE_ERROR(ZeroSpinRate);
SWARM_INIT_DEFINE_ERROR(ResonantSpin);

// graphs
SWARM_INIT_DEFINE_ERROR(Disconnected);
SWARM_INIT_DEFINE_ERROR(BadEdge);
SWARM_INIT_DEFINE_ERROR(InvalidGraph);

// propagation / safety
SWARM_INIT_DEFINE_ERROR(DegenerateNominal);
SWARM_INIT_DEFINE_ERROR(InvalidArgument);

// configuration; `key` names the offending JSON path
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error("ConfigError: " + key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

#undef SWARM_INIT_DEFINE_ERROR

}  // namespace swarm_init

#endif  // SWARM_INIT_ERRORS_HPP
