#ifndef STEGPOOL_ERRORS_HPP
#define STEGPOOL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace stegpool {

// Bad argument or invalid parameter set.
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Requested target exceeds what the embedding/spreading can deliver.
struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; message carries file name and line number.
struct IngestError : std::runtime_error {
    explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration (unknown key, wrong type, unreadable file).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible artifacts at run time (e.g. model dimension vs data).
struct MismatchError : std::runtime_error {
    explicit MismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

// Classifier failed to reach the requested precision.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stegpool

#endif
