#pragma once

#include <stdexcept>
#include <string>

namespace snnhdc {

// Error taxonomy shared by every module. All derive from std::runtime_error so
// callers that only care about "something went wrong" can catch that.

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MathError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    TrainingError(const std::string& what, int epoch)
        : std::runtime_error(what), epoch(epoch) {}
    int epoch;
};

}  // namespace snnhdc
