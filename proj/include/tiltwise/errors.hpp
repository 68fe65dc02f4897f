#ifndef TILTWISE_ERRORS_HPP
#define TILTWISE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace tiltwise {

// Base error carrying a short machine-readable kind tag alongside the message.
// The CLI serializes (kind, message) as JSON on failure.
class TiltwiseError : public std::runtime_error {
public:
    TiltwiseError(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct SchemaError : TiltwiseError {
    explicit SchemaError(const std::string& msg) : TiltwiseError("schema", msg) {}
};

struct ParseError : TiltwiseError {
    explicit ParseError(const std::string& msg) : TiltwiseError("parse", msg) {}
};

struct ValidationError : TiltwiseError {
    explicit ValidationError(const std::string& msg) : TiltwiseError("validation", msg) {}
};

struct ConfigError : TiltwiseError {
    explicit ConfigError(const std::string& msg) : TiltwiseError("config", msg) {}
};

// Complete or quasi-separation in a logistic fit with ridge = 0.
struct SeparationError : TiltwiseError {
    explicit SeparationError(const std::string& msg) : TiltwiseError("separation", msg) {}
};

struct FitError : TiltwiseError {
    explicit FitError(const std::string& msg) : TiltwiseError("fit", msg) {}
};

struct SolverError : TiltwiseError {
    explicit SolverError(const std::string& msg) : TiltwiseError("solver", msg) {}
};

struct InferenceError : TiltwiseError {
    explicit InferenceError(const std::string& msg) : TiltwiseError("inference", msg) {}
};

// Requested estimand is undefined on the given data (e.g. no s=0 rows).
struct EstimandUndefinedError : TiltwiseError {
    explicit EstimandUndefinedError(const std::string& msg)
        : TiltwiseError("estimand_undefined", msg) {}
};

struct IoError : TiltwiseError {
    explicit IoError(const std::string& msg) : TiltwiseError("io", msg) {}
};

}  // namespace tiltwise

#endif
