#pragma once

#include <stdexcept>
#include <string>

namespace medsim {

// Error categories double as CLI exit codes.
enum class ErrorKind : int {
    internal = 1,
    config = 2,
    data = 3,
    fit = 4,
    divergence = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

// Data-side failures: missing columns, unparseable cells, out-of-support values.
struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error(ErrorKind::data, what) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(ErrorKind::data, what) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct FitError : Error {
    explicit FitError(const std::string& what) : Error(ErrorKind::fit, what) {}
};
struct SeparationError : FitError {
    explicit SeparationError(const std::string& what) : FitError(what) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& what, long long batch_index = -1)
        : Error(ErrorKind::divergence, what), batch(batch_index) {}

    long long batch;  // mini-batch at which the loss became non-finite, -1 when not applicable
};

struct RangeError : Error {
    explicit RangeError(const std::string& what) : Error(ErrorKind::fit, what) {}
};

// Re-throws the in-flight exception with `context` prepended, keeping its category.
[[noreturn]] void rethrow_with_context(const std::string& context);

}  // namespace medsim
