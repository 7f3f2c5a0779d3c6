#pragma once

#include <stdexcept>
#include <string>

namespace bifmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DisconnectedError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class DegenerateSpectrumError : public Error {
public:
    using Error::Error;
};

class SingularCoreError : public Error {
public:
    using Error::Error;
};

class SizeGuardError : public Error {
public:
    using Error::Error;
};

class IOError : public Error {
public:
    using Error::Error;
};

/// Raised by the pipeline; the message is prefixed with the failing step.
class PipelineError : public Error {
public:
    PipelineError(std::string step, const std::string& what)
        : Error("[" + step + "] " + what), step_(std::move(step))
    {}

    const std::string& step() const noexcept { return step_; }

private:
    std::string step_;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what)
{
    if (!ok) throw DimensionError(what);
}

} // namespace detail

} // namespace bifmap
