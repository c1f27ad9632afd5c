#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dramcal {

// Root of every exception thrown by the library. `stage()` names the module
// that raised it so the CLI can report which pipeline step failed.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

class ParseError : public Error {
public:
    ParseError(std::string stage, const std::string& source, std::size_t line, const std::string& msg);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// address-map
class AddressOutOfRange : public Error {
public:
    using Error::Error;
};
class InconsistentMapping : public Error {
public:
    using Error::Error;
};

// workload-gen
class OverlapError : public Error {
public:
    using Error::Error;
};
class AlignmentError : public Error {
public:
    using Error::Error;
};

// memctrl-sim / trace-stats
class MappingError : public Error {
public:
    using Error::Error;
};
class NonMonotonicCycle : public ParseError {
public:
    using ParseError::ParseError;
};
class IllegalTrace : public Error {
public:
    using Error::Error;
};

// power-model
class NegativeComponent : public Error {
public:
    using Error::Error;
};

// measurement
class WindowOutOfRange : public Error {
public:
    using Error::Error;
};
class TooFewSamples : public Error {
public:
    using Error::Error;
};
class EmptyRuns : public Error {
public:
    using Error::Error;
};
class NoFiles : public Error {
public:
    using Error::Error;
};
class NameConventionError : public Error {
public:
    using Error::Error;
};

// calibrate
class IdMismatch : public Error {
public:
    using Error::Error;
};
class NonFinite : public Error {
public:
    using Error::Error;
};

// cli
class MissingArtifacts : public Error {
public:
    using Error::Error;
};

}  // namespace dramcal
