#pragma once

#include <stdexcept>
#include <string>

namespace simforge {

// Base class for every error the kernel raises. Subclasses carry no extra
// state beyond the message unless noted.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Document / schema errors
class MalformedDocument : public Error {
public:
    using Error::Error;
};

class SchemaViolation : public Error {
public:
    using Error::Error;
};

class UnknownTarget : public Error {
public:
    using Error::Error;
};

// Metric errors
class LengthMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class NotNormalized : public Error {
public:
    using Error::Error;
};

class SupportMismatch : public Error {
public:
    using Error::Error;
};

class MissingLink : public Error {
public:
    using Error::Error;
};

class EmptyLinks : public Error {
public:
    using Error::Error;
};

class MissingMetric : public Error {
public:
    using Error::Error;
};

// Playbook / selection errors
class IllegalTransition : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

// Calibrator errors
class SimulationFailure : public Error {
public:
    using Error::Error;
};

class AllTrialsFailed : public Error {
public:
    using Error::Error;
};

// Orchestrator errors
class GeneratorFailure : public Error {
public:
    using Error::Error;
};

class ExecutorFailure : public Error {
public:
    using Error::Error;
};

class LoopAborted : public Error {
public:
    using Error::Error;
};

// Reference simulator errors
class CatalogExhausted : public Error {
public:
    using Error::Error;
};

// LLM client errors
class AuthMissing : public Error {
public:
    using Error::Error;
};

class HttpError : public Error {
public:
    HttpError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class Timeout : public Error {
public:
    using Error::Error;
};

class MalformedResponse : public Error {
public:
    using Error::Error;
};

class ExtractionFailed : public Error {
public:
    using Error::Error;
};

}  // namespace simforge
