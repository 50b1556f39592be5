#pragma once

#include <stdexcept>
#include <string>

namespace goemo {

// Process exit codes used by the CLI. Stable across versions.
enum class ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kNumericalFailure = 3,
    kContractMismatch = 4,
};

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::kInputError; }
};

// Malformed input text (TSV rows, embedding rows, config lines).
class ParseError : public Error {
   public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what), line_(0) {}

    std::size_t line() const noexcept { return line_; }

   private:
    std::size_t line_;
};

// Well-formed input that violates a domain rule (label range, duplicate id, ...).
class ValidationError : public Error {
   public:
    using Error::Error;
};

// Operand shapes or model/feature dimensions do not conform.
class ShapeError : public Error {
   public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kContractMismatch; }
};

// Non-finite losses, gradients, or function values.
class NumericError : public Error {
   public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kNumericalFailure; }
};

// Progress and warnings go to stderr; results never do.
void log_info(const std::string& message);
void log_warning(const std::string& message);

}  // namespace goemo
