#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asmwb {

enum class ErrorCode {
    SyntaxError,
    DuplicateDeclaration,
    UnknownImport,
    UnresolvedSymbol,
    TypeMismatch,
    MissingMonitoredInput,
    InconsistentUpdateSet,
    ClockRegression,
    UnboundTimer,
    NotControlStateShaped,
    CorruptedAsset,
    InvalidConfig,
    StateSpaceBudgetExceeded,
    UnknownAtom,
    EmptyGlue,
    SetOnControlled,
    UnsupportedConstruct,
    InvalidPinConfig,
    IncompletePinConfig,
    TraceMachineMismatch,
    BothValvesOpen,
    InvalidLungParameters,
    UnknownSession,
    ResourceLimit,
    InvalidCommand,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), message_(message)
    {
    }

    [[nodiscard]] ErrorCode code() const { return code_; }
    /// The message without the error-code prefix.
    [[nodiscard]] const std::string& message() const { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

class SyntaxError : public Error {
public:
    SyntaxError(int line, int col, const std::string& expected, const std::string& found = {});

    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int col() const { return col_; }
    [[nodiscard]] const std::string& expected() const { return expected_; }

private:
    int line_;
    int col_;
    std::string expected_;
};

/// A step error re-raised by run() with the index of the failing step.
class RunError : public Error {
public:
    RunError(std::size_t step, const Error& cause)
        : Error(cause.code(), "step " + std::to_string(step) + ": " + cause.message()), step_(step)
    {
    }

    [[nodiscard]] std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

} // namespace asmwb
