#pragma once

#include <stdexcept>
#include <string>

namespace phenex {

enum class ErrorKind {
    Usage,
    Parse,
    EmptyCorpus,
    UnknownSentence,
    PatientMismatch,
    ConstantOutcome,
    SingularDesign,
    InvalidP,
    SpecInvalid,
    Io,
};

/// Process exit code for an error kind: 1 usage, 2 data, 3 numerical.
int exit_code(ErrorKind kind) noexcept;

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace phenex
