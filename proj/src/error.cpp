#include "phenex/error.hpp"

namespace phenex {

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Usage:
        return 1;
    case ErrorKind::ConstantOutcome:
    case ErrorKind::SingularDesign:
        return 3;
    default:
        return 2;
    }
}

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Usage: return "Usage";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::UnknownSentence: return "UnknownSentence";
    case ErrorKind::PatientMismatch: return "PatientMismatch";
    case ErrorKind::ConstantOutcome: return "ConstantOutcome";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::InvalidP: return "InvalidP";
    case ErrorKind::SpecInvalid: return "SpecInvalid";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

} // namespace phenex
