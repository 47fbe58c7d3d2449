#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qdnw {

enum class ErrorKind {
    InvalidArgument,
    SingularMetric,
    KindMismatch,
    ZeroVector,
    StepOutOfDomain,
    ConjugateBeforeT0,
    ConeDegenerate,
    NotANullForm,
    PivotNotFound,
    SamplingExhausted,
    DegenerateDenominator,
    SearchFailed,
    CourantViolation,
    NaNDetected,
    DivergenceDetected,
    NonContraction,
    CancellationLoss,
    EmptySet,
    UnsupportedMetric,
    ParseError,
    SchemaError,
    IoError,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind is the
/// machine-readable category; what() carries the human context.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::SingularMetric: return "SingularMetric";
        case ErrorKind::KindMismatch: return "KindMismatch";
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::StepOutOfDomain: return "StepOutOfDomain";
        case ErrorKind::ConjugateBeforeT0: return "ConjugateBeforeT0";
        case ErrorKind::ConeDegenerate: return "ConeDegenerate";
        case ErrorKind::NotANullForm: return "NotANullForm";
        case ErrorKind::PivotNotFound: return "PivotNotFound";
        case ErrorKind::SamplingExhausted: return "SamplingExhausted";
        case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorKind::SearchFailed: return "SearchFailed";
        case ErrorKind::CourantViolation: return "CourantViolation";
        case ErrorKind::NaNDetected: return "NaNDetected";
        case ErrorKind::DivergenceDetected: return "DivergenceDetected";
        case ErrorKind::NonContraction: return "NonContraction";
        case ErrorKind::CancellationLoss: return "CancellationLoss";
        case ErrorKind::EmptySet: return "EmptySet";
        case ErrorKind::UnsupportedMetric: return "UnsupportedMetric";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace qdnw
