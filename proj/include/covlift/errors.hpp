#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace covlift {

enum class ErrorKind {
    DegenerateSimplex,
    BadIndex,
    OutsideSimplex,
    NotOnComplex,
    ParseError,
    IoError,
    PatchCountMismatch,
    BadDegree,
    OutOfDomain,
    MergeAmbiguity,
    DimMismatch,
    NotInRange,
    Diverged,
    EmptyCandidates,
    OutsideReach,
    SingularTangentMap,
    EmptySet,
    SizeMismatch,
    TooLarge,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DegenerateSimplex: return "DegenerateSimplex";
    case ErrorKind::BadIndex: return "BadIndex";
    case ErrorKind::OutsideSimplex: return "OutsideSimplex";
    case ErrorKind::NotOnComplex: return "NotOnComplex";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::PatchCountMismatch: return "PatchCountMismatch";
    case ErrorKind::BadDegree: return "BadDegree";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::MergeAmbiguity: return "MergeAmbiguity";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::NotInRange: return "NotInRange";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::EmptyCandidates: return "EmptyCandidates";
    case ErrorKind::OutsideReach: return "OutsideReach";
    case ErrorKind::SingularTangentMap: return "SingularTangentMap";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace covlift
