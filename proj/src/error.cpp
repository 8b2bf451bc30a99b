#include "spinegrade/error.hpp"

namespace spinegrade {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::BadDimensions: return "BadDimensions";
        case ErrorCode::NonPositiveSpacing: return "NonPositiveSpacing";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::TrailingData: return "TrailingData";
        case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
        case ErrorCode::Io: return "Io";
        case ErrorCode::DuplicateKey: return "DuplicateKey";
        case ErrorCode::GradeOutOfRange: return "GradeOutOfRange";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::GeometryMismatch: return "GeometryMismatch";
        case ErrorCode::NoSacrum: return "NoSacrum";
        case ErrorCode::OverlapS1Lumbar: return "OverlapS1Lumbar";
        case ErrorCode::LabelMismatch: return "LabelMismatch";
        case ErrorCode::InsufficientPoints: return "InsufficientPoints";
        case ErrorCode::DegenerateFit: return "DegenerateFit";
        case ErrorCode::MissingAdjacentVertebra: return "MissingAdjacentVertebra";
        case ErrorCode::InsufficientCoverage: return "InsufficientCoverage";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::DegenerateClass: return "DegenerateClass";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::BadRatios: return "BadRatios";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::EmptyLevel: return "EmptyLevel";
        case ErrorCode::SpecOutOfBounds: return "SpecOutOfBounds";
        case ErrorCode::UnknownSeverity: return "UnknownSeverity";
        case ErrorCode::AmbiguousBinding: return "AmbiguousBinding";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

}  // namespace spinegrade
