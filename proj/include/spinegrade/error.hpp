#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spinegrade {

enum class ErrorCode {
    // volume-io
    BadMagic,
    UnsupportedVersion,
    BadDimensions,
    NonPositiveSpacing,
    NonFiniteValue,
    TruncatedPayload,
    TrailingData,
    ValueOutOfRange,
    Io,
    // label table
    DuplicateKey,
    GradeOutOfRange,
    MalformedRow,
    // segmentation-geometry
    GeometryMismatch,
    NoSacrum,
    OverlapS1Lumbar,
    LabelMismatch,
    // spine-curve
    InsufficientPoints,
    DegenerateFit,
    MissingAdjacentVertebra,
    InsufficientCoverage,
    // grading-core
    NonFiniteInput,
    DegenerateClass,
    EmptyDataset,
    ShapeMismatch,
    // evaluation
    BadRatios,
    SingleClass,
    EmptyLevel,
    // phantom
    SpecOutOfBounds,
    // report-parser (surfaced as diagnostics by parse_report, thrown by the single-step API)
    UnknownSeverity,
    AmbiguousBinding,
    // configuration
    InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above; the CLI
/// maps them onto exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace spinegrade
