#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace imageteller {

/// Closed set of failure causes surfaced by every module. The names double as
/// the machine-readable codes of the REST error payload.
enum class ErrorCode {
    // request validation
    EmptySequence,
    TooManyFrames,
    BadImageFormat,
    CaptionTooLong,
    DuplicateFrameIndex,
    UnknownGenre,
    // prompt engine
    MissingGenre,
    MissingDescriptions,
    EmptyChapter,
    InvalidSpan,
    PreconditionViolation,
    AnnotatorFailure,
    // story parser
    NoTitle,
    NoChapters,
    EmptyBody,
    // agents
    InvalidConfig,
    AgentTimeout,
    AgentHttpError,
    AgentBadResponse,
    // plot manager
    ValidationFailed,
    AnalysisFailed,
    NarrativeFailed,
    ParseFailed,
    ParseFailedAfterRetries,
    IllustrationFailed,
    UnknownChapter,
    UnknownJob,
    // library store
    NotFound,
    StorageFull,
    IoFailure,
    CorruptDocument,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    /// `subject` identifies what failed when that is a number: a frame index,
    /// a chapter number or an HTTP status.
    Error(ErrorCode code, const std::string& message, std::optional<int> subject = std::nullopt)
        : std::runtime_error(message), code_(code), subject_(subject) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<int> subject() const noexcept { return subject_; }

private:
    ErrorCode code_;
    std::optional<int> subject_;
};

} // namespace imageteller
