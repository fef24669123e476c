#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asr {

/// Failure categories surfaced by every module. The CLI maps these to exit
/// code 1; the HTTP layer maps them to status codes.
enum class ErrorCode {
    InvalidConversation,
    IndexError,
    PreconditionFailed,
    BackendUnavailable,
    EmptyGeneration,
    InvalidInput,
    DimensionError,
    DegenerateVector,
    ParseError,
    DuplicateId,
    VariantRejected,
    NotFound,
    AlreadyVetted,
    PlanMismatch,
    NoModelTurns,
    PairingError,
    ZeroVariance,
    RankDeficient,
    InsufficientData,
    IncompleteSession,
    SchemaError,
    StorageError,
    Unauthorized,
    KeyConsumed,
    ProtocolError,
    ValidationError,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidConversation: return "InvalidConversation";
    case ErrorCode::IndexError: return "IndexError";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::VariantRejected: return "VariantRejected";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::AlreadyVetted: return "AlreadyVetted";
    case ErrorCode::PlanMismatch: return "PlanMismatch";
    case ErrorCode::NoModelTurns: return "NoModelTurns";
    case ErrorCode::PairingError: return "PairingError";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::IncompleteSession: return "IncompleteSession";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::StorageError: return "StorageError";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::KeyConsumed: return "KeyConsumed";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, std::string const & message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message)
    , code_(code)
    , detail_(message)
    { }

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

    /// Message without the code prefix.
    [[nodiscard]] std::string const & detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string const & message)
{
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, std::string const & message)
{
    if (!condition) {
        fail(code, message);
    }
}

} // namespace asr
