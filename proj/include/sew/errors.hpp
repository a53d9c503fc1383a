#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sew {

enum class ErrorCode {
    Unbound,
    Unserializable,
    Network,
    ReplayMiss,
    Quota,
    MalformedResponse,
    EmptyCompletion,
    MissingAgent,
    InvalidWorkflow,
    NoCodeFound,
    SandboxSetup,
    Domain,
    EmptyInput,
    Config,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// Backend-originated failures map to CLI exit code 3.
    bool is_backend_error() const noexcept {
        return code_ == ErrorCode::Network || code_ == ErrorCode::ReplayMiss ||
               code_ == ErrorCode::Quota || code_ == ErrorCode::MalformedResponse ||
               code_ == ErrorCode::EmptyCompletion;
    }

private:
    ErrorCode code_;
};

}  // namespace sew
