#pragma once

#include <stdexcept>
#include <string>

namespace freqtrim {

enum class ErrorCode {
    invalid_model,
    domain,
    fit,
    controller,
    config,
    infeasible,
    search,
    parse,
    io,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; the code lets callers (and the C
// API) branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace freqtrim
