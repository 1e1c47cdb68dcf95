#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcadl {

enum class Errc {
    io,
    parse,
    alignment,
    gap,
    insufficient_data,
    dimension,
    numerical,
    input,
    contract,
    precondition,
    insufficient_evidence,
    no_signal,
    spec,
    config,
    degenerate_embedding,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries a category so callers (and the
/// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + " error: " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace fcadl
