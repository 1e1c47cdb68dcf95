#include "fcadl/error.hpp"

namespace fcadl {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::alignment: return "alignment";
    case Errc::gap: return "gap";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::dimension: return "dimension";
    case Errc::numerical: return "numerical";
    case Errc::input: return "input";
    case Errc::contract: return "contract";
    case Errc::precondition: return "precondition";
    case Errc::insufficient_evidence: return "insufficient-evidence";
    case Errc::no_signal: return "no-signal";
    case Errc::spec: return "spec";
    case Errc::config: return "config";
    case Errc::degenerate_embedding: return "degenerate-embedding";
    }
    return "unknown";
}

} // namespace fcadl
