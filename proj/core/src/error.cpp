#include "tsmix/error.hpp"

namespace tsmix {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::parse: return "parse";
        case ErrorKind::io: return "io";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::stale: return "stale";
        case ErrorKind::external: return "external";
    }
    return "unknown";
}

}  // namespace tsmix
