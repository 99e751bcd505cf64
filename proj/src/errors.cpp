#include "cdslab/errors.hpp"

namespace cdslab {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

} // namespace cdslab
