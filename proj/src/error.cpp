#include "fidsel/error.hpp"

namespace fidsel {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidRates: return "invalid-rates";
    case ErrorCode::InvalidGrid: return "invalid-grid";
    case ErrorCode::InvalidParams: return "invalid-params";
    case ErrorCode::TailMassTooLarge: return "tail-mass-too-large";
    case ErrorCode::SupportTooSmall: return "support-too-small";
    case ErrorCode::InadmissibleRest: return "inadmissible-rest";
    case ErrorCode::BudgetExceeded: return "budget-exceeded";
    case ErrorCode::RhoGeOne: return "rho-ge-one";
    case ErrorCode::TheoremViolation: return "theorem-violation";
    case ErrorCode::ConfigInvalid: return "config-invalid";
    case ErrorCode::LoadError: return "load-error";
    case ErrorCode::PolicyMismatch: return "policy-mismatch";
    case ErrorCode::GridTooLarge: return "grid-too-large";
    case ErrorCode::UnreachableState: return "unreachable-state";
    }
    return "unknown";
}

} // namespace fidsel
