#pragma once

#include <stdexcept>
#include <string>

namespace fidsel {

enum class ErrorCode {
    InvalidRates,
    InvalidGrid,
    InvalidParams,
    TailMassTooLarge,
    SupportTooSmall,
    InadmissibleRest,
    BudgetExceeded,
    RhoGeOne,
    TheoremViolation,
    ConfigInvalid,
    LoadError,
    PolicyMismatch,
    GridTooLarge,
    UnreachableState,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace fidsel
