#pragma once

#include <stdexcept>
#include <string>

namespace mgt {

/// Base of every library error. Carries a stable kind name and the CLI exit code
/// (1 configuration, 2 solver, 3 inversion).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message, int exit_code);

    const std::string& kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string kind_;
    int exit_code_;
};

#define MGT_DECLARE_ERROR(Name, code)                                          \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(#Name, message, code) {} \
    };

// configuration / structural
MGT_DECLARE_ERROR(ConfigError, 1)
MGT_DECLARE_ERROR(OverlapError, 1)
MGT_DECLARE_ERROR(EmptySetError, 1)
MGT_DECLARE_ERROR(NonPositiveExponent, 1)
MGT_DECLARE_ERROR(ShapeMismatch, 1)
MGT_DECLARE_ERROR(SupportError, 1)
MGT_DECLARE_ERROR(OrderTooLarge, 1)
MGT_DECLARE_ERROR(DimensionGate, 1)

// solver
MGT_DECLARE_ERROR(SingularStepMatrix, 2)
MGT_DECLARE_ERROR(BlowUp, 2)
MGT_DECLARE_ERROR(NoContraction, 2)
MGT_DECLARE_ERROR(MaxIterExceeded, 2)
MGT_DECLARE_ERROR(MissingDerivative, 2)
MGT_DECLARE_ERROR(DerivativeOrderUnsupported, 2)

// inversion
MGT_DECLARE_ERROR(EmptyBank, 3)
MGT_DECLARE_ERROR(IllConditioned, 3)
MGT_DECLARE_ERROR(SmallDivisor, 3)
MGT_DECLARE_ERROR(ExponentOrderViolation, 3)

// persistence
MGT_DECLARE_ERROR(IoError, 4)

#undef MGT_DECLARE_ERROR

}  // namespace mgt
