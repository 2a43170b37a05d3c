#pragma once

#include <stdexcept>
#include <string>

namespace gridstab {

// Every domain error carries a stable machine-readable code; the CLI maps
// these to exit status 1 and the HTTP service to 422 (400 for input errors).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

    // Input errors are the caller's fault (malformed documents, bad ids).
    virtual bool is_input_error() const noexcept { return false; }

private:
    std::string code_;
};

class InputError : public Error {
public:
    using Error::Error;
    bool is_input_error() const noexcept override { return true; }
};

#define GRIDSTAB_DEFINE_ERROR(Name, Base)                                      \
    class Name : public Base {                                                 \
    public:                                                                    \
        explicit Name(const std::string& what) : Base(#Name, what) {}          \
    };

GRIDSTAB_DEFINE_ERROR(ParseError, InputError)
GRIDSTAB_DEFINE_ERROR(TopologyError, InputError)
GRIDSTAB_DEFINE_ERROR(PhaseError, InputError)
GRIDSTAB_DEFINE_ERROR(UnknownNode, InputError)
GRIDSTAB_DEFINE_ERROR(StructureError, InputError)
GRIDSTAB_DEFINE_ERROR(DivisionByZeroReactance, Error)
GRIDSTAB_DEFINE_ERROR(DivisionByZero, Error)
GRIDSTAB_DEFINE_ERROR(DegenerateBlock, Error)
GRIDSTAB_DEFINE_ERROR(SingularMatrix, Error)
GRIDSTAB_DEFINE_ERROR(NumericalFailure, Error)
GRIDSTAB_DEFINE_ERROR(NoStabilizingGain, Error)
GRIDSTAB_DEFINE_ERROR(Unbounded, Error)
GRIDSTAB_DEFINE_ERROR(NoRealSolution, Error)
GRIDSTAB_DEFINE_ERROR(NoGoodConfigurationFound, Error)

#undef GRIDSTAB_DEFINE_ERROR

}  // namespace gridstab
