// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_ERRORS_HPP
#define THZDET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace thzdet {

// Base class for all library errors so callers can catch them in one place.
struct Error : std::runtime_error {
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

struct RankDeficient : Error {
    explicit RankDeficient(const std::string &msg) : Error(msg) {}
};

struct NonConvergence : Error {
    explicit NonConvergence(const std::string &msg) : Error(msg) {}
};

struct NotPSD : Error {
    explicit NotPSD(const std::string &msg) : Error(msg) {}
};

struct ConfigInvalid : Error {
    explicit ConfigInvalid(const std::string &msg) : Error(msg) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string &msg) : Error(msg) {}
};

struct IndexOutOfRange : Error {
    explicit IndexOutOfRange(const std::string &msg) : Error(msg) {}
};

struct TooLarge : Error {
    explicit TooLarge(const std::string &msg) : Error(msg) {}
};

struct UnknownScheme : Error {
    explicit UnknownScheme(const std::string &msg) : Error(msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string &msg) : Error(msg) {}
};

struct NonInteger : Error {
    explicit NonInteger(const std::string &msg) : Error(msg) {}
};

struct SolverFailure : Error {
    explicit SolverFailure(const std::string &msg) : Error(msg) {}
};

struct QuadratureFailure : Error {
    explicit QuadratureFailure(const std::string &msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string &msg) : Error(msg) {}
};

} // namespace thzdet

#endif // THZDET_ERRORS_HPP
