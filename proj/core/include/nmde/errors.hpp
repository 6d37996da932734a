#pragma once

#include <stdexcept>
#include <string>

namespace nmde {

/// Base class for every error raised by the library. Carries the name of the
/// module that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    [[nodiscard]] const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Bad input: malformed files, inconsistent dimensions, out-of-range settings.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-finite values, factorizations that cannot be
/// certified, root searches without a solution.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace nmde
