#pragma once

#include <stdexcept>
#include <string>

namespace torsionlab {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad input: malformed config, dimension mismatch, violated precondition.
// CLI maps this to exit code 1.
struct ConfigError : Error {
    using Error::Error;
};

// Numerical ambiguity the library refuses to resolve by guessing:
// ill-conditioned rank decisions, spectral cuts through eigenvalue
// clusters, Agmon angles on eigenvalue rays, defective-window extraction.
// CLI maps this to exit code 2.
struct NumericalRefusal : Error {
    using Error::Error;
};

} // namespace torsionlab
