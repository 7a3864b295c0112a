#pragma once

#include <stdexcept>
#include <string>

namespace qiopa {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an operation would need Fock levels beyond the cutoff
/// (strict mode) or when a convergence/mass guard fails.
struct CutoffOverflow : Error {
    explicit CutoffOverflow(const std::string& what) : Error(what) {}
};

/// Raised when two tensors with incompatible cutoffs are combined.
struct CutoffMismatch : Error {
    explicit CutoffMismatch(const std::string& what) : Error(what) {}
};

/// Raised when normalizing a state with (numerically) zero norm.
struct ZeroNorm : Error {
    explicit ZeroNorm(const std::string& what) : Error(what) {}
};

/// Raised when every sampled record was discarded (ties / filter vetoes).
struct AllDiscarded : Error {
    explicit AllDiscarded(const std::string& what) : Error(what) {}
};

/// Raised when asking for statistics of an unpopulated grid.
struct EmptyGrid : Error {
    explicit EmptyGrid(const std::string& what) : Error(what) {}
};

/// Raised for injection photon numbers without a closed-form interference term.
struct UnsupportedInjection : Error {
    explicit UnsupportedInjection(const std::string& what) : Error(what) {}
};

/// Raised for invalid run configurations (CLI / config file).
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace qiopa
