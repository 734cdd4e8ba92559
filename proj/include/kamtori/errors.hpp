#pragma once

// Exception taxonomy for the solver and certificate pipeline.  Every error that a
// caller might reasonably catch and act on gets its own type; plain contract abuse
// (mismatched dimensions and the like) uses std::invalid_argument.

#include <stdexcept>
#include <string>
#include <vector>

namespace kamtori {

// Root of the library's own exceptions.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad or inconsistent run configuration (CLI config files, flag values).
struct ConfigError : Error {
    using Error::Error;
};

// An exact resonance |k.(omega,alpha)| below the resonance cutoff was found.
struct ResonanceError : Error {
    std::vector<int> index;
    ResonanceError(const std::string& what, std::vector<int> k)
        : Error(what), index(std::move(k)) {}
};

// A cohomological divisor fell below the small-divisor cutoff for a mode that
// actually carries mass.
struct SmallDivisorError : Error {
    std::vector<int> index;
    SmallDivisorError(const std::string& what, std::vector<int> k)
        : Error(what), index(std::move(k)) {}
};

// The tangent-frame Gram matrix L^T G L became numerically singular at a grid node.
struct DegenerateFrameError : Error {
    std::size_t node;
    DegenerateFrameError(const std::string& what, std::size_t node_index)
        : Error(what), node(node_index) {}
};

// The averaged torsion <T> is numerically singular.
struct TwistDegeneracyError : Error {
    using Error::Error;
};

// The embedding left the phase-space domain box at a grid node.
struct DomainViolationError : Error {
    std::size_t node;
    DomainViolationError(const std::string& what, std::size_t node_index)
        : Error(what), node(node_index) {}
};

// A Hermitian-symmetry violation detected when collapsing an evaluation to a real value.
struct SymmetryViolationError : Error {
    using Error::Error;
};

// Newton iteration error increased on two consecutive steps.  Carries the error
// history so callers can report the partial run.
struct DivergenceError : Error {
    std::vector<double> error_history;
    DivergenceError(const std::string& what, std::vector<double> history)
        : Error(what), error_history(std::move(history)) {}
};

// A certificate hypothesis bound has no slack over its measured value.
struct HypothesisSlackError : Error {
    std::string row;
    HypothesisSlackError(const std::string& what, std::string row_name)
        : Error(what), row(std::move(row_name)) {}
};

// A linear-solver consistency check (substitute-back residual) failed.
struct SolverConsistencyError : Error {
    using Error::Error;
};

}  // namespace kamtori
