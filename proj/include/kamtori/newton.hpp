#pragma once

// Quasi-Newton iteration for the invariance equation.  Each step projects the error
// onto the adapted frame,
//
//     eta_L = -N^T Omega(K) E,    eta_N = L^T Omega(K) E,
//
// solves the triangular cohomological system
//
//     xi_N = xi_N00 + R(eta_N),   xi_N00 = <T>^{-1} <eta_L - T R(eta_N)>,
//     xi_L = R(eta_L - T xi_N),   <xi_L> = 0,
//
// where R inverts the constant-coefficient derivative along the flow direction, and
// updates the periodic part of the embedding by Delta K = L xi_L + N xi_N.  The
// winding and the frequencies never change; the truncation box is fixed throughout.
// Errors contract quadratically until truncation or roundoff saturates.

#include <Eigen/Dense>
#include <vector>

#include "kamtori/frame.hpp"

namespace kamtori {

struct NewtonConfig {
    int max_iters = 12;
    double stop_tol = 1e-12;        // on the grid sup of the invariance error
    double rho0 = 0.1;              // reporting strip radius (trig polynomials allow any)
    double a1 = 2.0;                // error-growth exponents of the reporting schedule
    double a2 = 2.0;
    double consistency_tol = 1e-11; // substitute-back residual bound
    int oversample_factor = 4;
    int oversample_pad = 4;
};

// What one iteration looked like: the error before the step, the correction applied,
// and the frame health.  rho/delta follow the geometric reporting schedule
// delta_s = rho_s / a3, rho_{s+1} = rho_s - 3 delta_s with a3 = 3 a1 a2 / ((a1-1)(a2-1)).
struct StepDiagnostics {
    int step = 0;
    double error_sup = 0.0;        // grid sup of |E| before the correction
    double error_analytic = 0.0;   // max component analytic norm at rho
    double rho = 0.0;
    double delta = 0.0;
    // Frame and correction fields stay zero on the terminal row: no step is
    // taken from the converged (or max-iteration) iterate.
    double correction_sup = 0.0;   // grid sup of |Delta K|
    double frame_condition = 0.0;
    double torsion_condition = 0.0;
    double average_removed = 0.0;  // |<eta_N>| dropped before inverting the derivative
    double substitute_back = 0.0;  // residual of the solved triangular system
    Eigen::MatrixXd avgT;
};

struct NewtonResult {
    TorusEmbedding K;
    std::vector<StepDiagnostics> history;
    bool converged = false;
    double final_error_sup = 0.0;
    // Fitted contraction order: slope of log e_{s+1} against log e_s over the last
    // clean pairs.  NaN when fewer than two pairs survive the saturation filter.
    double quadratic_order = 0.0;
};

// Frame plus torsion in one call; shape is the working grid.
AdaptedFrame assemble_frame(const TorusEmbedding& K, const HamiltonianSystem& sys,
                            const std::vector<int>& shape);

struct ProjectedError {
    MatrixSeries etaL;  // n x 1
    MatrixSeries etaN;  // n x 1
};

ProjectedError project_error(const AdaptedFrame& frame, const MatrixSeries& E,
                             const TorusEmbedding& K, const SymplecticStructure& s,
                             const std::vector<int>& shape);

struct TriangularSolution {
    MatrixSeries xiL;  // n x 1, zero average
    MatrixSeries xiN;  // n x 1
    Eigen::VectorXd xiN00;
    double average_removed = 0.0;
    // sup of | L_{omega,alpha} xi_L + T xi_N - eta_L | and the matching xi_N relation,
    // reusing the same truncated product T xi_N that built the right-hand side.
    double substitute_back = 0.0;
};

// Solves the triangular system above.  Throws SolverConsistencyError when the
// substitute-back residual exceeds consistency_tol.
TriangularSolution solve_triangular(const MatrixSeries& T, const Eigen::MatrixXd& avgT_inverse,
                                    const MatrixSeries& etaL, const MatrixSeries& etaN,
                                    const Frequencies& freq, const std::vector<int>& shape,
                                    double consistency_tol);

struct NewtonStep {
    TorusEmbedding K_next;
    TriangularSolution solution;
    double correction_sup = 0.0;
};

// One quasi-Newton step from a frame with torsion already assembled.
NewtonStep newton_step(const TorusEmbedding& K, const AdaptedFrame& frame,
                       const MatrixSeries& E, const SymplecticStructure& s,
                       const Frequencies& freq, const std::vector<int>& shape,
                       double consistency_tol);

// True when the last three entries show two consecutive strict increases.
bool detect_divergence(const std::vector<double>& errors);

// Slope of log e_{s+1} vs log e_s over the final max_pairs pairs whose e_{s+1}
// exceeds the saturation floor.  NaN when fewer than two pairs qualify.
double fitted_order(const std::vector<double>& errors, int max_pairs = 3,
                    double saturation = 1e-13);

// Runs the iteration to stop_tol.  Throws DivergenceError (carrying the error history)
// on two consecutive error increases; frame and domain guards propagate from below.
NewtonResult run_newton(const TorusEmbedding& K0, const HamiltonianSystem& sys,
                        const Frequencies& freq, const NewtonConfig& cfg);

}  // namespace kamtori
