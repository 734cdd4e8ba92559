#pragma once

// Hamiltonian systems with quasi-periodic time dependence: H(z, phi) on a phase-space
// domain box times the external torus T^ell, with the vector field Z_H = Omega^{-1} grad_z H
// and its first two z-derivatives available pointwise.  The invariance equation for an
// embedding K and frequencies (omega, alpha) reads
//
//     E(theta, phi) = Z_H(K(theta,phi), phi) + L_{omega,alpha} K(theta,phi),
//
// and E == 0 certifies the torus; the solver drives E to round-off.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "kamtori/cohomology.hpp"
#include "kamtori/embedding.hpp"
#include "kamtori/symplectic.hpp"

namespace kamtori {

// Axis-aligned phase-space domain: periodic axes are angles with no boundary, bounded
// axes carry an interval.  The margin of a point is its distance to the nearest
// boundary over bounded axes (+inf when every axis is periodic).
struct DomainBox {
    struct Axis {
        bool periodic = false;
        double lo = 0.0;
        double hi = 0.0;
    };
    std::vector<Axis> axes;  // one per phase-space coordinate

    double margin(const Eigen::VectorXd& z) const;
    bool contains(const Eigen::VectorXd& z) const { return margin(z) > 0.0; }
};

struct HamiltonianSystem {
    TorusDims dims;  // n internal angles, ell external
    SymplecticStructure structure;
    DomainBox box;

    // Pointwise evaluators; phi holds the ell external angles.
    std::function<double(const Eigen::VectorXd& z, const std::vector<double>& phi)> H;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const std::vector<double>&)> grad_H;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const std::vector<double>&)> field;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const std::vector<double>&)>
        field_jacobian;
    // Component Hessians: result[i](j,k) = d^2 (Z_H)_i / dz_j dz_k.
    std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&, const std::vector<double>&)>
        field_hessians;
};

// Forced pendulum on the cylinder T x R with canonical structure:
//     H(x, y, phi) = y^2/2 + eps * cos(2*pi*x) * (1 + sum_j cos(2*pi*phi_j)).
// eps = 0 is the rotator.  The domain box bounds the momentum to [y_lo, y_hi].
HamiltonianSystem forced_pendulum(double eps, int ell, double y_lo, double y_hi);

// Z_H(K(.), .) at the nodes of a grid.  Throws DomainViolationError naming the first
// node whose phase-space point leaves the domain box.
MatrixGrid field_on_torus(const TorusEmbedding& K, const HamiltonianSystem& sys,
                          const std::vector<int>& shape);

// E = Z_H(K) + L_{omega,alpha} K as a 2n x 1 matrix series on K's truncation.  The
// nonlinear part is analyzed from the grid; *truncation_residual (if non-null) gets
// the largest per-component discarded spectral mass.
MatrixSeries invariance_error(const TorusEmbedding& K, const HamiltonianSystem& sys,
                              const Frequencies& freq, const std::vector<int>& shape,
                              double* truncation_residual = nullptr);

// Independent validation by numerical integration: trajectories started on the torus
// are compared against the rotated embedding at checkpoint times.
struct FlowValidationRow {
    std::vector<double> start_angles;  // (theta_0, phi_0)
    double max_deviation = 0.0;        // over checkpoints and components, lifted coords
};
struct FlowValidationResult {
    std::vector<FlowValidationRow> rows;
    double max_deviation = 0.0;
    double t_final = 0.0;
    int checkpoints = 0;
};

// Integrates with an adaptive embedded Runge-Kutta pair at abs/rel tolerance rk_tol
// (default 1e-11).  Samples are spread along the diagonal of the combined torus.
FlowValidationResult flow_validate(const TorusEmbedding& K, const HamiltonianSystem& sys,
                                   const Frequencies& freq, double t_final, int samples,
                                   int checkpoints, double rk_tol = 1e-11);

}  // namespace kamtori
