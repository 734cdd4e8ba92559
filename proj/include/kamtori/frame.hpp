#pragma once

// The adapted symplectic frame along an embedded torus.  From the tangent frame
// L = D_theta K the construction produces
//
//     N0 = J(K) L,   B = (L^T G(K) L)^{-1},   Ntilde = N0 B,
//     A  = -1/2 Ntilde^T Omega(K) Ntilde   (zero when J^2 = -I),
//     N  = L A + Ntilde,   P = [L N],
//
// which straightens Omega along the torus up to the invariance error: P^T Omega(K) P
// equals the canonical form plus blocks built from Omega_L = L^T Omega(K) L, and
// Omega_L vanishes on average for Lagrangian tori.  The torsion T is the twist of the
// normal directions under the flow; its kernel T_h depends only on the system and the
// structure.  Everything is computed nodewise on an oversampled grid and re-truncated.

#include <Eigen/Dense>

#include "kamtori/embedding.hpp"
#include "kamtori/hamiltonian.hpp"
#include "kamtori/matrixseries.hpp"
#include "kamtori/symplectic.hpp"

namespace kamtori {

struct AdaptedFrame {
    MatrixSeries L;       // 2n x n
    MatrixSeries N0;      // 2n x n
    MatrixSeries B;       // n x n, symmetric
    MatrixSeries A;       // n x n, antisymmetric; exactly zero unless tag == CaseII
    MatrixSeries Ntilde;  // 2n x n
    MatrixSeries N;       // 2n x n
    MatrixSeries P;       // 2n x 2n
    MatrixSeries OmegaL;  // n x n, zero average for Lagrangian tori

    MatrixSeries T;  // n x n torsion, filled by torsion()
    Eigen::MatrixXd avgT;
    Eigen::MatrixXd avgT_inverse;

    double frame_condition = 0.0;    // worst nodewise cond(L^T G L)
    double torsion_condition = 0.0;  // cond(<T>)
    double truncation_residual = 0.0;

    bool has_torsion() const { return T.rows > 0; }
};

// Oversampled working grid for nodewise products: M_j = factor*N_j + pad keeps the
// alias images of quadratic products out of the truncation box (factor >= 3) with the
// default pushing them into the analytic tail.
std::vector<int> oversampled_shape(const std::vector<int>& trunc, int factor = 4, int pad = 4);

// Evaluates a pointwise matrix-valued map (Omega, G, J, ...) over the embedding values
// stored in Kg (a 2n x 1 grid).
MatrixGrid structure_on_torus(const MatrixGrid& Kg,
                              const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& f);

// D_theta K including the winding constants: a 2n x n matrix series.
MatrixSeries tangent_frame(const TorusEmbedding& K);

// Omega_L = L^T Omega(K) L.
MatrixSeries reduced_form(const TorusEmbedding& K, const SymplecticStructure& s,
                          const std::vector<int>& shape);

// Builds the frame fields (everything but the torsion).  Throws DegenerateFrameError
// naming the first worst node when cond(L^T G L) exceeds 1e12.
AdaptedFrame build_frame(const TorusEmbedding& K, const SymplecticStructure& s,
                         const std::vector<int>& shape);

// P^T Omega(K) P minus the canonical form: the frame's symplectic defect, bounded by
// multiples of the invariance error.
MatrixSeries symplectic_error(const AdaptedFrame& frame, const TorusEmbedding& K,
                              const SymplecticStructure& s, const std::vector<int>& shape);

struct TorsionKernel {
    MatrixGrid Th;  // 2n x 2n at the nodes
    // max node deviation |Th - Th^T|; meaningful for the almost-complex cases, where
    // the kernel is symmetric up to the invariance error.
    double symmetry_residual = 0.0;
};

// The torsion kernel at one phase-space point:
//   CaseII:              T_h = Omega (D_z Z_H - D_z J[Z_H] J^{-1} - J D_z Z_H J^{-1})
//   CaseIII / Canonical: T_h = Omega (D_z Z_H + D_z J[Z_H] J     + J D_z Z_H J)
Eigen::MatrixXd torsion_kernel_at(const HamiltonianSystem& sys, const Eigen::VectorXd& z,
                                  const std::vector<double>& phi);

// The same kernel sampled at the nodes of K's grid.
TorsionKernel torsion_kernel_Th(const TorusEmbedding& K, const HamiltonianSystem& sys,
                                const std::vector<int>& shape);

// Fills frame.T, avgT, avgT_inverse:
//   CaseII:              T = -1/2 Ntilde^T (T_h + T_h^T) Ntilde + Ntilde^T T_h^T N
//                            + N^T T_h Ntilde
//   CaseIII / Canonical: T = N^T T_h N
// Throws TwistDegeneracyError when cond(<T>) exceeds 1e12.
void torsion(AdaptedFrame& frame, const TorsionKernel& kernel, CaseTag tag,
             const std::vector<int>& shape);

// Independent torsion route through the Lie derivative of the normal frame:
//   T = N^T Omega(K) (D_z Z_H(K) N + L_{omega,alpha} N),
// equal to the kernel route up to a multiple of the invariance error.
MatrixSeries torsion_via_lie(const AdaptedFrame& frame, const TorusEmbedding& K,
                             const HamiltonianSystem& sys, const Frequencies& freq,
                             const std::vector<int>& shape);

}  // namespace kamtori
