#pragma once

// The constant-coefficient cohomological equation on the combined torus:
//
//     L u = v - <v>,   L = -( sum_i omega_i d/dtheta_i + sum_j alpha_j d/dphi_j ),
//
// solved mode by mode, u_k = -v_k / (2*pi*i * k.(omega,alpha)), together with the
// Diophantine machinery that controls the divisors: exhaustive box scans for the
// effective Diophantine constant and a computable Russmann-type bound
// ||u||_{rho-delta} <= c_R / (gamma * delta^tau) * ||v||_rho.

#include <vector>

#include "kamtori/fourier.hpp"

namespace kamtori {

// Frequency data: internal frequencies omega (length n), external alpha (length ell),
// and the Diophantine pair (gamma, tau) claimed for them.
struct Frequencies {
    std::vector<double> omega;
    std::vector<double> alpha;
    double gamma = 0.0;
    double tau = 0.0;
};
void validate(const Frequencies& freq, const TorusDims& dims);

// k.(omega,alpha), accumulated left to right over the concatenated frequency vector.
double divisor(const Frequencies& freq, const MultiIndex& k);

struct DiophantineReport {
    int box_radius = 0;
    // min over 0 < |k|_1 <= box_radius of |k.(omega,alpha)| * |k|_1^tau.
    double effective_gamma = 0.0;
    // Lexicographically positive representative of the minimizing pair {k, -k}.
    MultiIndex worst_index;
    // effective_gamma >= gamma claimed in freq.
    bool passes = false;
};

// Scans every index with 0 < |k|_1 <= box_radius (one representative per Hermitian
// pair, ascending lexicographic order).  Throws ResonanceError when some divisor drops
// below 1e-15 in magnitude.
DiophantineReport check_diophantine(const Frequencies& freq, const TorusDims& dims,
                                    int box_radius);

// L u in coefficient space; the result has exactly zero mean.
FourierSeries lie_derivative(const FourierSeries& u, const Frequencies& freq);

// Solves L u = v - <v> with <u> = 0.  A divisor below 1e-14 in magnitude raises
// SmallDivisorError if the corresponding v-coefficient is nonzero (a zero coefficient
// has the trivial solution and is skipped).
FourierSeries solve_cohomological(const FourierSeries& v, const Frequencies& freq);

// Computable constant c_R for the loss-of-domain bound of the solver: the per-mode
// factor gamma*delta^tau * e^{-2*pi*|k|_1*delta} / (2*pi*|k.(omega,alpha)|) is
// maximized with true divisors over the truncation box, and modes outside the box are
// covered by the Diophantine lower bound, giving the closed-form tail
// delta^tau * s^tau * e^{-2*pi*delta*s} / (2*pi) maximized over real s >= 1 + min_j N_j.
double russmann_bound(const Frequencies& freq, double delta, const TorusDims& dims,
                      const std::vector<int>& trunc);

}  // namespace kamtori
