#pragma once

// Shared helpers for the unit tests: seeded random series construction and a few
// comparison utilities.  Anything that acts as an independent oracle for a library
// computation lives in the test file that uses it, not here.

#include <complex>
#include <random>
#include <vector>

#include "kamtori/fourier.hpp"

namespace testutil {

// Random Hermitian series with geometrically decaying mode amplitudes.  Deterministic
// for a given seed.
inline kamtori::FourierSeries random_series(kamtori::TorusDims dims, std::vector<int> trunc,
                                            std::uint64_t seed, double amplitude = 1.0,
                                            double decay = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    kamtori::FourierSeries s(dims, trunc);
    for (std::size_t f = 0; f < s.flat_size(); ++f) {
        const kamtori::MultiIndex k = s.unflatten(f);
        const bool zero = kamtori::l1_norm(k) == 0;
        if (!zero && !kamtori::lex_positive(k)) continue;
        const double scale = amplitude * std::pow(decay, kamtori::l1_norm(k));
        std::complex<double> v(unit(rng) * scale, zero ? 0.0 : unit(rng) * scale);
        s.set_pair(k, v);
    }
    return s;
}

// Same but with zero mean, for cohomological right-hand sides.
inline kamtori::FourierSeries random_zero_mean_series(kamtori::TorusDims dims,
                                                      std::vector<int> trunc,
                                                      std::uint64_t seed,
                                                      double amplitude = 1.0,
                                                      double decay = 0.5) {
    kamtori::FourierSeries s = random_series(dims, std::move(trunc), seed, amplitude, decay);
    s.set_pair(kamtori::MultiIndex(s.axes(), 0), 0.0);
    return s;
}

}  // namespace testutil
