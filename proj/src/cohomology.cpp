#include "kamtori/cohomology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Divisors below this are treated as exact resonances in box scans.
constexpr double kResonanceCutoff = 1e-15;

// Divisors below this make a carried mode unsolvable in solve_cohomological.
constexpr double kSmallDivisorCutoff = 1e-14;

std::string index_to_string(const MultiIndex& k) {
    std::string s = "(";
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (j) s += ",";
        s += std::to_string(k[j]);
    }
    s += ")";
    return s;
}

}  // namespace

void validate(const Frequencies& freq, const TorusDims& dims) {
    validate(dims);
    if (static_cast<int>(freq.omega.size()) != dims.n)
        throw std::invalid_argument("frequency vector omega has " +
                                    std::to_string(freq.omega.size()) + " entries, expected " +
                                    std::to_string(dims.n));
    if (static_cast<int>(freq.alpha.size()) != dims.ell)
        throw std::invalid_argument("frequency vector alpha has " +
                                    std::to_string(freq.alpha.size()) + " entries, expected " +
                                    std::to_string(dims.ell));
    if (!(freq.gamma > 0.0))
        throw std::invalid_argument("Diophantine gamma must be positive");
    const double tau_floor = dims.n + dims.ell - 1;
    if (!(freq.tau >= tau_floor))
        throw std::invalid_argument("Diophantine tau must be >= n + ell - 1 = " +
                                    std::to_string(tau_floor));
}

double divisor(const Frequencies& freq, const MultiIndex& k) {
    double acc = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < freq.omega.size(); ++i, ++j) acc += k[j] * freq.omega[i];
    for (std::size_t i = 0; i < freq.alpha.size(); ++i, ++j) acc += k[j] * freq.alpha[i];
    return acc;
}

DiophantineReport check_diophantine(const Frequencies& freq, const TorusDims& dims,
                                    int box_radius) {
    validate(freq, dims);
    if (box_radius < 1) throw std::invalid_argument("Diophantine scan needs box_radius >= 1");
    const int d = dims.d();

    DiophantineReport report;
    report.box_radius = box_radius;
    report.effective_gamma = std::numeric_limits<double>::infinity();

    // Ascending lexicographic walk over the full cube |k_j| <= R, restricted to
    // |k|_1 <= R and to one representative per pair {k, -k}.  |k.(omega,alpha)| is
    // exactly even under k -> -k, so half the cube carries all the information.
    MultiIndex k(static_cast<std::size_t>(d), -box_radius);
    const auto advance = [&]() -> bool {
        for (int j = d - 1; j >= 0; --j) {
            if (k[static_cast<std::size_t>(j)] < box_radius) {
                ++k[static_cast<std::size_t>(j)];
                for (int l = j + 1; l < d; ++l) k[static_cast<std::size_t>(l)] = -box_radius;
                return true;
            }
        }
        return false;
    };
    do {
        if (!lex_positive(k)) continue;
        const int l1 = l1_norm(k);
        if (l1 > box_radius) continue;
        const double dk = std::abs(divisor(freq, k));
        if (dk < kResonanceCutoff)
            throw ResonanceError("exact resonance: |k.(omega,alpha)| = " + std::to_string(dk) +
                                     " at k = " + index_to_string(k),
                                 k);
        const double weighted = dk * std::pow(static_cast<double>(l1), freq.tau);
        if (weighted < report.effective_gamma) {
            report.effective_gamma = weighted;
            report.worst_index = k;
        }
    } while (advance());

    report.passes = report.effective_gamma >= freq.gamma;
    return report;
}

FourierSeries lie_derivative(const FourierSeries& u, const Frequencies& freq) {
    validate(freq, u.dims());
    FourierSeries out = u;
    for (std::size_t f = 0; f < out.flat_size(); ++f) {
        const MultiIndex k = out.unflatten(f);
        out.raw(f) *= std::complex<double>(0.0, -two_pi * divisor(freq, k));
    }
    return out;
}

FourierSeries solve_cohomological(const FourierSeries& v, const Frequencies& freq) {
    validate(freq, v.dims());
    FourierSeries u = FourierSeries::zeros(v.dims(), v.trunc());
    for (std::size_t f = 0; f < u.flat_size(); ++f) {
        const MultiIndex k = u.unflatten(f);
        if (std::all_of(k.begin(), k.end(), [](int kj) { return kj == 0; })) continue;
        const std::complex<double> vk = v.raw(f);
        const double dk = divisor(freq, k);
        if (std::abs(dk) < kSmallDivisorCutoff) {
            if (vk == std::complex<double>(0.0, 0.0)) continue;
            throw SmallDivisorError(
                "cohomological divisor |k.(omega,alpha)| = " + std::to_string(std::abs(dk)) +
                    " below cutoff at k = " + index_to_string(k),
                k);
        }
        // u_k = -v_k / (2*pi*i*dk) = i*v_k / (2*pi*dk)
        u.raw(f) = std::complex<double>(0.0, 1.0) * vk / (two_pi * dk);
    }
    return u;
}

double russmann_bound(const Frequencies& freq, double delta, const TorusDims& dims,
                      const std::vector<int>& trunc) {
    validate(freq, dims);
    if (!(delta > 0.0)) throw std::invalid_argument("russmann_bound needs delta > 0");
    if (static_cast<int>(trunc.size()) != dims.d())
        throw std::invalid_argument("truncation axis count does not match torus dimensions");

    const double gdt = freq.gamma * std::pow(delta, freq.tau);

    // Box part: exact divisors.
    double box_max = 0.0;
    FourierSeries walker = FourierSeries::zeros(dims, trunc);  // borrow its index walk
    for (std::size_t f = 0; f < walker.flat_size(); ++f) {
        const MultiIndex k = walker.unflatten(f);
        if (!lex_positive(k)) continue;  // factor is even in k -> -k
        const double dk = std::abs(divisor(freq, k));
        if (dk < kResonanceCutoff)
            throw ResonanceError("exact resonance inside the truncation box at k = " +
                                     index_to_string(k),
                                 k);
        const double factor =
            gdt * std::exp(-two_pi * l1_norm(k) * delta) / (two_pi * dk);
        box_max = std::max(box_max, factor);
    }

    // Tail part: modes with some |k_j| > N_j have |k|_1 >= 1 + min_j N_j; with the
    // Diophantine lower bound the per-mode factor is at most
    // g(s) = delta^tau * s^tau * exp(-2*pi*delta*s) / (2*pi), unimodal with peak at
    // s* = tau / (2*pi*delta).
    const double s_min = 1.0 + static_cast<double>(*std::min_element(trunc.begin(), trunc.end()));
    const double s_peak = freq.tau / (two_pi * delta);
    const double s_eval = std::max(s_min, s_peak);
    const double tail =
        std::pow(delta, freq.tau) * std::pow(s_eval, freq.tau) * std::exp(-two_pi * delta * s_eval) /
        two_pi;

    return std::max(box_max, tail);
}

}  // namespace kamtori
