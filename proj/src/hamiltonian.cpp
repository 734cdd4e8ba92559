#include "kamtori/hamiltonian.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "kamtori/errors.hpp"
#include "kamtori/parallel.hpp"

namespace kamtori {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

double DomainBox::margin(const Eigen::VectorXd& z) const {
    if (static_cast<int>(axes.size()) != z.size())
        throw std::invalid_argument("domain box axis count does not match the point");
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (axes[i].periodic) continue;
        const double zi = z(static_cast<Eigen::Index>(i));
        m = std::min(m, std::min(zi - axes[i].lo, axes[i].hi - zi));
    }
    return m;
}

HamiltonianSystem forced_pendulum(double eps, int ell, double y_lo, double y_hi) {
    if (ell < 1) throw std::invalid_argument("forced pendulum needs ell >= 1");
    if (!(y_lo < y_hi)) throw std::invalid_argument("forced pendulum needs y_lo < y_hi");
    HamiltonianSystem sys;
    sys.dims = TorusDims{1, ell};
    sys.structure = canonical_structure(1);
    sys.box.axes.resize(2);
    sys.box.axes[0].periodic = true;  // x is an angle
    sys.box.axes[1] = {false, y_lo, y_hi};

    const auto forcing = [](const std::vector<double>& phi) {
        double s = 1.0;
        for (double p : phi) s += std::cos(two_pi * p);
        return s;
    };

    sys.H = [eps, forcing](const Eigen::VectorXd& z, const std::vector<double>& phi) {
        return 0.5 * z(1) * z(1) + eps * std::cos(two_pi * z(0)) * forcing(phi);
    };
    sys.grad_H = [eps, forcing](const Eigen::VectorXd& z, const std::vector<double>& phi) {
        Eigen::VectorXd g(2);
        g(0) = -eps * two_pi * std::sin(two_pi * z(0)) * forcing(phi);
        g(1) = z(1);
        return g;
    };
    // Z_H = (dH/dy, -dH/dx)
    sys.field = [eps, forcing](const Eigen::VectorXd& z, const std::vector<double>& phi) {
        Eigen::VectorXd f(2);
        f(0) = z(1);
        f(1) = eps * two_pi * std::sin(two_pi * z(0)) * forcing(phi);
        return f;
    };
    sys.field_jacobian = [eps, forcing](const Eigen::VectorXd& z,
                                        const std::vector<double>& phi) {
        Eigen::MatrixXd m(2, 2);
        m << 0.0, 1.0, eps * two_pi * two_pi * std::cos(two_pi * z(0)) * forcing(phi), 0.0;
        return m;
    };
    sys.field_hessians = [eps, forcing](const Eigen::VectorXd& z,
                                        const std::vector<double>& phi) {
        std::vector<Eigen::MatrixXd> h(2, Eigen::MatrixXd::Zero(2, 2));
        h[1](0, 0) = -eps * two_pi * two_pi * two_pi * std::sin(two_pi * z(0)) * forcing(phi);
        return h;
    };
    return sys;
}

namespace {

// External angles of a grid node: the last ell coordinates.
std::vector<double> external_angles(const std::vector<double>& x, int n, int ell) {
    return std::vector<double>(x.begin() + n, x.begin() + n + ell);
}

}  // namespace

MatrixGrid field_on_torus(const TorusEmbedding& K, const HamiltonianSystem& sys,
                          const std::vector<int>& shape) {
    if (!(K.dims == sys.dims))
        throw std::invalid_argument("embedding and system torus dimensions differ");
    const MatrixGrid Kg = embedding_grid(K, shape);
    const int m = K.phase_dim();
    MatrixGrid out(K.dims, shape, m, 1);
    for (std::size_t node = 0; node < Kg.node_count(); ++node) {
        Eigen::VectorXd z(m);
        for (int i = 0; i < m; ++i) z(i) = Kg.at(node, i, 0);
        if (!(sys.box.margin(z) > 0.0))
            throw DomainViolationError(
                "embedding leaves the phase-space domain box at grid node " +
                    std::to_string(node),
                node);
        const std::vector<double> phi =
            external_angles(Kg.node_angles(node), sys.dims.n, sys.dims.ell);
        const Eigen::VectorXd f = sys.field(z, phi);
        for (int i = 0; i < m; ++i) out.at(node, i, 0) = f(i);
    }
    return out;
}

MatrixSeries invariance_error(const TorusEmbedding& K, const HamiltonianSystem& sys,
                              const Frequencies& freq, const std::vector<int>& shape,
                              double* truncation_residual) {
    validate(freq, K.dims);
    const MatrixGrid field = field_on_torus(K, sys, shape);
    MatrixSeries E = series_of(field, K.trunc(), truncation_residual);
    // L_{omega,alpha} K: the periodic part is spectral, the winding part contributes
    // the constant -(W omega).
    for (int i = 0; i < K.phase_dim(); ++i) {
        E.at(i, 0) += lie_derivative(K.comp[static_cast<std::size_t>(i)], freq);
        double w_dot_omega = 0.0;
        for (int j = 0; j < K.dims.n; ++j)
            w_dot_omega += K.winding[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                           freq.omega[static_cast<std::size_t>(j)];
        const MultiIndex zero(static_cast<std::size_t>(K.dims.d()), 0);
        E.at(i, 0).set_pair(zero, E.at(i, 0).coeff(zero).real() - w_dot_omega);
    }
    return E;
}

FlowValidationResult flow_validate(const TorusEmbedding& K, const HamiltonianSystem& sys,
                                   const Frequencies& freq, double t_final, int samples,
                                   int checkpoints, double rk_tol) {
    validate(freq, K.dims);
    if (samples < 1 || checkpoints < 1)
        throw std::invalid_argument("flow validation needs samples >= 1 and checkpoints >= 1");
    if (!(t_final > 0.0)) throw std::invalid_argument("flow validation needs t_final > 0");

    namespace odeint = boost::numeric::odeint;
    using State = std::vector<double>;

    const int n = K.dims.n;
    const int ell = K.dims.ell;
    const int m = K.phase_dim();

    FlowValidationResult result;
    result.t_final = t_final;
    result.checkpoints = checkpoints;
    result.rows.resize(static_cast<std::size_t>(samples));

    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            // Start angles spread along the diagonal of the combined torus.
            std::vector<double> start(static_cast<std::size_t>(n + ell));
            for (std::size_t j = 0; j < start.size(); ++j)
                start[j] = std::fmod(static_cast<double>(s) / samples + 0.1 * (double)j, 1.0);

            State z0(static_cast<std::size_t>(m));
            {
                const Eigen::VectorXd z = evaluate(K, start);
                for (int i = 0; i < m; ++i) z0[static_cast<std::size_t>(i)] = z(i);
            }

            const auto rhs = [&](const State& z, State& dz, double t) {
                Eigen::VectorXd zv(m);
                for (int i = 0; i < m; ++i) zv(i) = z[static_cast<std::size_t>(i)];
                std::vector<double> phi(static_cast<std::size_t>(ell));
                for (int j = 0; j < ell; ++j)
                    phi[static_cast<std::size_t>(j)] =
                        start[static_cast<std::size_t>(n + j)] +
                        t * freq.alpha[static_cast<std::size_t>(j)];
                const Eigen::VectorXd f = sys.field(zv, phi);
                for (int i = 0; i < m; ++i) dz[static_cast<std::size_t>(i)] = f(i);
            };

            std::vector<double> times(static_cast<std::size_t>(checkpoints));
            for (int c = 1; c <= checkpoints; ++c)
                times[static_cast<std::size_t>(c - 1)] = t_final * c / checkpoints;

            double worst = 0.0;
            State z = z0;
            double t_prev = 0.0;
            auto stepper = odeint::make_controlled(
                rk_tol, rk_tol, odeint::runge_kutta_dopri5<State>());
            for (double tc : times) {
                odeint::integrate_adaptive(stepper, rhs, z, t_prev, tc,
                                           std::min(1e-3, tc - t_prev));
                t_prev = tc;
                // Rotated embedding in lifted coordinates: theta unreduced so the
                // winding part tracks the trajectory's own winding.
                std::vector<double> angles(start);
                for (int j = 0; j < n; ++j)
                    angles[static_cast<std::size_t>(j)] +=
                        tc * freq.omega[static_cast<std::size_t>(j)];
                for (int j = 0; j < ell; ++j)
                    angles[static_cast<std::size_t>(n + j)] +=
                        tc * freq.alpha[static_cast<std::size_t>(j)];
                const Eigen::VectorXd want = evaluate(K, angles);
                for (int i = 0; i < m; ++i)
                    worst = std::max(worst,
                                     std::abs(z[static_cast<std::size_t>(i)] - want(i)));
            }
            result.rows[s].start_angles = start;
            result.rows[s].max_deviation = worst;
        }
    });

    for (const auto& row : result.rows)
        result.max_deviation = std::max(result.max_deviation, row.max_deviation);
    return result;
}

}  // namespace kamtori
