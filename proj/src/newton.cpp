#include "kamtori/newton.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "kamtori/cohomology.hpp"
#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

// Truncated nodewise product of two matrix series.
MatrixSeries product(const MatrixSeries& a, const MatrixSeries& b,
                     const std::vector<int>& shape, const std::vector<int>& trunc) {
    return series_of(matmul(grid_of(a, shape), grid_of(b, shape)), trunc);
}

double sup_norm(const MatrixSeries& a, const std::vector<int>& shape) {
    return matrix_grid_sup_norm(grid_of(a, shape));
}

}  // namespace

AdaptedFrame assemble_frame(const TorusEmbedding& K, const HamiltonianSystem& sys,
                            const std::vector<int>& shape) {
    AdaptedFrame frame = build_frame(K, sys.structure, shape);
    const TorsionKernel kernel = torsion_kernel_Th(K, sys, shape);
    torsion(frame, kernel, sys.structure.tag, shape);
    return frame;
}

ProjectedError project_error(const AdaptedFrame& frame, const MatrixSeries& E,
                             const TorusEmbedding& K, const SymplecticStructure& s,
                             const std::vector<int>& shape) {
    const MatrixGrid Kg = embedding_grid(K, shape);
    const MatrixGrid Om = structure_on_torus(Kg, s.Omega);
    const MatrixGrid Eg = grid_of(E, shape);
    const MatrixGrid OmE = matmul(Om, Eg);
    const std::vector<int>& trunc = E.trunc();

    ProjectedError out;
    out.etaL = series_of(scale(matmul(transpose(grid_of(frame.N, shape)), OmE), -1.0), trunc);
    out.etaN = series_of(matmul(transpose(grid_of(frame.L, shape)), OmE), trunc);
    return out;
}

TriangularSolution solve_triangular(const MatrixSeries& T, const Eigen::MatrixXd& avgT_inverse,
                                    const MatrixSeries& etaL, const MatrixSeries& etaN,
                                    const Frequencies& freq, const std::vector<int>& shape,
                                    double consistency_tol) {
    const int n = etaL.rows;
    const std::vector<int>& trunc = etaL.trunc();
    const MultiIndex zero(trunc.size(), 0);

    TriangularSolution sol;
    sol.average_removed = average(etaN).cwiseAbs().maxCoeff();

    // R(eta_N): the derivative inversion drops the zero mode, which is exactly the
    // average subtraction the triangular system calls for.
    MatrixSeries RetaN(n, 1, etaN.entries[0].dims(), trunc);
    for (int i = 0; i < n; ++i) RetaN.at(i, 0) = solve_cohomological(etaN.at(i, 0), freq);

    const MatrixSeries T_RetaN = product(T, RetaN, shape, trunc);
    const Eigen::VectorXd c = average(subtract(etaL, T_RetaN)).col(0);
    sol.xiN00 = avgT_inverse * c;

    sol.xiN = RetaN;
    for (int i = 0; i < n; ++i) {
        const std::complex<double> cur = sol.xiN.at(i, 0).coeff(zero);
        sol.xiN.at(i, 0).set_pair(zero, cur.real() + sol.xiN00(i));
    }

    // The one truncated product T xi_N: it builds the right-hand side for xi_L and is
    // reused verbatim in the substitute-back check, so the residual measures solver
    // consistency rather than truncation of the product.
    const MatrixSeries TxiN = product(T, sol.xiN, shape, trunc);
    const MatrixSeries rhsL = subtract(etaL, TxiN);
    sol.xiL = MatrixSeries(n, 1, etaL.entries[0].dims(), trunc);
    for (int i = 0; i < n; ++i) sol.xiL.at(i, 0) = solve_cohomological(rhsL.at(i, 0), freq);

    const MatrixSeries residL = subtract(add(lie_derivative(sol.xiL, freq), TxiN), etaL);
    MatrixSeries residN = subtract(lie_derivative(sol.xiN, freq), etaN);
    const Eigen::MatrixXd etaN_avg = average(etaN);
    for (int i = 0; i < n; ++i) {
        const std::complex<double> cur = residN.at(i, 0).coeff(zero);
        residN.at(i, 0).set_pair(zero, cur.real() + etaN_avg(i, 0));
    }
    // Relative to the data size: the residual measures solver algebra, and roundoff
    // in it scales with the right-hand side (divergent runs pass eta of size 1e4+).
    const double scale =
        std::max({1.0, sup_norm(etaL, shape), sup_norm(etaN, shape)});
    sol.substitute_back =
        std::max(sup_norm(residL, shape), sup_norm(residN, shape)) / scale;
    if (sol.substitute_back > consistency_tol) {
        std::ostringstream msg;
        msg << "triangular solve substitute-back residual " << std::scientific
            << sol.substitute_back << " exceeds " << consistency_tol;
        throw SolverConsistencyError(msg.str());
    }
    return sol;
}

NewtonStep newton_step(const TorusEmbedding& K, const AdaptedFrame& frame,
                       const MatrixSeries& E, const SymplecticStructure& s,
                       const Frequencies& freq, const std::vector<int>& shape,
                       double consistency_tol) {
    const ProjectedError eta = project_error(frame, E, K, s, shape);
    NewtonStep step;
    step.solution = solve_triangular(frame.T, frame.avgT_inverse, eta.etaL, eta.etaN, freq,
                                     shape, consistency_tol);

    const MatrixGrid Lg = grid_of(frame.L, shape);
    const MatrixGrid Ng = grid_of(frame.N, shape);
    const MatrixGrid dKg = add(matmul(Lg, grid_of(step.solution.xiL, shape)),
                               matmul(Ng, grid_of(step.solution.xiN, shape)));
    const MatrixSeries dK = series_of(dKg, K.trunc());
    step.correction_sup = matrix_grid_sup_norm(dKg);
    step.K_next = K;
    add_correction(step.K_next, dK);
    return step;
}

bool detect_divergence(const std::vector<double>& errors) {
    const std::size_t m = errors.size();
    return m >= 3 && errors[m - 1] > errors[m - 2] && errors[m - 2] > errors[m - 3];
}

double fitted_order(const std::vector<double>& errors, int max_pairs, double saturation) {
    std::vector<double> xs, ys;
    for (std::size_t s = 0; s + 1 < errors.size(); ++s) {
        if (errors[s] <= saturation || errors[s + 1] <= saturation) continue;
        xs.push_back(std::log(errors[s]));
        ys.push_back(std::log(errors[s + 1]));
    }
    while (static_cast<int>(xs.size()) > max_pairs) {
        xs.erase(xs.begin());
        ys.erase(ys.begin());
    }
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double xbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xbar += xs[i];
        ybar += ys[i];
    }
    xbar /= static_cast<double>(xs.size());
    ybar /= static_cast<double>(xs.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - xbar) * (ys[i] - ybar);
        den += (xs[i] - xbar) * (xs[i] - xbar);
    }
    return num / den;
}

NewtonResult run_newton(const TorusEmbedding& K0, const HamiltonianSystem& sys,
                        const Frequencies& freq, const NewtonConfig& cfg) {
    validate(K0);
    validate(freq, K0.dims);
    const std::vector<int> shape =
        oversampled_shape(K0.trunc(), cfg.oversample_factor, cfg.oversample_pad);
    const double a3 = 3.0 * (cfg.a1 / (cfg.a1 - 1.0)) * (cfg.a2 / (cfg.a2 - 1.0));

    NewtonResult result;
    result.K = K0;
    double rho = cfg.rho0;
    const double delta0 = cfg.rho0 / a3;  // rho_s -> rho0 (1 - 3 delta0/rho0 sum a1^-s) = rho0/a2
    std::vector<double> errors;

    for (int step = 0; step <= cfg.max_iters; ++step) {
        const double delta = delta0 / std::pow(cfg.a1, step);
        const MatrixSeries E = invariance_error(result.K, sys, freq, shape);
        const double e_sup = sup_norm(E, shape);
        errors.push_back(e_sup);

        StepDiagnostics diag;
        diag.step = step;
        diag.error_sup = e_sup;
        diag.error_analytic = matrix_analytic_norm(E, rho);
        diag.rho = rho;
        diag.delta = delta;

        if (e_sup < cfg.stop_tol) {
            result.history.push_back(diag);
            result.converged = true;
            break;
        }
        if (!std::isfinite(e_sup))
            throw DivergenceError("invariance error is no longer finite", errors);
        if (detect_divergence(errors))
            throw DivergenceError(
                "invariance error increased in two consecutive steps (last " +
                    std::to_string(errors[errors.size() - 2]) + " -> " +
                    std::to_string(errors.back()) + ")",
                errors);
        if (step == cfg.max_iters) {
            result.history.push_back(diag);
            break;
        }

        const AdaptedFrame frame = assemble_frame(result.K, sys, shape);
        diag.frame_condition = frame.frame_condition;
        diag.torsion_condition = frame.torsion_condition;
        diag.avgT = frame.avgT;

        const NewtonStep ns = newton_step(result.K, frame, E, sys.structure, freq, shape,
                                          cfg.consistency_tol);
        diag.correction_sup = ns.correction_sup;
        diag.average_removed = ns.solution.average_removed;
        diag.substitute_back = ns.solution.substitute_back;
        result.history.push_back(diag);
        result.K = ns.K_next;
        rho -= 3.0 * delta;
    }

    result.final_error_sup = errors.back();
    result.quadratic_order = fitted_order(errors);
    return result;
}

}  // namespace kamtori
