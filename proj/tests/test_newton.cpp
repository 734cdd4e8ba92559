#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "kamtori/errors.hpp"
#include "kamtori/newton.hpp"

using namespace kamtori;

namespace {

const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
const double two_pi = 2.0 * std::numbers::pi;

Frequencies golden_unit() {
    Frequencies f;
    f.omega = {golden};
    f.alpha = {1.0};
    f.gamma = 0.1;
    f.tau = 1.2;
    return f;
}

TorusEmbedding rotator_torus(double omega, std::vector<int> trunc) {
    TorusEmbedding K = zero_embedding(TorusDims{1, 1}, std::move(trunc), graph_winding(1));
    K.comp[1].set_pair({0, 0}, omega);
    return K;
}

MatrixSeries constant_torsion(double value, const TorusDims& dims,
                              const std::vector<int>& trunc) {
    MatrixSeries T(1, 1, dims, trunc);
    T.at(0, 0).set_pair(MultiIndex(trunc.size(), 0), value);
    return T;
}

}  // namespace

TEST_CASE("triangular solve reproduces the closed-form solution for unit torsion") {
    // eta_L = 0, eta_N = cos(2 pi theta), T = 1, frequency (golden, 1):
    //   xi_N00 = 0, xi_N = -sin(2 pi theta)/(2 pi g), xi_L = cos(2 pi theta)/(2 pi g)^2.
    // The last value satisfies the solved relation: applying the derivative along the
    // flow to xi_L gives sin(2 pi theta)/(2 pi g) = eta_L - T xi_N.
    const TorusDims dims{1, 1};
    const std::vector<int> trunc{8, 8};
    const std::vector<int> shape = oversampled_shape(trunc);
    const Frequencies freq = golden_unit();

    MatrixSeries etaL(1, 1, dims, trunc);
    MatrixSeries etaN(1, 1, dims, trunc);
    etaN.at(0, 0).set_pair({1, 0}, {0.5, 0.0});  // cos(2 pi theta)

    const MatrixSeries T = constant_torsion(1.0, dims, trunc);
    const Eigen::MatrixXd Tinv = Eigen::MatrixXd::Identity(1, 1);
    const TriangularSolution sol = solve_triangular(T, Tinv, etaL, etaN, freq, shape, 1e-11);

    CHECK(std::abs(sol.xiN00(0)) < 1e-14);
    CHECK(sol.average_removed < 1e-15);
    CHECK(sol.substitute_back < 1e-13);
    for (double th : {0.0, 0.1, 0.37, 0.62, 0.85}) {
        const double xiN = evaluate(sol.xiN.at(0, 0), {th, 0.3});
        const double xiL = evaluate(sol.xiL.at(0, 0), {th, 0.3});
        CHECK(xiN == doctest::Approx(-std::sin(two_pi * th) / (two_pi * golden)).epsilon(1e-12));
        CHECK(xiL ==
              doctest::Approx(std::cos(two_pi * th) / ((two_pi * golden) * (two_pi * golden)))
                  .epsilon(1e-12));
    }
}

TEST_CASE("constant right-hand sides move only the torsion-averaged mode") {
    // eta_L = 0.3, eta_N = 0: xi_N = <T>^{-1} 0.3 and xi_L = R(0.3 - 0.3) = 0.
    const TorusDims dims{1, 1};
    const std::vector<int> trunc{4, 4};
    const std::vector<int> shape = oversampled_shape(trunc);
    MatrixSeries etaL(1, 1, dims, trunc);
    etaL.at(0, 0).set_pair(MultiIndex(2, 0), 0.3);
    MatrixSeries etaN(1, 1, dims, trunc);
    const MatrixSeries T = constant_torsion(1.0, dims, trunc);

    const TriangularSolution sol = solve_triangular(
        T, Eigen::MatrixXd::Identity(1, 1), etaL, etaN, golden_unit(), shape, 1e-11);
    CHECK(sol.xiN00(0) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(matrix_analytic_norm(sol.xiL, 0.0) < 1e-15);

    // A wrong torsion average leaves a constant the derivative cannot absorb.
    CHECK_THROWS_AS(solve_triangular(T, 0.5 * Eigen::MatrixXd::Identity(1, 1), etaL, etaN,
                                     golden_unit(), shape, 1e-11),
                    SolverConsistencyError);
}

TEST_CASE("error projection on the rotator frame matches the hand values") {
    // E = (0.1, 0) against L = (1,0), N = (0,1): eta_L = -0.1, eta_N = 0.
    const TorusEmbedding K = rotator_torus(golden, {4, 4});
    const HamiltonianSystem sys = forced_pendulum(0.0, 1, golden - 0.5, golden + 0.5);
    const std::vector<int> shape = oversampled_shape({4, 4});
    const AdaptedFrame frame = assemble_frame(K, sys, shape);

    MatrixSeries E(2, 1, K.dims, K.trunc());
    E.at(0, 0).set_pair(MultiIndex(2, 0), 0.1);
    const ProjectedError eta = project_error(frame, E, K, sys.structure, shape);
    CHECK(average(eta.etaL)(0, 0) == doctest::Approx(-0.1).epsilon(1e-13));
    CHECK(matrix_analytic_norm(eta.etaL, 0.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(matrix_analytic_norm(eta.etaN, 0.0) < 1e-13);
}

TEST_CASE("one step restores the rotator torus from a shifted momentum") {
    const Frequencies freq = golden_unit();
    const HamiltonianSystem sys = forced_pendulum(0.0, 1, golden - 0.5, golden + 0.5);
    const std::vector<int> shape = oversampled_shape({8, 8});
    TorusEmbedding K = rotator_torus(golden + 0.1, {8, 8});

    const AdaptedFrame frame = assemble_frame(K, sys, shape);
    const MatrixSeries E = invariance_error(K, sys, freq, shape);
    CHECK(matrix_grid_sup_norm(grid_of(E, shape)) == doctest::Approx(0.1).epsilon(1e-12));

    const NewtonStep step = newton_step(K, frame, E, sys.structure, freq, shape, 1e-11);
    CHECK(step.correction_sup == doctest::Approx(0.1).epsilon(1e-12));

    // The corrected torus is the exact rotator: momentum golden, angle untouched.
    const TorusEmbedding& K1 = step.K_next;
    CHECK(std::abs(average(MatrixSeries(tangent_frame(K1)))(0, 0) - 1.0) < 1e-12);
    for (double th : {0.2, 0.55}) {
        const Eigen::VectorXd z = evaluate(K1, {th, 0.4});
        CHECK(z(0) == doctest::Approx(th).epsilon(1e-12));
        CHECK(z(1) == doctest::Approx(golden).epsilon(1e-12));
    }
    const MatrixSeries E1 = invariance_error(K1, sys, freq, shape);
    CHECK(matrix_grid_sup_norm(grid_of(E1, shape)) < 1e-12);
}

TEST_CASE("the iteration contracts quadratically on the forced pendulum") {
    const Frequencies freq = golden_unit();
    const HamiltonianSystem sys = forced_pendulum(0.01, 1, golden - 1.0, golden + 1.0);
    NewtonConfig cfg;
    cfg.stop_tol = 1e-12;
    cfg.max_iters = 10;

    const NewtonResult r = run_newton(rotator_torus(golden, {16, 16}), sys, freq, cfg);
    CHECK(r.converged);
    CHECK(r.final_error_sup < 1e-12);
    CHECK(r.history.size() >= 3);
    // Strict decrease until saturation.
    for (std::size_t s = 0; s + 1 < r.history.size(); ++s)
        if (r.history[s].error_sup > 1e-13)
            CHECK(r.history[s + 1].error_sup < r.history[s].error_sup);
    // Every row that took a step carries frame diagnostics; the terminal row
    // records the arrival error only.
    for (std::size_t s = 0; s + 1 < r.history.size(); ++s) {
        CHECK(r.history[s].substitute_back < 1e-11);
        CHECK(r.history[s].frame_condition >= 1.0);
        CHECK(r.history[s].frame_condition < 10.0);
    }
    // The torsion average stays near the unforced value 1.
    CHECK(std::abs(r.history[r.history.size() - 2].avgT(0, 0) - 1.0) < 0.05);
    // Truncation and winding are never touched.
    CHECK(r.K.trunc() == std::vector<int>{16, 16});
    CHECK(r.K.winding == graph_winding(1));

    // Domain-loss bookkeeping: delta halves every step from rho0/a3 and rho
    // contracts by 3*delta, so the total loss can never exceed rho0/a2.
    const double delta0 = cfg.rho0 / 12.0;  // a1 = a2 = 2
    for (std::size_t s = 0; s < r.history.size(); ++s) {
        CHECK(r.history[s].delta ==
              doctest::Approx(delta0 / std::pow(2.0, double(s))).epsilon(1e-12));
        if (s + 1 < r.history.size())
            CHECK(r.history[s + 1].rho ==
                  doctest::Approx(r.history[s].rho - 3.0 * r.history[s].delta)
                      .epsilon(1e-12));
        CHECK(r.history[s].rho > cfg.rho0 / 2.0 - 1e-15);
    }
}

TEST_CASE("the iteration reports divergence beyond the breakdown threshold") {
    const Frequencies freq = golden_unit();
    NewtonConfig cfg;

    // Moderately supercritical forcing: the error history is deterministic and
    // grows after one decent first step.
    const HamiltonianSystem sys = forced_pendulum(0.12, 1, golden - 30.0, golden + 30.0);
    std::vector<double> history;
    try {
        run_newton(rotator_torus(golden, {24, 24}), sys, freq, cfg);
        FAIL("expected a divergence error");
    } catch (const DivergenceError& e) {
        history = e.error_history;
    }
    REQUIRE(history.size() == 3);
    CHECK(history[0] == doctest::Approx(0.12 * 4.0 * std::acos(-1.0)).epsilon(1e-10));
    CHECK(history[1] == doctest::Approx(3.714).epsilon(1e-2));
    CHECK(history[2] == doctest::Approx(2302.0).epsilon(1e-1));

    // Far beyond breakdown the iterates explode; the run still ends in the
    // divergence signal rather than a frame or domain failure.
    const HamiltonianSystem wild = forced_pendulum(5.0, 1, golden - 1e12, golden + 1e12);
    CHECK_THROWS_AS(run_newton(rotator_torus(golden, {8, 8}), wild, freq, cfg),
                    DivergenceError);
}

TEST_CASE("divergence detection fires on two consecutive increases only") {
    CHECK(!detect_divergence({}));
    CHECK(!detect_divergence({1.0}));
    CHECK(!detect_divergence({1.0, 2.0}));
    CHECK(!detect_divergence({1.0, 0.5, 0.7}));        // single increase
    CHECK(!detect_divergence({1.0, 2.0, 1.5, 1.7}));   // increases not consecutive
    CHECK(detect_divergence({0.5, 0.6, 0.7}));
    CHECK(detect_divergence({3.0, 0.5, 0.6, 0.7}));
}

TEST_CASE("fitted order recovers exact power-law contraction") {
    // e_{s+1} = e_s^2 exactly.
    CHECK(fitted_order({1e-1, 1e-2, 1e-4, 1e-8}) == doctest::Approx(2.0).epsilon(1e-12));
    // Cubic contraction.
    CHECK(fitted_order({1e-1, 1e-3, 1e-9}) == doctest::Approx(3.0).epsilon(1e-12));
    // Saturated pairs are dropped: the trailing roundoff plateau does not bias the fit.
    CHECK(fitted_order({1e-2, 1e-4, 1e-8, 3e-14, 2e-14}) ==
          doctest::Approx(2.0).epsilon(1e-12));
    // Only the final pairs count.
    CHECK(fitted_order({1e-1, 1e-2, 1e-4, 1e-8}, 2) == doctest::Approx(2.0).epsilon(1e-12));
    // Too few clean pairs: no estimate.
    CHECK(std::isnan(fitted_order({1e-1, 1e-2})));
    CHECK(std::isnan(fitted_order({1e-14, 1e-14, 1e-14})));
}
