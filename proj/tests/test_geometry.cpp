#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "helpers.hpp"
#include "kamtori/errors.hpp"
#include "kamtori/frame.hpp"

using namespace kamtori;

namespace {

const double golden = (std::sqrt(5.0) - 1.0) / 2.0;

Frequencies golden_unit() {
    Frequencies f;
    f.omega = {golden};
    f.alpha = {1.0};
    f.gamma = 0.1;
    f.tau = 1.2;
    return f;
}

// The rotator torus K = (theta, omega) on the cylinder.
TorusEmbedding rotator_torus(double omega, std::vector<int> trunc) {
    TorusEmbedding K = zero_embedding(TorusDims{1, 1}, std::move(trunc), graph_winding(1));
    K.comp[1].set_pair({0, 0}, omega);
    return K;
}

// A graph-winding embedding with random periodic parts (not invariant under anything,
// but Lagrangian-average identities hold for it regardless).
TorusEmbedding random_embedding(std::uint64_t seed, double amplitude, double decay = 0.4,
                                std::vector<int> trunc = {6, 6}) {
    const TorusDims dims{1, 1};
    TorusEmbedding K = zero_embedding(dims, trunc, graph_winding(1));
    K.comp[0] = testutil::random_series(dims, trunc, seed, amplitude, decay);
    K.comp[1] = testutil::random_series(dims, trunc, seed + 1, amplitude, decay);
    K.comp[1].set_pair({0, 0}, 0.6);  // keep the momentum away from zero
    return K;
}

}  // namespace

TEST_CASE("canonical structure satisfies its invariants, broken ones are rejected") {
    SymplecticStructure s = canonical_structure(1);
    std::vector<Eigen::VectorXd> pts;
    for (double v : {0.0, 0.3, -1.2}) pts.push_back(Eigen::Vector2d(v, 1.0 - v));
    CHECK_NOTHROW(verify_structure(s, pts));

    SymplecticStructure broken = canonical_structure(1);
    broken.tag = CaseTag::CaseIII;
    broken.G = [](const Eigen::VectorXd&) {
        Eigen::MatrixXd g(2, 2);
        g << 1.0, 0.5, -0.5, 1.0;  // not symmetric
        return g;
    };
    CHECK_THROWS_AS(verify_structure(broken, pts), Error);
}

TEST_CASE("rotator frame reproduces the closed-form adapted frame") {
    const TorusEmbedding K = rotator_torus(golden, {4, 4});
    const AdaptedFrame frame = build_frame(K, canonical_structure(1), oversampled_shape({4, 4}));

    // L = (1, 0)^T, B = 1, Ntilde = N = (0, 1)^T, A = 0, P = I.
    const std::vector<double> x{0.3, 0.7};
    const Eigen::MatrixXd L = evaluate(frame.L, x);
    CHECK(L(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(L(1, 0)) < 1e-13);
    CHECK(evaluate(frame.B, x)(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    const Eigen::MatrixXd N = evaluate(frame.N, x);
    CHECK(std::abs(N(0, 0)) < 1e-13);
    CHECK(N(1, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(matrix_analytic_norm(frame.A, 0.0) < 1e-14);
    const Eigen::MatrixXd P = evaluate(frame.P, x);
    CHECK((P - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(frame.frame_condition < 1.0 + 1e-12);
}

TEST_CASE("reduced form averages to zero for graph-winding embeddings") {
    // <L^T Omega(K) L> = 0 is the exactness of the pulled-back form integrated over
    // the torus; it holds for arbitrary periodic parts, not just invariant tori.
    const SymplecticStructure s = canonical_structure(1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TorusEmbedding K = random_embedding(3000 + 17 * seed, 0.2);
        const MatrixSeries OmL = reduced_form(K, s, oversampled_shape(K.trunc()));
        CHECK(std::abs(average(OmL)(0, 0)) < 1e-10);
    }
}

TEST_CASE("frame identity L^T Omega N = Omega_L A - I") {
    // The identity holds pointwise for the exact frame functions; the published series
    // are truncations, so it only survives testing when the embedding is smooth enough
    // for the box to resolve every factor.  Hence the gentle decay here.
    const SymplecticStructure s = canonical_structure(1);
    const TorusEmbedding K = random_embedding(777, 0.03, 0.08, {8, 8});
    const std::vector<int> shape = oversampled_shape(K.trunc());
    AdaptedFrame frame = build_frame(K, s, shape);

    const MatrixGrid Lg = grid_of(frame.L, shape);
    const MatrixGrid Ng = grid_of(frame.N, shape);
    const MatrixGrid OmLg = grid_of(frame.OmegaL, shape);
    const MatrixGrid Ag = grid_of(frame.A, shape);
    const Eigen::MatrixXd Om = canonical_form(1);
    double worst = 0.0;
    for (std::size_t node = 0; node < Lg.node_count(); node += 11) {
        const Eigen::MatrixXd lhs =
            Lg.node_matrix(node).transpose() * Om * Ng.node_matrix(node);
        const Eigen::MatrixXd rhs = OmLg.node_matrix(node) * Ag.node_matrix(node) -
                                    Eigen::MatrixXd::Identity(1, 1);
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-7);
}

TEST_CASE("B is symmetric and A is antisymmetric by construction") {
    const TorusEmbedding K = random_embedding(4242, 0.2);
    AdaptedFrame frame = build_frame(K, canonical_structure(1), oversampled_shape(K.trunc()));
    // n = 1: symmetry is trivial for B, and A must be exactly zero.
    CHECK(matrix_analytic_norm(frame.A, 0.0) == 0.0);

    SymplecticStructure s2 = canonical_structure(1);
    s2.tag = CaseTag::CaseII;  // same matrices, general-case formulas
    AdaptedFrame f2 = build_frame(K, s2, oversampled_shape(K.trunc()));
    CHECK(matrix_analytic_norm(f2.A, 0.0) == 0.0);  // 1x1 antisymmetric
}

TEST_CASE("rotator torsion kernel and torsion match the hand computation") {
    // H = y^2/2: D_z Z_H = [[0,1],[0,0]] and T_h = [[-1,0],[0,1]]; with N = (0,1)^T
    // the torsion is T = N^T T_h N = 1.
    const TorusEmbedding K = rotator_torus(golden, {4, 4});
    const HamiltonianSystem sys = forced_pendulum(0.0, 1, golden - 0.5, golden + 0.5);
    const std::vector<int> shape = oversampled_shape({4, 4});

    const TorsionKernel kernel = torsion_kernel_Th(K, sys, shape);
    for (std::size_t node = 0; node < kernel.Th.node_count(); node += 13) {
        const Eigen::MatrixXd Th = kernel.Th.node_matrix(node);
        CHECK(Th(0, 0) == doctest::Approx(-1.0).epsilon(1e-13));
        CHECK(Th(1, 1) == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(std::abs(Th(0, 1)) < 1e-13);
        CHECK(std::abs(Th(1, 0)) < 1e-13);
    }
    CHECK(kernel.symmetry_residual < 1e-13);

    AdaptedFrame frame = build_frame(K, sys.structure, shape);
    torsion(frame, kernel, sys.structure.tag, shape);
    CHECK(std::abs(average(frame.T)(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(frame.avgT_inverse(0, 0) - 1.0) < 1e-12);
    CHECK(matrix_analytic_norm(frame.T, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("general-case torsion formula degenerates to the almost-complex one for n=1") {
    const TorusEmbedding K = random_embedding(99, 0.1);
    const HamiltonianSystem sys = forced_pendulum(0.02, 1, -2.0, 2.0);
    const std::vector<int> shape = oversampled_shape(K.trunc());
    const TorsionKernel kernel = torsion_kernel_Th(K, sys, shape);

    AdaptedFrame f3 = build_frame(K, sys.structure, shape);
    torsion(f3, kernel, CaseTag::CaseIII, shape);
    AdaptedFrame f2 = build_frame(K, sys.structure, shape);
    torsion(f2, kernel, CaseTag::CaseII, shape);
    for (std::size_t f = 0; f < f3.T.at(0, 0).flat_size(); ++f)
        CHECK(std::abs(f3.T.at(0, 0).raw(f) - f2.T.at(0, 0).raw(f)) < 1e-11);
}

TEST_CASE("torsion agrees with the Lie-derivative route on the exact rotator") {
    const TorusEmbedding K = rotator_torus(golden, {4, 4});
    const HamiltonianSystem sys = forced_pendulum(0.0, 1, golden - 0.5, golden + 0.5);
    const Frequencies freq = golden_unit();
    const std::vector<int> shape = oversampled_shape({4, 4});

    AdaptedFrame frame = build_frame(K, sys.structure, shape);
    torsion(frame, torsion_kernel_Th(K, sys, shape), sys.structure.tag, shape);
    const MatrixSeries lie = torsion_via_lie(frame, K, sys, freq, shape);
    const MatrixSeries diff = subtract(frame.T, lie);
    CHECK(matrix_grid_sup_norm(grid_of(diff, shape)) < 1e-12);
}

TEST_CASE("symplectic error vanishes on the exact rotator and has the block structure") {
    const TorusEmbedding K = rotator_torus(golden, {4, 4});
    const SymplecticStructure s = canonical_structure(1);
    const std::vector<int> shape = oversampled_shape({4, 4});
    AdaptedFrame frame = build_frame(K, s, shape);
    const MatrixSeries E = symplectic_error(frame, K, s, shape);
    CHECK(matrix_grid_sup_norm(grid_of(E, shape)) < 1e-12);
}

TEST_CASE("degenerate tangent frames are refused with the node named") {
    // Winding zero and tiny periodic parts: L^T G L is numerically singular.
    TorusEmbedding K = zero_embedding(TorusDims{1, 1}, {2, 2}, {{0}, {0}});
    K.comp[0].set_pair({1, 0}, {1e-9, 0.0});
    try {
        (void)build_frame(K, canonical_structure(1), oversampled_shape({2, 2}));
        FAIL("degenerate frame not detected");
    } catch (const DegenerateFrameError& e) {
        CHECK(std::string(e.what()).find("node") != std::string::npos);
    }
}

TEST_CASE("zero torsion kernel raises twist degeneracy") {
    const TorusEmbedding K = rotator_torus(golden, {2, 2});
    const std::vector<int> shape = oversampled_shape({2, 2});
    AdaptedFrame frame = build_frame(K, canonical_structure(1), shape);
    TorsionKernel zero;
    zero.Th = MatrixGrid(K.dims, shape, 2, 2);
    CHECK_THROWS_AS(torsion(frame, zero, CaseTag::Canonical, shape), TwistDegeneracyError);
}

TEST_CASE("matrix series transforms round trip and norms are row-sum style") {
    const TorusDims dims{1, 1};
    MatrixSeries M(2, 2, dims, {3, 3});
    M.at(0, 0) = testutil::random_series(dims, {3, 3}, 1);
    M.at(0, 1) = testutil::random_series(dims, {3, 3}, 2);
    M.at(1, 0) = testutil::random_series(dims, {3, 3}, 3);
    M.at(1, 1) = testutil::random_series(dims, {3, 3}, 4);
    const std::vector<int> shape{12, 12};
    const MatrixSeries back = series_of(grid_of(M, shape), {3, 3});
    for (std::size_t e = 0; e < M.entries.size(); ++e)
        for (std::size_t f = 0; f < M.entries[e].flat_size(); ++f)
            CHECK(std::abs(M.entries[e].raw(f) - back.entries[e].raw(f)) < 1e-12);

    const double n00 = analytic_norm(M.at(0, 0), 0.1) + analytic_norm(M.at(0, 1), 0.1);
    const double n10 = analytic_norm(M.at(1, 0), 0.1) + analytic_norm(M.at(1, 1), 0.1);
    CHECK(matrix_analytic_norm(M, 0.1) == doctest::Approx(std::max(n00, n10)));
}

TEST_CASE("embedding serialization round trips winding and coefficients") {
    namespace fs = std::filesystem;
    const TorusEmbedding K = random_embedding(321, 0.3);
    const fs::path dir = fs::temp_directory_path() / "kamtori_embed_test";
    fs::create_directories(dir);
    write_embedding(dir.string(), "K", K);
    const TorusEmbedding back = read_embedding((dir / "K.manifest").string());
    CHECK(back.winding == K.winding);
    for (int i = 0; i < 2; ++i)
        for (std::size_t f = 0; f < K.comp[i].flat_size(); ++f) {
            CHECK(back.comp[i].raw(f).real() == K.comp[i].raw(f).real());
            CHECK(back.comp[i].raw(f).imag() == K.comp[i].raw(f).imag());
        }
    fs::remove_all(dir);
}

TEST_CASE("embedding evaluation lifts the winding part") {
    const TorusEmbedding K = rotator_torus(0.25, {2, 2});
    // theta = 1.7 unreduced: x-component must read 1.7, not 0.7.
    const Eigen::VectorXd z = evaluate(K, {1.7, 0.4});
    CHECK(z(0) == doctest::Approx(1.7).epsilon(1e-14));
    CHECK(z(1) == doctest::Approx(0.25).epsilon(1e-14));
}
