#include "kamtori/frame.hpp"

#include <string>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {

// Nodewise matrices beyond this condition number are treated as singular.
constexpr double kFrameConditionLimit = 1e12;
constexpr double kTwistConditionLimit = 1e12;

}  // namespace

MatrixGrid structure_on_torus(const MatrixGrid& Kg,
                              const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& f) {
    const int m = Kg.rows();
    MatrixGrid out(Kg.dims(), Kg.shape(), m, m);
    Eigen::VectorXd z(m);
    for (std::size_t node = 0; node < Kg.node_count(); ++node) {
        for (int i = 0; i < m; ++i) z(i) = Kg.at(node, i, 0);
        out.set_node_matrix(node, f(z));
    }
    return out;
}

std::vector<int> oversampled_shape(const std::vector<int>& trunc, int factor, int pad) {
    std::vector<int> shape(trunc.size());
    for (std::size_t j = 0; j < trunc.size(); ++j) shape[j] = factor * trunc[j] + pad;
    return shape;
}

MatrixSeries tangent_frame(const TorusEmbedding& K) {
    validate(K);
    const int m = K.phase_dim();
    MatrixSeries L(m, K.dims.n, K.dims, K.trunc());
    const MultiIndex zero(static_cast<std::size_t>(K.dims.d()), 0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < K.dims.n; ++j) {
            L.at(i, j) = derivative(K.comp[static_cast<std::size_t>(i)], j);
            const double w = K.winding[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (w != 0.0) L.at(i, j).set_pair(zero, L.at(i, j).coeff(zero).real() + w);
        }
    return L;
}

MatrixSeries reduced_form(const TorusEmbedding& K, const SymplecticStructure& s,
                          const std::vector<int>& shape) {
    const MatrixGrid Kg = embedding_grid(K, shape);
    const MatrixGrid Lg = grid_of(tangent_frame(K), shape);
    const MatrixGrid Om = structure_on_torus(Kg, s.Omega);
    return series_of(matmul(transpose(Lg), matmul(Om, Lg)), K.trunc());
}

AdaptedFrame build_frame(const TorusEmbedding& K, const SymplecticStructure& s,
                         const std::vector<int>& shape) {
    validate(K);
    if (s.n != K.dims.n)
        throw std::invalid_argument("structure and embedding disagree on n");
    const int n = K.dims.n;

    const MatrixGrid Kg = embedding_grid(K, shape);
    const MatrixSeries Ls = tangent_frame(K);
    const MatrixGrid Lg = grid_of(Ls, shape);
    const MatrixGrid LgT = transpose(Lg);

    const MatrixGrid Om = structure_on_torus(Kg, s.Omega);
    const MatrixGrid Gm = structure_on_torus(Kg, s.G);
    const MatrixGrid Jm = structure_on_torus(Kg, s.J);

    // Gram matrix of the tangent frame and its nodewise inverse.
    const MatrixGrid Gl = matmul(LgT, matmul(Gm, Lg));
    double worst_cond = 0.0;
    std::size_t worst_node = 0;
    MatrixGrid Bg = nodewise_inverse(Gl, &worst_cond, &worst_node);
    if (worst_cond > kFrameConditionLimit)
        throw DegenerateFrameError(
            "tangent frame is degenerate: cond(L^T G L) = " + std::to_string(worst_cond) +
                " at grid node " + std::to_string(worst_node),
            worst_node);
    // Symmetrize exactly: B is the inverse of a symmetric matrix.
    Bg = scale(add(Bg, transpose(Bg)), 0.5);

    const MatrixGrid N0g = matmul(Jm, Lg);
    const MatrixGrid Ntg = matmul(N0g, Bg);

    MatrixGrid Ag(K.dims, shape, n, n);
    if (s.tag == CaseTag::CaseII) {
        const MatrixGrid M = matmul(transpose(Ntg), matmul(Om, Ntg));
        // A = -1/2 M, antisymmetrized exactly (M is antisymmetric up to round-off).
        Ag = scale(subtract(M, transpose(M)), -0.25);
    }

    const MatrixGrid Ng = add(matmul(Lg, Ag), Ntg);

    MatrixGrid Pg(K.dims, shape, 2 * n, 2 * n);
    for (std::size_t node = 0; node < Pg.node_count(); ++node)
        for (int i = 0; i < 2 * n; ++i)
            for (int j = 0; j < n; ++j) {
                Pg.at(node, i, j) = Lg.at(node, i, j);
                Pg.at(node, i, n + j) = Ng.at(node, i, j);
            }

    const MatrixGrid OmLg = matmul(LgT, matmul(Om, Lg));

    AdaptedFrame frame;
    frame.L = Ls;
    double resid = 0.0, worst_resid = 0.0;
    frame.N0 = series_of(N0g, K.trunc(), &resid);
    worst_resid = std::max(worst_resid, resid);
    frame.B = series_of(Bg, K.trunc(), &resid);
    worst_resid = std::max(worst_resid, resid);
    frame.A = series_of(Ag, K.trunc(), &resid);
    worst_resid = std::max(worst_resid, resid);
    frame.Ntilde = series_of(Ntg, K.trunc(), &resid);
    worst_resid = std::max(worst_resid, resid);
    frame.N = series_of(Ng, K.trunc(), &resid);
    worst_resid = std::max(worst_resid, resid);
    frame.P = series_of(Pg, K.trunc(), &resid);
    worst_resid = std::max(worst_resid, resid);
    frame.OmegaL = series_of(OmLg, K.trunc(), &resid);
    worst_resid = std::max(worst_resid, resid);
    frame.frame_condition = worst_cond;
    frame.truncation_residual = worst_resid;
    return frame;
}

MatrixSeries symplectic_error(const AdaptedFrame& frame, const TorusEmbedding& K,
                              const SymplecticStructure& s, const std::vector<int>& shape) {
    const MatrixGrid Kg = embedding_grid(K, shape);
    const MatrixGrid Om = structure_on_torus(Kg, s.Omega);
    const MatrixGrid Pg = grid_of(frame.P, shape);
    MatrixGrid E = matmul(transpose(Pg), matmul(Om, Pg));
    const Eigen::MatrixXd omega0 = canonical_form(K.dims.n);
    for (std::size_t node = 0; node < E.node_count(); ++node)
        for (int i = 0; i < E.rows(); ++i)
            for (int j = 0; j < E.cols(); ++j) E.at(node, i, j) -= omega0(i, j);
    return series_of(E, K.trunc());
}

Eigen::MatrixXd torsion_kernel_at(const HamiltonianSystem& sys, const Eigen::VectorXd& z,
                                  const std::vector<double>& phi) {
    const Eigen::MatrixXd Om = sys.structure.Omega(z);
    const Eigen::MatrixXd DZ = sys.field_jacobian(z, phi);
    Eigen::MatrixXd inner;
    if (sys.structure.tag == CaseTag::CaseII) {
        const Eigen::MatrixXd Jm = sys.structure.J(z);
        const Eigen::MatrixXd Jinv = sys.structure.J_inv(z);
        inner = DZ - Jm * DZ * Jinv;
        if (!sys.structure.constant_coefficients) {
            const Eigen::VectorXd Zh = sys.field(z, phi);
            inner -= sys.structure.dJ(z, Zh) * Jinv;
        }
    } else {
        const Eigen::MatrixXd Jm = sys.structure.J(z);
        inner = DZ + Jm * DZ * Jm;
        if (!sys.structure.constant_coefficients) {
            const Eigen::VectorXd Zh = sys.field(z, phi);
            inner += sys.structure.dJ(z, Zh) * Jm;
        }
    }
    return Om * inner;
}

TorsionKernel torsion_kernel_Th(const TorusEmbedding& K, const HamiltonianSystem& sys,
                                const std::vector<int>& shape) {
    validate(K);
    const int m = K.phase_dim();
    const MatrixGrid Kg = embedding_grid(K, shape);
    TorsionKernel kernel;
    kernel.Th = MatrixGrid(K.dims, shape, m, m);

    Eigen::VectorXd z(m);
    for (std::size_t node = 0; node < Kg.node_count(); ++node) {
        for (int i = 0; i < m; ++i) z(i) = Kg.at(node, i, 0);
        const std::vector<double> x = Kg.node_angles(node);
        const std::vector<double> phi(x.begin() + K.dims.n, x.end());
        const Eigen::MatrixXd Th = torsion_kernel_at(sys, z, phi);
        kernel.Th.set_node_matrix(node, Th);
        kernel.symmetry_residual =
            std::max(kernel.symmetry_residual, (Th - Th.transpose()).cwiseAbs().maxCoeff());
    }
    return kernel;
}

void torsion(AdaptedFrame& frame, const TorsionKernel& kernel, CaseTag tag,
             const std::vector<int>& shape) {
    const MatrixGrid Ng = grid_of(frame.N, shape);
    MatrixGrid Tg;
    if (tag == CaseTag::CaseII) {
        const MatrixGrid Ntg = grid_of(frame.Ntilde, shape);
        const MatrixGrid NtgT = transpose(Ntg);
        const MatrixGrid ThT = transpose(kernel.Th);
        const MatrixGrid sym = add(kernel.Th, ThT);
        Tg = add(add(scale(matmul(NtgT, matmul(sym, Ntg)), -0.5),
                     matmul(NtgT, matmul(ThT, Ng))),
                 matmul(transpose(Ng), matmul(kernel.Th, Ntg)));
    } else {
        Tg = matmul(transpose(Ng), matmul(kernel.Th, Ng));
    }
    frame.T = series_of(Tg, frame.L.trunc());
    frame.avgT = average(frame.T);
    frame.torsion_condition = condition_number(frame.avgT);
    if (frame.torsion_condition > kTwistConditionLimit)
        throw TwistDegeneracyError("averaged torsion is numerically singular: cond(<T>) = " +
                                   std::to_string(frame.torsion_condition));
    frame.avgT_inverse = frame.avgT.inverse();
    const double defect =
        (frame.avgT * frame.avgT_inverse - Eigen::MatrixXd::Identity(frame.avgT.rows(),
                                                                     frame.avgT.cols()))
            .cwiseAbs()
            .maxCoeff();
    if (defect > 1e-10)
        throw TwistDegeneracyError("averaged torsion inverse fails its residual check: " +
                                   std::to_string(defect));
}

MatrixSeries torsion_via_lie(const AdaptedFrame& frame, const TorusEmbedding& K,
                             const HamiltonianSystem& sys, const Frequencies& freq,
                             const std::vector<int>& shape) {
    const MatrixGrid Kg = embedding_grid(K, shape);
    const MatrixGrid Om = structure_on_torus(Kg, sys.structure.Omega);
    const MatrixGrid Ng = grid_of(frame.N, shape);
    const MatrixGrid LieN = grid_of(lie_derivative(frame.N, freq), shape);

    const int m = K.phase_dim();
    MatrixGrid DZN(K.dims, shape, m, K.dims.n);
    Eigen::VectorXd z(m);
    for (std::size_t node = 0; node < Kg.node_count(); ++node) {
        for (int i = 0; i < m; ++i) z(i) = Kg.at(node, i, 0);
        const std::vector<double> x = Kg.node_angles(node);
        const std::vector<double> phi(x.begin() + K.dims.n, x.end());
        const Eigen::MatrixXd DZ = sys.field_jacobian(z, phi);
        DZN.set_node_matrix(node, DZ * Ng.node_matrix(node));
    }
    const MatrixGrid total = add(DZN, LieN);
    return series_of(matmul(transpose(Ng), matmul(Om, total)), K.trunc());
}

}  // namespace kamtori
