#include "kamtori/symplectic.hpp"

#include <Eigen/Cholesky>
#include <string>

#include "kamtori/errors.hpp"

namespace kamtori {

namespace {
// Residual tolerance for the CaseIII structural identities.
constexpr double kStructureResidualLimit = 1e-10;
}

const char* to_string(CaseTag tag) {
    switch (tag) {
        case CaseTag::Canonical: return "canonical";
        case CaseTag::CaseIII: return "case-iii";
        case CaseTag::CaseII: return "case-ii";
    }
    return "?";
}

Eigen::MatrixXd canonical_form(int n) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    omega.topRightCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
    omega.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    return omega;
}

SymplecticStructure canonical_structure(int n) {
    if (n < 1) throw std::invalid_argument("canonical structure needs n >= 1");
    SymplecticStructure s;
    s.tag = CaseTag::Canonical;
    s.n = n;
    s.constant_coefficients = true;
    const Eigen::MatrixXd omega0 = canonical_form(n);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    const Eigen::MatrixXd omega0_inv = -omega0;  // Omega0^2 = -I
    s.Omega = [omega0](const Eigen::VectorXd&) { return omega0; };
    s.G = [eye](const Eigen::VectorXd&) { return eye; };
    s.J = [omega0](const Eigen::VectorXd&) { return omega0; };
    s.J_inv = [omega0_inv](const Eigen::VectorXd&) { return omega0_inv; };
    // (J^{-1})^T = (-Omega0)^T = Omega0
    s.J_inv_T = [omega0](const Eigen::VectorXd&) { return omega0; };
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    s.dOmega = [zero](const Eigen::VectorXd&, const Eigen::VectorXd&) { return zero; };
    s.dJ = [zero](const Eigen::VectorXd&, const Eigen::VectorXd&) { return zero; };
    return s;
}

void verify_structure(const SymplecticStructure& s,
                      const std::vector<Eigen::VectorXd>& sample_points) {
    const int m = 2 * s.n;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
    for (const auto& z : sample_points) {
        const Eigen::MatrixXd Om = s.Omega(z);
        const Eigen::MatrixXd Gm = s.G(z);
        const Eigen::MatrixXd Jm = s.J(z);
        if ((Om.transpose() + Om).cwiseAbs().maxCoeff() > kStructureResidualLimit)
            throw Error("symplectic structure: Omega is not antisymmetric at a sample point");
        if ((Gm.transpose() - Gm).cwiseAbs().maxCoeff() > kStructureResidualLimit)
            throw Error("symplectic structure: G is not symmetric at a sample point");
        Eigen::LLT<Eigen::MatrixXd> llt(Gm);
        if (llt.info() != Eigen::Success)
            throw Error("symplectic structure: G is not positive definite at a sample point");
        if ((Jm + Om.inverse() * Gm).cwiseAbs().maxCoeff() > kStructureResidualLimit)
            throw Error("symplectic structure: J != -Omega^{-1} G at a sample point");
        if (s.J_inv && (Jm * s.J_inv(z) - eye).cwiseAbs().maxCoeff() > kStructureResidualLimit)
            throw Error("symplectic structure: J_inv is not the inverse of J");
        if (s.J_inv_T &&
            (s.J_inv_T(z) - s.J_inv(z).transpose()).cwiseAbs().maxCoeff() >
                kStructureResidualLimit)
            throw Error("symplectic structure: J_inv_T is not the transpose of J_inv");
        if (s.tag == CaseTag::CaseIII || s.tag == CaseTag::Canonical) {
            if ((Jm * Jm + eye).cwiseAbs().maxCoeff() > kStructureResidualLimit)
                throw Error("symplectic structure: J^2 != -I in an almost-complex case");
            if ((Jm.transpose() * Om * Jm - Om).cwiseAbs().maxCoeff() > kStructureResidualLimit)
                throw Error("symplectic structure: Omega is not J-invariant");
            if ((Jm.transpose() * Gm * Jm - Gm).cwiseAbs().maxCoeff() > kStructureResidualLimit)
                throw Error("symplectic structure: G is not J-invariant");
        }
        if (s.tag == CaseTag::Canonical) {
            const Eigen::MatrixXd omega0 = canonical_form(s.n);
            if ((Om - omega0).cwiseAbs().maxCoeff() != 0.0 ||
                (Gm - eye).cwiseAbs().maxCoeff() != 0.0 ||
                (Jm - omega0).cwiseAbs().maxCoeff() != 0.0)
                throw Error("symplectic structure: canonical case must carry the exact "
                            "constant matrices");
        }
    }
}

}  // namespace kamtori
