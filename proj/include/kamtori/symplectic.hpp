#pragma once

// Symplectic phase-space geometry: the form Omega, a metric G, and the compatible
// linear map J = -Omega^{-1} G, evaluated pointwise on phase space.  Three regimes
// are distinguished by how much structure J carries:
//   Canonical -- constant Omega0, G = I, J = Omega0;
//   CaseIII   -- J is an almost-complex structure (J^2 = -I) compatible with Omega;
//   CaseII    -- general compatible triple, no J^2 = -I.

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace kamtori {

enum class CaseTag { Canonical, CaseIII, CaseII };

const char* to_string(CaseTag tag);

// Pointwise evaluators of the structure over phase space R^{2n}.  dOmega/dJ are
// directional derivatives z -> D_z(.)[v]; for constant structures they are exact
// zeros and consumers skip them entirely.
struct SymplecticStructure {
    CaseTag tag = CaseTag::Canonical;
    int n = 1;
    bool constant_coefficients = true;

    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> Omega;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> G;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> J;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> J_inv;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> J_inv_T;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> dOmega;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> dJ;
};

// The constant canonical pair: Omega0 = [[0, -I], [I, 0]], G = I, J = Omega0.
Eigen::MatrixXd canonical_form(int n);
SymplecticStructure canonical_structure(int n);

// Checks the structural identities at the given sample points and throws Error with
// the failed identity named:
//   Omega^T = -Omega, G symmetric positive definite, J = -Omega^{-1} G (all cases);
//   J^2 = -I, Omega = J^T Omega J, G = J^T G J to 1e-10 (CaseIII and Canonical);
//   exact canonical matrices (Canonical).
void verify_structure(const SymplecticStructure& s,
                      const std::vector<Eigen::VectorXd>& sample_points);

}  // namespace kamtori
