#pragma once

// A-posteriori certificate machinery: measure the quantitative hypotheses on a
// candidate torus (global structure/field bounds over the phase-space box, torus-local
// norms with slack factors, Diophantine data), evaluate the explicit constants tables
// row by row, and check the KAM smallness condition
//
//     frakC1 * ||E||_rho / (gamma^4 rho^{4 tau}) < 1,
//
// which certifies a true invariant torus at distance frakC2 * ||E||_rho / (gamma^2
// rho^{2 tau}) from the candidate.  The sampled bounds are honest measurements, not
// interval enclosures: the report labels them "sampled, not rigorous".

#include <iosfwd>
#include <string>
#include <vector>

#include "kamtori/frame.hpp"
#include "kamtori/hamiltonian.hpp"

namespace kamtori {

// Everything the constants tables consume.  c_* are global bounds over the domain box
// (times the external torus for field quantities); sigma_* dominate the corresponding
// measured torus-local norms with strict slack; the measured values themselves are
// kept for the slack denominators of the convergence constants.
struct HypothesisMeasurements {
    int n = 1;
    int ell = 1;

    // Structure bounds: the form, the metric, and the compatible map J.
    double c_Om0 = 1.0, c_Om1 = 0.0;
    double c_G0 = 1.0, c_G1 = 0.0, c_G2 = 0.0;
    double c_J0 = 1.0, c_J1 = 0.0, c_J2 = 0.0;
    double c_JT0 = 1.0, c_JT1 = 0.0;
    double c_Jinv = 1.0, c_JinvT = 1.0;

    // Field bounds: the Hamiltonian vector field, its derivatives, and the torsion
    // kernel.
    double c_H1 = 0.0;
    double c_Z0 = 0.0, c_Z1 = 0.0, c_Z2 = 0.0, c_ZT1 = 0.0;
    double c_Th = 0.0, c_DTh = 0.0, c_ThT = 0.0, c_ThT1 = 0.0;

    // Torus-local bounds and the measured norms they dominate.
    double sigma_L = 0.0, sigma_LT = 0.0, sigma_B = 0.0, sigma_T = 0.0;
    double norm_DK = 0.0, norm_DKT = 0.0, norm_B = 0.0, norm_avgTinv = 0.0;

    // Distance from the analytically widened torus image to the box boundary.
    double domain_margin = 0.0;

    // Diophantine data and domain-loss bookkeeping.
    double gamma_eff = 0.0, tau = 0.0;
    double rho = 0.0, delta = 0.0, c_R = 0.0;

    std::vector<std::string> warnings;
};

struct MeasureOptions {
    double rho = 0.1;             // analyticity width claimed for the candidate
    double safety = 1.05;         // inflation on every sampled bound
    int initial_lattice = 8;      // nodes per axis of the first sampling lattice
    double refine_target = 0.01;  // double the lattice until bounds move less than this
    int max_refinements = 5;
    int diophantine_box = 50;     // |k|_1 radius of the effective-gamma scan
    double a1 = 2.0, a2 = 2.0;    // fix delta = rho / a3 for the certificate
};

// Samples the hypothesis bounds for the candidate K with its assembled frame.  Bounds
// over the box use lattice maximization with refinement until stable, then the safety
// inflation; constant canonical structures take their exact values.  Throws
// DomainViolationError when the widened torus has no positive margin, and
// ResonanceError through the Diophantine scan.
HypothesisMeasurements measure_hypotheses(const TorusEmbedding& K, const AdaptedFrame& frame,
                                          const HamiltonianSystem& sys,
                                          const Frequencies& freq,
                                          const MeasureOptions& opt = {});

struct ConstantRow {
    std::string name;
    double value = 0.0;
    std::string formula;  // audit string, frozen against the table manifest
};

struct ConstantsLedger {
    std::vector<ConstantRow> rows;

    bool has(const std::string& name) const;
    const ConstantRow& row(const std::string& name) const;  // throws Error when absent
    double value(const std::string& name) const;
};

// Evaluates every table row in dependency order.  The almost-complex cases (Canonical
// and CaseIII) apply the starred overrides: C_A, C_LieA, C_DeltaA vanish and C_N,
// C_NT, C_sym, C_T take their reduced forms.  delta and c_R come from the
// measurements; a1, a2 enter the convergence rows only.  Throws HypothesisSlackError
// naming the row when a slack denominator sigma - measured is not positive.
ConstantsLedger derived_constants(const HypothesisMeasurements& m, CaseTag tag,
                                  double a1 = 2.0, double a2 = 2.0);

struct CertificateReport {
    HypothesisMeasurements measurements;
    ConstantsLedger ledger;
    CaseTag tag = CaseTag::Canonical;
    double error_norm = 0.0;  // ||E||_rho, max component analytic norm
    double lhs = 0.0;         // frakC1 ||E||_rho / (gamma^4 rho^{4 tau})
    bool pass = false;        // strict: lhs < 1
    double closeness = 0.0;   // frakC2 ||E||_rho / (gamma^2 rho^{2 tau})
    std::string c1_branch;    // which branch of the frakC1 max binds
    double a1 = 2.0, a2 = 2.0;
    std::vector<std::string> warnings;
};

// Assembles the full report from a complete ledger: smallness condition at the
// measured gamma_eff, closeness bound, binding branch of frakC1, and warnings (gamma
// substitution, delta mismatch, the sigmaDKT reading).  a1, a2 must match the pair
// the ledger was derived with.
CertificateReport check_kam_condition(const HypothesisMeasurements& m,
                                      const ConstantsLedger& ledger, CaseTag tag,
                                      double error_norm_rho, double a1 = 2.0,
                                      double a2 = 2.0);

// ||E||_rho as the tables consume it: max over components of the analytic norm.
double error_analytic_norm(const MatrixSeries& E, double rho);

// Human-readable report and machine-readable key-value listing (one constant per
// line: name, value, formula-audit string).
void write_certificate_text(std::ostream& out, const CertificateReport& report);
void write_certificate_kv(std::ostream& out, const CertificateReport& report);

}  // namespace kamtori
