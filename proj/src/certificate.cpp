#include "kamtori/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "kamtori/errors.hpp"
#include "kamtori/parallel.hpp"

namespace kamtori {

namespace {

// Central-difference step for derivative bounds with no exact callable.  The sampled
// bounds carry a safety inflation, so plain O(h^2) stencils at a mid-size step are
// accurate enough (truncation ~1e-8 absolute on smooth data).
constexpr double kFdStep = 1e-4;

double a3_of(double a1, double a2) {
    return 3.0 * (a1 / (a1 - 1.0)) * (a2 / (a2 - 1.0));
}

std::vector<double> axis_samples(const DomainBox::Axis& ax, int m) {
    std::vector<double> xs(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        if (ax.periodic) {
            xs[static_cast<std::size_t>(i)] = static_cast<double>(i) / m;
        } else if (m == 1) {
            xs[0] = 0.5 * (ax.lo + ax.hi);
        } else {
            // Endpoints included: boundary maxima must not be missed.
            xs[static_cast<std::size_t>(i)] = ax.lo + (ax.hi - ax.lo) * i / (m - 1);
        }
    }
    return xs;
}

// Sampling axes for the combined lattice: phase-space coordinates first, then the
// ell external angles on [0,1).
std::vector<std::vector<double>> lattice_axes(const DomainBox& box, int ell, int m) {
    std::vector<std::vector<double>> axes;
    axes.reserve(box.axes.size() + static_cast<std::size_t>(ell));
    for (const auto& ax : box.axes) axes.push_back(axis_samples(ax, m));
    for (int j = 0; j < ell; ++j) {
        std::vector<double> phi(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) phi[static_cast<std::size_t>(i)] = static_cast<double>(i) / m;
        axes.push_back(std::move(phi));
    }
    return axes;
}

std::size_t lattice_size(const std::vector<std::vector<double>>& axes) {
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();
    return total;
}

// Decodes a flat lattice index (last axis fastest) into coordinates.
void decode_point(const std::vector<std::vector<double>>& axes, std::size_t flat,
                  std::vector<double>& x) {
    for (std::size_t i = axes.size(); i-- > 0;) {
        const std::size_t size = axes[i].size();
        x[i] = axes[i][flat % size];
        flat /= size;
    }
}

struct StructureBounds {
    double om0 = 0, om1 = 0;
    double g0 = 0, g1 = 0, g2 = 0;
    double j0 = 0, j1 = 0, j2 = 0;
    double jt0 = 0, jt1 = 0;
    double jinv = 0, jinvT = 0;

    std::vector<double> pack() const {
        return {om0, om1, g0, g1, g2, j0, j1, j2, jt0, jt1, jinv, jinvT};
    }
};

struct FieldBounds {
    double h1 = 0;
    double z0 = 0, z1 = 0, z2 = 0, zt1 = 0;
    double th = 0, tht = 0, dth = 0, tht1 = 0;

    void merge(const FieldBounds& o) {
        h1 = std::max(h1, o.h1);
        z0 = std::max(z0, o.z0);
        z1 = std::max(z1, o.z1);
        z2 = std::max(z2, o.z2);
        zt1 = std::max(zt1, o.zt1);
        th = std::max(th, o.th);
        tht = std::max(tht, o.tht);
        dth = std::max(dth, o.dth);
        tht1 = std::max(tht1, o.tht1);
    }

    std::vector<double> pack() const { return {h1, z0, z1, z2, zt1, th, tht, dth, tht1}; }
};

// Sum over directions of the derivative's row-sum norm: an upper bound for the
// operator norm of v -> D(.)[v] on the sup unit ball.
double direction_sum_derivative(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& map,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& dmap,
    const Eigen::VectorXd& z) {
    double total = 0.0;
    for (int j = 0; j < z.size(); ++j) {
        Eigen::MatrixXd dj;
        if (dmap) {
            Eigen::VectorXd ej = Eigen::VectorXd::Zero(z.size());
            ej[j] = 1.0;
            dj = dmap(z, ej);
        } else {
            Eigen::VectorXd zp = z, zm = z;
            zp[j] += kFdStep;
            zm[j] -= kFdStep;
            dj = (map(zp) - map(zm)) / (2.0 * kFdStep);
        }
        total += infinity_norm(dj);
    }
    return total;
}

// Sum over ordered direction pairs of the mixed second partial's norm, all by central
// differences: bounds the bilinear map (v, w) -> D^2(.)[v, w].
double direction_sum_second_derivative(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& map, const Eigen::VectorXd& z) {
    const double h = kFdStep;
    double total = 0.0;
    for (int j = 0; j < z.size(); ++j) {
        for (int k = 0; k < z.size(); ++k) {
            Eigen::MatrixXd d2;
            if (j == k) {
                Eigen::VectorXd zp = z, zm = z;
                zp[j] += h;
                zm[j] -= h;
                d2 = (map(zp) - 2.0 * map(z) + map(zm)) / (h * h);
            } else {
                Eigen::VectorXd zpp = z, zpm = z, zmp = z, zmm = z;
                zpp[j] += h;
                zpp[k] += h;
                zpm[j] += h;
                zpm[k] -= h;
                zmp[j] -= h;
                zmp[k] += h;
                zmm[j] -= h;
                zmm[k] -= h;
                d2 = (map(zpp) - map(zpm) - map(zmp) + map(zmm)) / (4.0 * h * h);
            }
            total += infinity_norm(d2);
        }
    }
    return total;
}

StructureBounds sample_structure_bounds(const SymplecticStructure& s, const DomainBox& box,
                                        int m) {
    StructureBounds b;
    std::vector<std::vector<double>> axes;
    axes.reserve(box.axes.size());
    for (const auto& ax : box.axes) axes.push_back(axis_samples(ax, m));
    const std::size_t total = lattice_size(axes);
    std::vector<double> x(axes.size(), 0.0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        decode_point(axes, flat, x);
        const Eigen::VectorXd z =
            Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
        b.om0 = std::max(b.om0, infinity_norm(s.Omega(z)));
        b.g0 = std::max(b.g0, infinity_norm(s.G(z)));
        const Eigen::MatrixXd Jm = s.J(z);
        b.j0 = std::max(b.j0, infinity_norm(Jm));
        b.jt0 = std::max(b.jt0, infinity_norm(Jm.transpose()));
        b.jinv = std::max(b.jinv, infinity_norm(s.J_inv(z)));
        b.jinvT = std::max(b.jinvT, infinity_norm(s.J_inv_T(z)));
        b.om1 = std::max(b.om1, direction_sum_derivative(s.Omega, s.dOmega, z));
        b.g1 = std::max(b.g1, direction_sum_derivative(s.G, nullptr, z));
        b.j1 = std::max(b.j1, direction_sum_derivative(s.J, s.dJ, z));
        // Transposed first derivative: same stencils, transposed before the norm.
        double jt1 = 0.0;
        for (int j = 0; j < z.size(); ++j) {
            Eigen::MatrixXd dj;
            if (s.dJ) {
                Eigen::VectorXd ej = Eigen::VectorXd::Zero(z.size());
                ej[j] = 1.0;
                dj = s.dJ(z, ej);
            } else {
                Eigen::VectorXd zp = z, zm = z;
                zp[j] += kFdStep;
                zm[j] -= kFdStep;
                dj = (s.J(zp) - s.J(zm)) / (2.0 * kFdStep);
            }
            jt1 += infinity_norm(dj.transpose());
        }
        b.jt1 = std::max(b.jt1, jt1);
        b.g2 = std::max(b.g2, direction_sum_second_derivative(s.G, z));
        b.j2 = std::max(b.j2, direction_sum_second_derivative(s.J, z));
    }
    return b;
}

FieldBounds sample_field_bounds(const HamiltonianSystem& sys, int m) {
    const auto axes = lattice_axes(sys.box, sys.dims.ell, m);
    const std::size_t total = lattice_size(axes);
    const std::size_t zdim = sys.box.axes.size();

    FieldBounds global;
    std::mutex merge_mutex;
    parallel_for(total, [&](std::size_t begin, std::size_t end) {
        FieldBounds local;
        std::vector<double> x(axes.size(), 0.0);
        std::vector<double> phi(axes.size() - zdim, 0.0);
        for (std::size_t flat = begin; flat < end; ++flat) {
            decode_point(axes, flat, x);
            const Eigen::VectorXd z =
                Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(zdim));
            std::copy(x.begin() + static_cast<std::ptrdiff_t>(zdim), x.end(), phi.begin());

            local.h1 = std::max(local.h1, sys.grad_H(z, phi).cwiseAbs().sum());
            local.z0 = std::max(local.z0, sys.field(z, phi).cwiseAbs().maxCoeff());
            const Eigen::MatrixXd DZ = sys.field_jacobian(z, phi);
            local.z1 = std::max(local.z1, infinity_norm(DZ));
            local.zt1 = std::max(local.zt1, infinity_norm(DZ.transpose()));
            const std::vector<Eigen::MatrixXd> hess = sys.field_hessians(z, phi);
            double z2 = 0.0;
            for (const auto& hi : hess) z2 = std::max(z2, hi.cwiseAbs().sum());
            local.z2 = std::max(local.z2, z2);

            const Eigen::MatrixXd Th = torsion_kernel_at(sys, z, phi);
            local.th = std::max(local.th, infinity_norm(Th));
            local.tht = std::max(local.tht, infinity_norm(Th.transpose()));
            double dth = 0.0, dtht = 0.0;
            for (std::size_t j = 0; j < zdim; ++j) {
                Eigen::VectorXd zp = z, zm = z;
                zp[static_cast<Eigen::Index>(j)] += kFdStep;
                zm[static_cast<Eigen::Index>(j)] -= kFdStep;
                const Eigen::MatrixXd dj =
                    (torsion_kernel_at(sys, zp, phi) - torsion_kernel_at(sys, zm, phi)) /
                    (2.0 * kFdStep);
                dth += infinity_norm(dj);
                dtht += infinity_norm(dj.transpose());
            }
            local.dth = std::max(local.dth, dth);
            local.tht1 = std::max(local.tht1, dtht);
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        global.merge(local);
    });
    return global;
}

// Largest relative movement between two packed bound vectors; tiny bounds compare
// against an absolute floor so finite-difference noise does not stall refinement.
double packed_movement(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double floor_ = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
        worst = std::max(worst, std::abs(a[i] - b[i]) / floor_);
    }
    return worst;
}

template <typename F>
void visit_measurements(const HypothesisMeasurements& m, F&& f) {
    f("c_Om0", m.c_Om0);
    f("c_Om1", m.c_Om1);
    f("c_G0", m.c_G0);
    f("c_G1", m.c_G1);
    f("c_G2", m.c_G2);
    f("c_J0", m.c_J0);
    f("c_J1", m.c_J1);
    f("c_J2", m.c_J2);
    f("c_JT0", m.c_JT0);
    f("c_JT1", m.c_JT1);
    f("c_Jinv", m.c_Jinv);
    f("c_JinvT", m.c_JinvT);
    f("c_H1", m.c_H1);
    f("c_Z0", m.c_Z0);
    f("c_Z1", m.c_Z1);
    f("c_Z2", m.c_Z2);
    f("c_ZT1", m.c_ZT1);
    f("c_Th", m.c_Th);
    f("c_DTh", m.c_DTh);
    f("c_ThT", m.c_ThT);
    f("c_ThT1", m.c_ThT1);
    f("sigma_L", m.sigma_L);
    f("sigma_LT", m.sigma_LT);
    f("sigma_B", m.sigma_B);
    f("sigma_T", m.sigma_T);
    f("norm_DK", m.norm_DK);
    f("norm_DKT", m.norm_DKT);
    f("norm_B", m.norm_B);
    f("norm_avgTinv", m.norm_avgTinv);
    f("domain_margin", m.domain_margin);
    f("gamma_eff", m.gamma_eff);
    f("tau", m.tau);
    f("rho", m.rho);
    f("delta", m.delta);
    f("c_R", m.c_R);
}

}  // namespace

HypothesisMeasurements measure_hypotheses(const TorusEmbedding& K, const AdaptedFrame& frame,
                                          const HamiltonianSystem& sys,
                                          const Frequencies& freq, const MeasureOptions& opt) {
    if (!(K.dims == sys.dims))
        throw std::invalid_argument("embedding and system disagree on torus dimensions");
    if (!frame.has_torsion())
        throw std::invalid_argument(
            "hypothesis measurement needs the frame torsion (<T>^-1 enters sigma_T)");
    if (sys.box.axes.size() != static_cast<std::size_t>(2 * sys.dims.n))
        throw std::invalid_argument("domain box must cover every phase-space coordinate");
    if (!(opt.rho > 0.0)) throw std::invalid_argument("strip width rho must be positive");
    if (!(opt.safety > 1.0))
        throw std::invalid_argument("safety factor must exceed 1 (the sigmas need slack)");
    if (opt.initial_lattice < 2) throw std::invalid_argument("initial lattice needs >= 2 nodes");
    if (!(opt.a1 > 1.0) || !(opt.a2 > 1.0))
        throw std::invalid_argument("schedule parameters a1, a2 must exceed 1");

    HypothesisMeasurements meas;
    meas.n = sys.dims.n;
    meas.ell = sys.dims.ell;
    meas.rho = opt.rho;
    meas.tau = freq.tau;
    meas.delta = opt.rho / a3_of(opt.a1, opt.a2);

    // H1, structure part.  Constant coefficients have exact bounds; otherwise sample.
    const bool constant_structure = sys.structure.constant_coefficients;
    if (constant_structure) {
        Eigen::VectorXd zc(2 * sys.dims.n);
        for (int i = 0; i < 2 * sys.dims.n; ++i) {
            const auto& ax = sys.box.axes[static_cast<std::size_t>(i)];
            zc[i] = ax.periodic ? 0.0 : 0.5 * (ax.lo + ax.hi);
        }
        meas.c_Om0 = infinity_norm(sys.structure.Omega(zc));
        meas.c_Om1 = 0.0;
        meas.c_G0 = infinity_norm(sys.structure.G(zc));
        meas.c_G1 = meas.c_G2 = 0.0;
        const Eigen::MatrixXd Jm = sys.structure.J(zc);
        meas.c_J0 = infinity_norm(Jm);
        meas.c_J1 = meas.c_J2 = 0.0;
        meas.c_JT0 = infinity_norm(Jm.transpose());
        meas.c_JT1 = 0.0;
        meas.c_Jinv = infinity_norm(sys.structure.J_inv(zc));
        meas.c_JinvT = infinity_norm(sys.structure.J_inv_T(zc));
    }

    // H1, field part (and sampled structure): lattice maxima refined until stable,
    // then inflated.
    StructureBounds sb;
    FieldBounds fb;
    auto sample_level = [&](int m) {
        fb = sample_field_bounds(sys, m);
        std::vector<double> packed = fb.pack();
        if (!constant_structure) {
            sb = sample_structure_bounds(sys.structure, sys.box, m);
            const std::vector<double> sp = sb.pack();
            packed.insert(packed.end(), sp.begin(), sp.end());
        }
        return packed;
    };
    std::vector<double> prev = sample_level(opt.initial_lattice);
    int m = opt.initial_lattice;
    for (int r = 0; r < opt.max_refinements; ++r) {
        m *= 2;
        std::vector<double> next = sample_level(m);
        const double moved = packed_movement(prev, next);
        prev = std::move(next);
        if (moved < opt.refine_target) break;
    }
    meas.c_H1 = opt.safety * fb.h1;
    meas.c_Z0 = opt.safety * fb.z0;
    meas.c_Z1 = opt.safety * fb.z1;
    meas.c_Z2 = opt.safety * fb.z2;
    meas.c_ZT1 = opt.safety * fb.zt1;
    meas.c_Th = opt.safety * fb.th;
    meas.c_ThT = opt.safety * fb.tht;
    meas.c_DTh = opt.safety * fb.dth;
    meas.c_ThT1 = opt.safety * fb.tht1;
    if (!constant_structure) {
        meas.c_Om0 = opt.safety * sb.om0;
        meas.c_Om1 = opt.safety * sb.om1;
        meas.c_G0 = opt.safety * sb.g0;
        meas.c_G1 = opt.safety * sb.g1;
        meas.c_G2 = opt.safety * sb.g2;
        meas.c_J0 = opt.safety * sb.j0;
        meas.c_J1 = opt.safety * sb.j1;
        meas.c_J2 = opt.safety * sb.j2;
        meas.c_JT0 = opt.safety * sb.jt0;
        meas.c_JT1 = opt.safety * sb.jt1;
        meas.c_Jinv = opt.safety * sb.jinv;
        meas.c_JinvT = opt.safety * sb.jinvT;
    }

    // H2-H4: torus-local norms at rho, dominated with the safety slack.
    meas.norm_DK = matrix_analytic_norm(frame.L, opt.rho);
    meas.norm_DKT = matrix_analytic_norm(transpose(frame.L), opt.rho);
    meas.norm_B = matrix_analytic_norm(frame.B, opt.rho);
    meas.norm_avgTinv = infinity_norm(frame.avgT_inverse);
    meas.sigma_L = opt.safety * meas.norm_DK;
    meas.sigma_LT = opt.safety * meas.norm_DKT;
    meas.sigma_B = opt.safety * meas.norm_B;
    meas.sigma_T = opt.safety * meas.norm_avgTinv;

    // H2, domain part: distance from the analytically widened torus image to the box
    // boundary.  The widening per component bounds |K_i(x + iy) - K_i(x)| on the
    // strip by sum_k |c_k| (e^{2 pi rho |k|_1} - 1).
    meas.domain_margin = std::numeric_limits<double>::infinity();
    {
        const std::vector<int> shape = oversampled_shape(K.trunc());
        const MatrixGrid Kg = embedding_grid(K, shape);
        std::size_t worst_node = 0;
        int worst_axis = -1;
        for (int i = 0; i < 2 * sys.dims.n; ++i) {
            const auto& ax = sys.box.axes[static_cast<std::size_t>(i)];
            if (ax.periodic) continue;
            const double widen =
                analytic_norm(K.comp[static_cast<std::size_t>(i)], opt.rho) -
                analytic_norm(K.comp[static_cast<std::size_t>(i)], 0.0);
            for (std::size_t node = 0; node < Kg.node_count(); ++node) {
                const double v = Kg.at(node, i, 0);
                const double dist = std::min(v - ax.lo, ax.hi - v) - widen;
                if (dist < meas.domain_margin) {
                    meas.domain_margin = dist;
                    worst_node = node;
                    worst_axis = i;
                }
            }
        }
        if (meas.domain_margin <= 0.0) {
            std::ostringstream msg;
            msg << "widened torus image reaches the domain boundary on coordinate "
                << worst_axis << " (margin " << meas.domain_margin << " at node " << worst_node
                << ")";
            throw DomainViolationError(msg.str(), worst_node);
        }
    }

    // H5: never certify against an unverified gamma.
    const DiophantineReport rep = check_diophantine(freq, sys.dims, opt.diophantine_box);
    meas.gamma_eff = std::min(freq.gamma, rep.effective_gamma);
    if (rep.effective_gamma < freq.gamma) {
        std::ostringstream w;
        w << "claimed gamma " << freq.gamma << " exceeds the scanned effective gamma "
          << rep.effective_gamma << " over |k|_1 <= " << opt.diophantine_box
          << "; the certificate uses the smaller value";
        meas.warnings.push_back(w.str());
    }
    meas.c_R = russmann_bound(freq, meas.delta, sys.dims, K.trunc());
    return meas;
}

bool ConstantsLedger::has(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return true;
    return false;
}

const ConstantRow& ConstantsLedger::row(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return r;
    throw Error("no constant named '" + name + "' in the ledger");
}

double ConstantsLedger::value(const std::string& name) const { return row(name).value; }

ConstantsLedger derived_constants(const HypothesisMeasurements& m, CaseTag tag, double a1,
                                  double a2) {
    bool finite = std::isfinite(m.domain_margin) || m.domain_margin > 0.0;
    visit_measurements(m, [&](const char* name, double v) {
        if (std::string(name) == "domain_margin") return;  // +inf allowed: no boundary
        if (!std::isfinite(v)) {
            finite = false;
            (void)name;
        }
    });
    if (!finite) throw std::invalid_argument("hypothesis measurements must be finite");
    if (!(a1 > 1.0) || !(a2 > 1.0))
        throw std::invalid_argument("schedule parameters a1, a2 must exceed 1");

    // The almost-complex cases take the starred table rows.
    const bool star = tag != CaseTag::CaseII;
    const double n = m.n;
    const double delta = m.delta;
    const double gamma = m.gamma_eff;
    const double tau = m.tau;
    const double rho = m.rho;
    const double cR = m.c_R;
    const double gdt = gamma * std::pow(delta, tau);

    ConstantsLedger led;
    auto put = [&led](const char* name, double value, const char* formula) {
        if (!std::isfinite(value))
            throw Error(std::string("derived constant ") + name + " is not finite");
        led.rows.push_back(ConstantRow{name, value, formula});
        return value;
    };

    // Geometry of the adapted frame.
    const double C_LieOmegaL =
        put("C_LieOmegaL",
            2.0 * n * m.c_Om0 * m.sigma_L + m.sigma_LT * m.c_Om1 * m.sigma_L * delta +
                n * m.sigma_LT * m.c_Om0,
            "2 n c_Om0 sigma_L + sigma_LT c_Om1 sigma_L delta + n sigma_LT c_Om0");
    const double C_OmegaL = put("C_OmegaL", cR * C_LieOmegaL, "c_R C_LieOmegaL");
    const double C_L = put("C_L", m.sigma_L, "sigma_L");
    const double C_LT = put("C_LT", m.sigma_LT, "sigma_LT");
    put("C_GL", C_LT * m.c_G0 * C_L, "C_LT c_G0 C_L");
    const double C_N0 = put("C_N0", m.c_J0 * C_L, "c_J0 C_L");
    const double C_N0T = put("C_N0T", C_LT * m.c_JT0, "C_LT c_JT0");
    const double C_Nt = put("C_Nt", C_N0 * m.sigma_B, "C_N0 sigma_B");
    const double C_NtT = put("C_NtT", m.sigma_B * C_N0T, "sigma_B C_N0T");
    const double C_A = put("C_A", star ? 0.0 : 0.5 * C_NtT * m.c_Om0 * C_Nt,
                           "1/2 C_NtT c_Om0 C_Nt | * 0");
    const double C_N = put("C_N", star ? C_Nt : C_L * C_A + C_Nt, "C_L C_A + C_Nt | * C_Nt");
    const double C_NT =
        put("C_NT", star ? C_NtT : C_A * C_LT + C_NtT, "C_A C_LT + C_NtT | * C_NtT");
    const double C_sym =
        put("C_sym",
            star ? C_OmegaL * std::max(1.0, m.sigma_B * m.sigma_B)
                 : (1.0 + C_A) * std::max(1.0, C_A) * C_OmegaL,
            "(1 + C_A) max{1, C_A} C_OmegaL | * C_OmegaL max{1, sigma_B^2}");
    const double C_T =
        put("C_T",
            star ? C_NT * m.c_Th * C_N
                 : 0.5 * (C_NtT * m.c_Th * C_Nt + C_NtT * m.c_ThT * C_Nt) +
                       C_NtT * m.c_ThT * C_N + C_NT * m.c_Th * C_Nt,
            "1/2 (C_NtT c_Th C_Nt + C_NtT c_ThT C_Nt) + C_NtT c_ThT C_N + C_NT c_Th C_Nt | * "
            "C_NT c_Th C_N");
    const double C_TE =
        put("C_TE",
            m.c_Om1 * delta + m.c_Om0 * m.c_J1 * m.c_Jinv * delta +
                2.0 * n * m.c_JT0 * C_L * m.sigma_B * m.c_Om0 * m.c_Om0 +
                n * m.c_JT0 * m.sigma_B * C_LT * m.c_Om0 * m.c_Om0,
            "c_Om1 delta + c_Om0 c_J1 c_Jinv delta + 2 n c_JT0 C_L sigma_B c_Om0^2 + n c_JT0 "
            "sigma_B C_LT c_Om0^2");
    const double C_TET =
        put("C_TET",
            m.c_Om1 * delta + m.c_JinvT * m.c_JT1 * m.c_Om0 * delta +
                n * m.sigma_B * C_LT * m.c_J0 * m.c_Om0 * m.c_Om0 +
                2.0 * n * C_L * m.sigma_B * m.c_J0 * m.c_Om0 * m.c_Om0,
            "c_Om1 delta + c_JinvT c_JT1 c_Om0 delta + n sigma_B C_LT c_J0 c_Om0^2 + 2 n C_L "
            "sigma_B c_J0 c_Om0^2");
    const double C_ELieB =
        put("C_ELieB", C_NtT * m.c_JinvT * C_TE * C_Nt, "C_NtT c_JinvT C_TE C_Nt");
    const double C_ELieBT =
        put("C_ELieBT", C_NtT * C_TET * m.c_Jinv * C_Nt, "C_NtT C_TET c_Jinv C_Nt");
    const double C_ELieNt =
        put("C_ELieNt", delta * m.c_J1 * C_L * m.sigma_B + n * m.c_J0 * m.sigma_B +
                            m.c_J0 * C_L * C_ELieB,
            "delta c_J1 C_L sigma_B + n c_J0 sigma_B + c_J0 C_L C_ELieB");
    const double C_ELieNtT =
        put("C_ELieNtT", delta * m.sigma_B * C_LT * m.c_JT1 + 2.0 * n * m.sigma_B * m.c_JT0 +
                             C_ELieBT * C_LT * m.c_JT0,
            "delta sigma_B C_LT c_JT1 + 2 n sigma_B c_JT0 + C_ELieBT C_LT c_JT0");
    const double C_ELieA =
        put("C_ELieA",
            0.5 * (C_ELieNtT * m.c_Om0 * C_Nt + delta * C_NtT * m.c_Om1 * C_Nt +
                   C_NtT * m.c_Om0 * C_ELieNt),
            "1/2 (C_ELieNtT c_Om0 C_Nt + delta C_NtT c_Om1 C_Nt + C_NtT c_Om0 C_ELieNt)");
    const double C_ELieN = put("C_ELieN", C_ELieNt + C_L * C_ELieA + n * C_A,
                               "C_ELieNt + C_L C_ELieA + n C_A");
    const double C_ET =
        put("C_ET",
            0.5 * (C_A * C_OmegaL * C_NtT * m.c_ThT * C_Nt +
                   C_A * C_OmegaL * C_NtT * m.c_Th * C_Nt) +
                C_A * C_OmegaL * C_A * m.c_Th * C_Nt +
                C_A * C_OmegaL * C_NtT * m.c_ThT * C_Nt * C_L * C_A +
                gdt * C_A * C_LT * m.c_Om0 * C_ELieN + gdt * C_NtT * m.c_Om0 * C_ELieN,
            "1/2 (C_A C_OmegaL C_NtT c_ThT C_Nt + C_A C_OmegaL C_NtT c_Th C_Nt) + C_A C_OmegaL "
            "C_A c_Th C_Nt + C_A C_OmegaL C_NtT c_ThT C_Nt C_L C_A + gamma delta^tau C_A C_LT "
            "c_Om0 C_ELieN + gamma delta^tau C_NtT c_Om0 C_ELieN");
    const double C_LL = put("C_LL", n, "n");
    const double C_LLT = put("C_LLT", 2.0 * n, "2 n");
    const double C_LieA =
        put("C_LieA",
            star ? 0.0
                 : 0.5 * (C_NtT * m.c_ThT * C_Nt +
                          C_NtT * m.c_ThT * m.c_Jinv * C_Nt * C_LT * m.c_JT0 * m.c_Om0 * C_Nt +
                          C_NtT * m.c_Th * C_Nt +
                          C_NtT * m.c_Om0 * m.c_J0 * C_L * C_NtT * m.c_JinvT * m.c_Th * C_Nt),
            "1/2 (C_NtT c_ThT C_Nt + C_NtT c_ThT c_Jinv C_Nt C_LT c_JT0 c_Om0 C_Nt + C_NtT c_Th "
            "C_Nt + C_NtT c_Om0 c_J0 C_L C_NtT c_JinvT c_Th C_Nt) | * 0");
    const double C_red11 = put("C_red11", C_NT * m.c_Om0 * C_LL, "C_NT c_Om0 C_LL");
    const double C_red12 = put("C_red12", C_ET, "C_ET");
    const double C_red21 = put("C_red21", C_LT * m.c_Om0 * C_LL, "C_LT c_Om0 C_LL");
    const double C_red22 =
        put("C_red22",
            (C_LT * m.c_Om1 * C_N * delta + C_LLT * m.c_Om0 * C_N + C_LieOmegaL * C_A +
             m.sigma_LT * m.c_Om0 * m.sigma_L * C_ELieA) *
                    gdt +
                C_OmegaL * C_LieA,
            "(C_LT c_Om1 C_N delta + C_LLT c_Om0 C_N + C_LieOmegaL C_A + sigma_LT c_Om0 sigma_L "
            "C_ELieA) gamma delta^tau + C_OmegaL C_LieA [sigmaDKT read as sigma_LT]");
    const double C_red =
        put("C_red", std::max(C_red11 * gdt + C_red12, C_red21 * gdt + C_red22),
            "max{C_red11 gamma delta^tau + C_red12, C_red21 gamma delta^tau + C_red22}");

    // One quasi-Newton step.
    const double C_xiN0 =
        put("C_xiN0", m.sigma_T * (C_NT * m.c_Om0 * gdt + cR * C_T * C_LT * m.c_Om0),
            "sigma_T (C_NT c_Om0 gamma delta^tau + c_R C_T C_LT c_Om0)");
    const double C_xiN = put("C_xiN", C_xiN0 + cR * C_LT * m.c_Om0, "C_xiN0 + c_R C_LT c_Om0");
    const double C_xiL = put("C_xiL", cR * (C_NT * m.c_Om0 * gdt + C_T * C_xiN),
                             "c_R (C_NT c_Om0 gamma delta^tau + C_T C_xiN)");
    const double C_xi =
        put("C_xi", std::max(C_xiL, C_xiN * gdt), "max{C_xiL, C_xiN gamma delta^tau}");
    const double C_DeltaK = put("C_DeltaK", C_L * C_xiL + C_N * C_xiN * gdt,
                                "C_L C_xiL + C_N C_xiN gamma delta^tau");
    const double C_LiexiN = put("C_LiexiN", C_LT * m.c_Om0, "C_LT c_Om0");
    const double C_LiexiL = put("C_LiexiL", C_NT * m.c_Om0 * gdt + C_T * C_xiN,
                                "C_NT c_Om0 gamma delta^tau + C_T C_xiN");
    const double C_Liexi = put("C_Liexi", std::max(C_LiexiL, C_LiexiN * gdt),
                               "max{C_LiexiL, C_LiexiN gamma delta^tau}");
    const double C_lin = put("C_lin", C_red * C_xi + m.c_Om0 * C_sym * C_Liexi * gdt,
                             "C_red C_xi + c_Om0 C_sym C_Liexi gamma delta^tau");
    // The smallness constant in both algebraic forms: the table's gamma delta^(tau-1)
    // factor and the normalized gamma^4 delta^(4 tau) / (gamma^3 delta^(3 tau + 1))
    // bookkeeping must agree.
    const double CE_table = 2.0 * (C_L + C_N) * C_lin * gamma * std::pow(delta, tau - 1.0) +
                            0.5 * m.c_Z2 * C_DeltaK * C_DeltaK;
    const double CE_normalized =
        2.0 * (C_L + C_N) * C_lin *
            (std::pow(gamma, 4) * std::pow(delta, 4.0 * tau)) /
            (std::pow(gamma, 3) * std::pow(delta, 3.0 * tau + 1.0)) +
        0.5 * m.c_Z2 * C_DeltaK * C_DeltaK;
    if (std::abs(CE_table - CE_normalized) > 1e-9 * std::max(1.0, std::abs(CE_table)))
        throw Error("smallness constant C_E disagrees between its two algebraic forms");
    const double C_E =
        put("C_E", CE_table,
            "2 (C_L + C_N) C_lin gamma delta^(tau-1) + 1/2 c_Z2 C_DeltaK^2 [normalized form "
            "asserted equal]");

    // Differences between consecutive iterates.
    const double C_DeltaL = put("C_DeltaL", n * C_DeltaK, "n C_DeltaK");
    const double C_DeltaLT = put("C_DeltaLT", 2.0 * n * C_DeltaK, "2 n C_DeltaK");
    const double C_DeltaG = put("C_DeltaG", m.c_G1 * C_DeltaK, "c_G1 C_DeltaK");
    const double C_DeltaGL =
        put("C_DeltaGL",
            C_LT * m.c_G0 * C_DeltaL + C_LT * C_DeltaG * C_L * delta + C_DeltaLT * m.c_G0 * C_L,
            "C_LT c_G0 C_DeltaL + C_LT C_DeltaG C_L delta + C_DeltaLT c_G0 C_L");
    const double C_DeltaB =
        put("C_DeltaB", m.sigma_B * m.sigma_B * C_DeltaGL, "sigma_B^2 C_DeltaGL");
    const double C_DeltaOmega = put("C_DeltaOmega", m.c_Om1 * C_DeltaK, "c_Om1 C_DeltaK");
    const double C_DeltaJ = put("C_DeltaJ", m.c_J1 * C_DeltaK, "c_J1 C_DeltaK");
    const double C_DeltaJT = put("C_DeltaJT", m.c_JT1 * C_DeltaK, "c_JT1 C_DeltaK");
    const double C_DeltaN0 = put("C_DeltaN0", m.c_J0 * C_DeltaL + C_DeltaJ * C_L * delta,
                                 "c_J0 C_DeltaL + C_DeltaJ C_L delta");
    const double C_DeltaN0T = put("C_DeltaN0T", C_DeltaLT * m.c_JT0 + C_LT * C_DeltaJT * delta,
                                  "C_DeltaLT c_JT0 + C_LT C_DeltaJT delta");
    const double C_DeltaNt = put("C_DeltaNt", C_DeltaN0 * m.sigma_B + C_N0 * C_DeltaB,
                                 "C_DeltaN0 sigma_B + C_N0 C_DeltaB");
    const double C_DeltaNtT = put("C_DeltaNtT", m.sigma_B * C_DeltaN0T + C_DeltaB * C_N0T,
                                  "sigma_B C_DeltaN0T + C_DeltaB C_N0T");
    const double C_DeltaA =
        put("C_DeltaA",
            star ? 0.0
                 : 0.5 * (C_DeltaNtT * m.c_Om0 * C_Nt + C_NtT * C_DeltaOmega * C_Nt * delta +
                          C_NtT * m.c_Om0 * C_DeltaNt),
            "1/2 (C_DeltaNtT c_Om0 C_Nt + C_NtT C_DeltaOmega C_Nt delta + C_NtT c_Om0 "
            "C_DeltaNt) | * 0");
    const double C_DeltaN = put("C_DeltaN", C_A * C_DeltaLT + C_DeltaA * C_LT + C_DeltaNt,
                                "C_A C_DeltaLT + C_DeltaA C_LT + C_DeltaNt");
    const double C_DeltaNT = put("C_DeltaNT", C_A * C_DeltaLT + C_DeltaA * C_LT + C_DeltaNtT,
                                 "C_A C_DeltaLT + C_DeltaA C_LT + C_DeltaNtT");
    const double C_DeltaTh = put("C_DeltaTh", m.c_DTh * C_DeltaK, "c_DTh C_DeltaK");
    const double C_DeltaThT = put("C_DeltaThT", m.c_ThT1 * C_DeltaK, "c_ThT1 C_DeltaK");
    const double C_DeltaT =
        put("C_DeltaT",
            0.5 * C_DeltaNtT * m.c_Th * C_Nt + C_NtT * C_DeltaTh * C_Nt * delta +
                C_NtT * m.c_Th * C_DeltaNt + 0.5 * C_DeltaNtT * m.c_ThT * C_Nt +
                C_NtT * C_DeltaThT * C_Nt * delta + C_NtT * m.c_ThT * C_DeltaNt +
                C_DeltaNtT * m.c_ThT * C_N + C_NtT * C_DeltaThT * C_N * delta +
                C_NtT * m.c_ThT * C_DeltaN + C_DeltaNT * m.c_Th * C_Nt +
                C_NT * C_DeltaTh * C_Nt * delta + C_NT * m.c_Th * C_DeltaNt,
            "1/2 C_DeltaNtT c_Th C_Nt + C_NtT C_DeltaTh C_Nt delta + C_NtT c_Th C_DeltaNt + 1/2 "
            "C_DeltaNtT c_ThT C_Nt + C_NtT C_DeltaThT C_Nt delta + C_NtT c_ThT C_DeltaNt + "
            "C_DeltaNtT c_ThT C_N + C_NtT C_DeltaThT C_N delta + C_NtT c_ThT C_DeltaN + "
            "C_DeltaNT c_Th C_Nt + C_NT C_DeltaTh C_Nt delta + C_NT c_Th C_DeltaNt");
    const double C_DeltaTinv =
        put("C_DeltaTinv", m.sigma_T * m.sigma_T * C_DeltaT, "sigma_T^2 C_DeltaT");

    // Convergence of the scheme.
    auto slack = [](const char* what, double sigma, double measured, const char* row_name) {
        const double s = sigma - measured;
        if (!(s > 0.0)) {
            std::ostringstream msg;
            msg << what << " = " << sigma << " leaves no slack over its measured value "
                << measured << " (row " << row_name << ")";
            throw HypothesisSlackError(msg.str(), row_name);
        }
        return s;
    };
    const double C_Delta1 =
        put("C_Delta1",
            std::max({n * C_DeltaK / slack("sigma_L", m.sigma_L, m.norm_DK, "C_Delta1"),
                      2.0 * n * C_DeltaK / slack("sigma_LT", m.sigma_LT, m.norm_DKT, "C_Delta1"),
                      C_DeltaB / slack("sigma_B", m.sigma_B, m.norm_B, "C_Delta1"),
                      C_DeltaTinv /
                          slack("sigma_T", m.sigma_T, m.norm_avgTinv, "C_Delta1")}),
            "max{n C_DeltaK/(sigma_L - |DK|), 2 n C_DeltaK/(sigma_LT - |DKT|), "
            "C_DeltaB/(sigma_B - |B|), C_DeltaTinv/(sigma_T - |<T>^-1|)}");
    double C_Delta2_value = 0.0;
    if (std::isinf(m.domain_margin)) {
        C_Delta2_value = 0.0;  // every coordinate periodic: no boundary to approach
    } else if (m.domain_margin > 0.0) {
        C_Delta2_value = C_DeltaK * delta / m.domain_margin;
    } else {
        std::ostringstream msg;
        msg << "domain margin " << m.domain_margin << " is not positive (row C_Delta2)";
        throw HypothesisSlackError(msg.str(), "C_Delta2");
    }
    const double C_Delta2 =
        put("C_Delta2", C_Delta2_value, "C_DeltaK delta / dist(K, boundary)");
    const double den_far = 1.0 - std::pow(a1, 1.0 - 2.0 * tau);
    const double den_near = 1.0 - std::pow(a1, -2.0 * tau);
    if (!(den_far > 0.0) || !(den_near > 0.0))
        throw HypothesisSlackError(
            "the geometric schedule needs tau > 1/2 and a1 > 1 (row C_Delta)", "C_Delta");
    const double C_Delta =
        put("C_Delta", std::max({C_sym * gdt, C_Delta1 / den_far, C_Delta2 / den_near}),
            "max{C_sym gamma delta^tau, C_Delta1/(1 - a1^(1-2 tau)), C_Delta2/(1 - "
            "a1^(-2 tau))} [step condition uses 2 C_sym]");
    const double a3 = a3_of(a1, a2);
    put("frakC1",
        std::max(std::pow(a1 * a3, 4.0 * tau) * C_E,
                 std::pow(a3, 2.0 * tau + 1.0) * gamma * gamma * std::pow(rho, 2.0 * tau - 1.0) *
                     C_Delta),
        "max{(a1 a3)^(4 tau) C_E, a3^(2 tau + 1) gamma^2 rho^(2 tau - 1) C_Delta}");
    put("frakC2", std::pow(a3, 2.0 * tau) * C_DeltaK / den_near,
        "a3^(2 tau) C_DeltaK/(1 - a1^(-2 tau))");
    return led;
}

CertificateReport check_kam_condition(const HypothesisMeasurements& m,
                                      const ConstantsLedger& ledger, CaseTag tag,
                                      double error_norm_rho, double a1, double a2) {
    if (!(error_norm_rho >= 0.0) || !std::isfinite(error_norm_rho))
        throw std::invalid_argument("error norm must be finite and nonnegative");

    CertificateReport report;
    report.measurements = m;
    report.ledger = ledger;
    report.tag = tag;
    report.error_norm = error_norm_rho;
    report.a1 = a1;
    report.a2 = a2;

    const double gamma = m.gamma_eff;
    const double denom4 = std::pow(gamma, 4) * std::pow(m.rho, 4.0 * m.tau);
    const double denom2 = gamma * gamma * std::pow(m.rho, 2.0 * m.tau);
    report.lhs = ledger.value("frakC1") * error_norm_rho / denom4;
    report.pass = report.lhs < 1.0;  // the theorem's inequality is strict
    report.closeness = ledger.value("frakC2") * error_norm_rho / denom2;

    const double a3 = a3_of(a1, a2);
    const double branch_smallness = std::pow(a1 * a3, 4.0 * m.tau) * ledger.value("C_E");
    const double branch_drift = std::pow(a3, 2.0 * m.tau + 1.0) * gamma * gamma *
                                std::pow(m.rho, 2.0 * m.tau - 1.0) * ledger.value("C_Delta");
    report.c1_branch = branch_smallness >= branch_drift
                           ? "(a1 a3)^(4 tau) C_E"
                           : "a3^(2 tau + 1) gamma^2 rho^(2 tau - 1) C_Delta";

    report.warnings = m.warnings;
    if (std::abs(m.delta - m.rho / a3) > 1e-12 * std::max(1.0, m.rho)) {
        std::ostringstream w;
        w << "delta " << m.delta << " differs from rho/a3 = " << m.rho / a3
          << " for the schedule pair a1 = " << a1 << ", a2 = " << a2;
        report.warnings.push_back(w.str());
    }
    report.warnings.push_back("row C_red22 reads the symbol sigmaDKT as sigma_LT");
    return report;
}

double error_analytic_norm(const MatrixSeries& E, double rho) {
    return matrix_analytic_norm(E, rho);
}

void write_certificate_text(std::ostream& out, const CertificateReport& r) {
    const auto& m = r.measurements;
    out << "a-posteriori invariance certificate\n";
    out << "(bounds sampled on refined lattices with safety inflation: sampled, not "
           "rigorous)\n\n";
    out << std::setprecision(12);
    out << "case " << to_string(r.tag) << ", n = " << m.n << ", ell = " << m.ell << "\n";
    out << "gamma_eff = " << m.gamma_eff << ", tau = " << m.tau << "\n";
    out << "rho = " << m.rho << ", delta = " << m.delta << ", c_R = " << m.c_R
        << ", schedule a1 = " << r.a1 << ", a2 = " << r.a2 << "\n";
    out << "\nhypothesis measurements\n";
    visit_measurements(m, [&out](const char* name, double v) {
        out << "  " << name << " = " << v << "\n";
    });
    out << "\nderived constants (" << r.ledger.rows.size() << " rows)\n";
    for (const auto& row : r.ledger.rows)
        out << "  " << row.name << " = " << row.value << "    [" << row.formula << "]\n";
    out << "\nsmallness condition (strict)\n";
    out << "  |E|_rho = " << r.error_norm << "\n";
    out << "  lhs = frakC1 |E|_rho / (gamma_eff^4 rho^(4 tau)) = " << r.lhs << "\n";
    out << "  binding branch of frakC1: " << r.c1_branch << "\n";
    out << "  verdict: " << (r.pass ? "PASS (lhs < 1)" : "FAIL (lhs >= 1)") << "\n";
    out << "  closeness: |K_true - K| bounded by frakC2 |E|_rho / (gamma_eff^2 rho^(2 tau)) = "
        << r.closeness << "\n";
    if (!r.warnings.empty()) {
        out << "\nwarnings\n";
        for (const auto& w : r.warnings) out << "  - " << w << "\n";
    }
}

void write_certificate_kv(std::ostream& out, const CertificateReport& r) {
    const auto& m = r.measurements;
    out << std::setprecision(17);
    out << "case = " << to_string(r.tag) << "\n";
    out << "n = " << m.n << "\n";
    out << "ell = " << m.ell << "\n";
    out << "a1 = " << r.a1 << "\n";
    out << "a2 = " << r.a2 << "\n";
    visit_measurements(m, [&out](const char* name, double v) {
        out << name << " = " << v << "\n";
    });
    for (const auto& row : r.ledger.rows) {
        out << row.name << " = " << row.value << "\n";
        out << row.name << ".formula = " << row.formula << "\n";
    }
    out << "error_norm = " << r.error_norm << "\n";
    out << "lhs = " << r.lhs << "\n";
    out << "pass = " << (r.pass ? 1 : 0) << "\n";
    out << "closeness = " << r.closeness << "\n";
    out << "c1_branch = " << r.c1_branch << "\n";
    for (std::size_t i = 0; i < r.warnings.size(); ++i)
        out << "warning." << i << " = " << r.warnings[i] << "\n";
}

}  // namespace kamtori
