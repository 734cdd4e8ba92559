// Batch front-end: solve, continue, certify, validate.  Each invocation creates a
// fresh timestamped run directory under --out and writes its artifacts plus a
// manifest there.  Exit codes are a fixed contract:
//   0 success, 2 divergence, 3 configuration error, 4 certificate condition failed,
//   5 validation threshold failed.  No other codes are produced.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kamtori/certificate.hpp"
#include "kamtori/config.hpp"
#include "kamtori/errors.hpp"
#include "kamtori/newton.hpp"
#include "kamtori/parallel.hpp"

namespace {

using namespace kamtori;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kDiverged = 2;
constexpr int kConfigError = 3;
constexpr int kCertificateFail = 4;
constexpr int kValidationFail = 5;

std::string utc_stamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

// <subcommand>-<UTC stamp>, suffixed with a counter on collision; never overwrites.
fs::path create_run_dir(const fs::path& root, const std::string& subcommand) {
    fs::create_directories(root);
    const std::string stamp = utc_stamp();
    fs::path dir = root / (subcommand + "-" + stamp);
    for (int k = 1; !fs::create_directory(dir); ++k)
        dir = root / (subcommand + "-" + stamp + "-" + std::to_string(k));
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const Config& cfg,
                    const std::vector<std::string>& artifacts, const std::string& outcome) {
    std::ofstream out(dir / "manifest.txt");
    out << "subcommand = " << subcommand << "\n";
    out << "written_utc = " << utc_stamp() << "\n";
    out << "outcome = " << outcome << "\n";
    for (const auto& a : artifacts) out << "artifact = " << a << "\n";
    out << "\n# resolved configuration\n";
    for (const auto& [key, value] : cfg.entries()) out << key << " = " << value << "\n";
}

HamiltonianSystem build_system(const Config& cfg, double eps_override) {
    const std::string name = cfg.get_string("system.name");
    const int ell = cfg.get_int("system.ell", 1);
    const std::vector<double> omega = cfg.get_doubles("frequencies.omega");
    if (omega.size() != 1)
        throw ConfigError("frequencies.omega needs exactly one entry for the built-in systems");
    const double y_lo = cfg.get_double("system.y_lo", omega[0] - 0.5);
    const double y_hi = cfg.get_double("system.y_hi", omega[0] + 0.5);
    double eps = 0.0;
    if (name == "forced_pendulum") {
        eps = cfg.get_double("system.eps");
    } else if (name != "rotator") {
        throw ConfigError("system.name must be 'rotator' or 'forced_pendulum', got '" + name +
                          "'");
    }
    if (!std::isnan(eps_override)) eps = eps_override;
    return forced_pendulum(eps, ell, y_lo, y_hi);
}

Frequencies build_frequencies(const Config& cfg) {
    Frequencies f;
    f.omega = cfg.get_doubles("frequencies.omega");
    f.alpha = cfg.get_doubles("frequencies.alpha");
    f.gamma = cfg.get_double("frequencies.gamma", 0.1);
    f.tau = cfg.get_double("frequencies.tau", 1.2);
    return f;
}

NewtonConfig build_newton(const Config& cfg) {
    NewtonConfig nc;
    nc.max_iters = cfg.get_int("newton.max_iters", nc.max_iters);
    nc.stop_tol = cfg.get_double("newton.stop_tol", nc.stop_tol);
    nc.rho0 = cfg.get_double("newton.rho0", nc.rho0);
    nc.a1 = cfg.get_double("newton.a1", nc.a1);
    nc.a2 = cfg.get_double("newton.a2", nc.a2);
    nc.consistency_tol = cfg.get_double("newton.consistency_tol", nc.consistency_tol);
    nc.oversample_factor = cfg.get_int("newton.oversample_factor", nc.oversample_factor);
    nc.oversample_pad = cfg.get_int("newton.oversample_pad", nc.oversample_pad);
    return nc;
}

TorusEmbedding load_coefficients(const Config& cfg) {
    const std::string path = cfg.get_string("torus.coefficients");
    try {
        return read_embedding(path);
    } catch (const std::exception& e) {
        throw ConfigError("coefficient file '" + path + "': " + e.what());
    }
}

// Warm start from a coefficient file when given, else the flat graph torus at the
// configured (default: resonant-free input frequency) momentum.
TorusEmbedding initial_torus(const Config& cfg, const Frequencies& freq, int ell) {
    if (cfg.has("torus.coefficients")) return load_coefficients(cfg);
    const std::vector<int> trunc = cfg.get_ints("torus.trunc");
    if (trunc.size() != static_cast<std::size_t>(1 + ell))
        throw ConfigError("torus.trunc needs 1 + system.ell entries");
    TorusEmbedding K = zero_embedding(TorusDims{1, ell}, trunc, graph_winding(1));
    const double momentum = cfg.get_double("torus.initial_momentum", freq.omega.at(0));
    K.comp[1].set_pair(MultiIndex(trunc.size(), 0), momentum);
    return K;
}

void write_history_header(std::ostream& out, bool with_leg) {
    if (with_leg) out << "leg\teps\t";
    out << "step\terror_sup\terror_analytic\trho\tdelta\tcorrection_sup\tframe_condition\t"
           "torsion_condition\taverage_removed\tsubstitute_back\n";
}

void write_history_rows(std::ostream& out, const std::vector<StepDiagnostics>& history,
                        int leg = -1, double eps = 0.0) {
    out << std::setprecision(17);
    for (const auto& s : history) {
        if (leg >= 0) out << leg << "\t" << eps << "\t";
        out << s.step << "\t" << s.error_sup << "\t" << s.error_analytic << "\t" << s.rho
            << "\t" << s.delta << "\t" << s.correction_sup << "\t" << s.frame_condition << "\t"
            << s.torsion_condition << "\t" << s.average_removed << "\t" << s.substitute_back
            << "\n";
    }
}

void write_divergence_rows(std::ostream& out, const std::vector<double>& errors, int leg = -1,
                           double eps = 0.0) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (leg >= 0) out << leg << "\t" << eps << "\t";
        out << i << "\t" << errors[i] << "\t0\t0\t0\t0\t0\t0\t0\t0\n";
    }
}

int cmd_solve(const Config& cfg, const fs::path& dir) {
    const Frequencies freq = build_frequencies(cfg);
    const HamiltonianSystem sys = build_system(cfg, std::nan(""));
    validate(freq, sys.dims);
    const TorusEmbedding K0 = initial_torus(cfg, freq, sys.dims.ell);
    const NewtonConfig nc = build_newton(cfg);

    std::vector<std::string> artifacts;
    std::ofstream hist(dir / "history.tsv");
    write_history_header(hist, false);
    artifacts.push_back("history.tsv");
    try {
        const NewtonResult r = run_newton(K0, sys, freq, nc);
        write_history_rows(hist, r.history);
        write_embedding(dir.string(), "torus", r.K);
        artifacts.push_back("torus.manifest");
        std::ostringstream outcome;
        outcome << std::setprecision(12)
                << (r.converged ? "converged" : "stopped at max iterations")
                << ", final sup error " << r.final_error_sup << ", fitted order "
                << r.quadratic_order;
        write_manifest(dir, "solve", cfg, artifacts, outcome.str());
        std::cout << outcome.str() << "\n";
        return r.converged ? kOk : kDiverged;
    } catch (const DivergenceError& e) {
        write_divergence_rows(hist, e.error_history);
        write_manifest(dir, "solve", cfg, artifacts, std::string("diverged: ") + e.what());
        std::cout << "diverged: " << e.what() << "\n";
        return kDiverged;
    } catch (const Error& e) {  // frame or consistency breakdown mid-iteration
        write_manifest(dir, "solve", cfg, artifacts, std::string("failed: ") + e.what());
        std::cout << "failed: " << e.what() << "\n";
        return kDiverged;
    }
}

int cmd_continue(const Config& cfg, const fs::path& dir) {
    if (cfg.get_string("system.name") != "forced_pendulum")
        throw ConfigError("continuation sweeps system.eps: system.name must be forced_pendulum");
    const Frequencies freq = build_frequencies(cfg);
    const std::vector<double> schedule = cfg.get_doubles("continue.eps");
    const NewtonConfig nc = build_newton(cfg);

    std::vector<std::string> artifacts;
    std::ofstream hist(dir / "history.tsv");
    write_history_header(hist, true);
    artifacts.push_back("history.tsv");
    if (schedule.empty()) {
        write_manifest(dir, "continue", cfg, artifacts, "empty schedule: nothing to do");
        return kOk;
    }

    {
        const HamiltonianSystem probe = build_system(cfg, schedule.front());
        validate(freq, probe.dims);
    }
    TorusEmbedding K = initial_torus(cfg, freq, cfg.get_int("system.ell", 1));
    std::ostringstream legs;
    for (std::size_t leg = 0; leg < schedule.size(); ++leg) {
        const double eps = schedule[leg];
        const HamiltonianSystem sys = build_system(cfg, eps);
        try {
            const NewtonResult r = run_newton(K, sys, freq, nc);
            write_history_rows(hist, r.history, static_cast<int>(leg), eps);
            if (!r.converged) {
                legs << "leg " << leg << " (eps " << eps << ") stopped at max iterations";
                write_manifest(dir, "continue", cfg, artifacts,
                               "partial family: " + legs.str());
                std::cout << legs.str() << "\n";
                return kDiverged;
            }
            char base[32];
            std::snprintf(base, sizeof base, "torus-%03zu", leg);
            write_embedding(dir.string(), base, r.K);
            artifacts.push_back(std::string(base) + ".manifest");
            legs << "leg " << leg << " (eps " << eps << ") converged to "
                 << r.final_error_sup << "; ";
            K = r.K;
        } catch (const DivergenceError& e) {
            write_divergence_rows(hist, e.error_history, static_cast<int>(leg), eps);
            legs << "leg " << leg << " (eps " << eps << ") diverged";
            write_manifest(dir, "continue", cfg, artifacts, "partial family: " + legs.str());
            std::cout << legs.str() << "\n";
            return kDiverged;
        } catch (const Error& e) {
            legs << "leg " << leg << " (eps " << eps << ") failed: " << e.what();
            write_manifest(dir, "continue", cfg, artifacts, "partial family: " + legs.str());
            std::cout << legs.str() << "\n";
            return kDiverged;
        }
    }
    write_manifest(dir, "continue", cfg, artifacts, legs.str());
    std::cout << legs.str() << "\n";
    return kOk;
}

int cmd_certify(const Config& cfg, const fs::path& dir) {
    const Frequencies freq = build_frequencies(cfg);
    const HamiltonianSystem sys = build_system(cfg, std::nan(""));
    validate(freq, sys.dims);
    const TorusEmbedding K = load_coefficients(cfg);

    MeasureOptions mo;
    mo.rho = cfg.get_double("certify.rho", mo.rho);
    mo.safety = cfg.get_double("certify.safety", mo.safety);
    mo.initial_lattice = cfg.get_int("certify.lattice", mo.initial_lattice);
    mo.refine_target = cfg.get_double("certify.refine_target", mo.refine_target);
    mo.max_refinements = cfg.get_int("certify.max_refinements", mo.max_refinements);
    mo.diophantine_box = cfg.get_int("certify.box_radius", mo.diophantine_box);
    mo.a1 = cfg.get_double("certify.a1", mo.a1);
    mo.a2 = cfg.get_double("certify.a2", mo.a2);

    std::vector<std::string> artifacts;
    const std::vector<int> shape = oversampled_shape(K.trunc());
    try {
        const AdaptedFrame frame = assemble_frame(K, sys, shape);
        const HypothesisMeasurements meas = measure_hypotheses(K, frame, sys, freq, mo);
        const ConstantsLedger ledger = derived_constants(meas, sys.structure.tag, mo.a1, mo.a2);
        const double enorm =
            error_analytic_norm(invariance_error(K, sys, freq, shape), mo.rho);
        const CertificateReport report =
            check_kam_condition(meas, ledger, sys.structure.tag, enorm, mo.a1, mo.a2);

        std::ofstream txt(dir / "certificate.txt");
        write_certificate_text(txt, report);
        artifacts.push_back("certificate.txt");
        std::ofstream kv(dir / "certificate.kv");
        write_certificate_kv(kv, report);
        artifacts.push_back("certificate.kv");

        std::ostringstream outcome;
        outcome << std::setprecision(12) << (report.pass ? "PASS" : "FAIL") << ", lhs "
                << report.lhs << ", |E|_rho " << report.error_norm;
        write_manifest(dir, "certify", cfg, artifacts, outcome.str());
        std::cout << outcome.str() << "\n";
        return report.pass ? kOk : kCertificateFail;
    } catch (const Error& e) {
        // Hypotheses failed mid-measurement (slack, margin, resonance, frame):
        // the inputs were readable, the certificate just cannot be established.
        std::ofstream txt(dir / "certificate.txt");
        txt << "certificate not established: " << e.what() << "\n";
        artifacts.push_back("certificate.txt");
        write_manifest(dir, "certify", cfg, artifacts,
                       std::string("not established: ") + e.what());
        std::cout << "not established: " << e.what() << "\n";
        return kCertificateFail;
    }
}

int cmd_validate(const Config& cfg, const fs::path& dir) {
    const Frequencies freq = build_frequencies(cfg);
    const HamiltonianSystem sys = build_system(cfg, std::nan(""));
    validate(freq, sys.dims);
    const TorusEmbedding K = load_coefficients(cfg);
    const double threshold = cfg.get_double("validate.threshold");
    const double t_final = cfg.get_double("validate.t_final", 20.0);
    const int samples = cfg.get_int("validate.samples", 16);
    const int checkpoints = cfg.get_int("validate.checkpoints", 8);
    const double rk_tol = cfg.get_double("validate.rk_tol", 1e-11);

    std::vector<std::string> artifacts;
    try {
        const FlowValidationResult res =
            flow_validate(K, sys, freq, t_final, samples, checkpoints, rk_tol);
        std::ofstream tsv(dir / "validation.tsv");
        tsv << std::setprecision(17) << "sample";
        for (std::size_t a = 0; res.rows.size() > 0 && a < res.rows[0].start_angles.size();
             ++a)
            tsv << "\tangle" << a;
        tsv << "\tmax_deviation\n";
        for (std::size_t i = 0; i < res.rows.size(); ++i) {
            tsv << i;
            for (const double a : res.rows[i].start_angles) tsv << "\t" << a;
            tsv << "\t" << res.rows[i].max_deviation << "\n";
        }
        artifacts.push_back("validation.tsv");

        const bool ok = res.max_deviation < threshold;
        std::ostringstream outcome;
        outcome << std::setprecision(12) << "max deviation " << res.max_deviation
                << " over t_final " << res.t_final << (ok ? " < " : " >= ") << "threshold "
                << threshold;
        write_manifest(dir, "validate", cfg, artifacts, outcome.str());
        std::cout << outcome.str() << "\n";
        return ok ? kOk : kValidationFail;
    } catch (const Error& e) {
        // A trajectory left the domain or the integrator failed: no bound established.
        write_manifest(dir, "validate", cfg, artifacts, std::string("failed: ") + e.what());
        std::cout << "failed: " << e.what() << "\n";
        return kValidationFail;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral solver and a-posteriori invariance certificates for tori"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    int threads = 1;
    auto add_common = [&](const std::string& name, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--set", overrides, "override a config key (key=value, repeatable)");
        sub->add_option("--out", out_dir, "parent directory for run directories");
        sub->add_option("--threads", threads, "worker threads for lattice scans");
        return sub;
    };
    add_common("solve", "solve the invariance equation from the configured start");
    add_common("continue", "warm-started solves along the continue.eps schedule");
    add_common("certify", "measure hypotheses and check the smallness condition");
    add_common("validate", "integrate trajectories against the torus prediction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse error
        return code == 0 ? kOk : kConfigError;
    }

    try {
        Config cfg = Config::parse_file(config_path);
        for (const std::string& s : overrides) cfg.set_pair(s, "--set");
        if (threads < 1) throw ConfigError("--threads must be at least 1");
        set_thread_count(threads);

        const std::string sub = app.get_subcommands().front()->get_name();
        const fs::path root =
            !out_dir.empty() ? fs::path(out_dir) : fs::path(cfg.get_string("output.dir", "runs"));
        const fs::path dir = create_run_dir(root, sub);
        std::cout << "run directory: " << dir.string() << "\n";

        if (sub == "solve") return cmd_solve(cfg, dir);
        if (sub == "continue") return cmd_continue(cfg, dir);
        if (sub == "certify") return cmd_certify(cfg, dir);
        return cmd_validate(cfg, dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        // Anything unhandled at this level is an input/setup problem.
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
}
