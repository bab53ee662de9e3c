// Command-line front end.  Wires drift/weight/experiment parameters (flags
// or a JSON config; flags win) to the library, runs the requested
// computation, and emits canonical JSON reports plus optional CSV series.
// Wall-clock metadata is segregated into a *.sidecar.json next to each
// report so canonical outputs are byte-identical for a fixed config and
// seed, independent of thread count.
//
// Exit codes: 0 = computation done and every check passed; 2 = at least one
// verification failed (including admissibility-gate rejections); 1 = usage,
// config, or I/O error.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wclb/analysis.hpp"
#include "wclb/bounds.hpp"
#include "wclb/constants.hpp"
#include "wclb/drift.hpp"
#include "wclb/io.hpp"
#include "wclb/kappa.hpp"
#include "wclb/parallel.hpp"
#include "wclb/report.hpp"
#include "wclb/sim.hpp"
#include "wclb/transport.hpp"

namespace {

using namespace wclb;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- configuration ------------------------------------------------------------

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw UsageError("config parse error in '" + path + "': " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("config must be a JSON object");
    return cfg;
}

// Global keys accepted by every command alongside its own schema.
const std::vector<std::string> kGlobalKeys = {"emit", "out", "threads"};

void check_schema(const json& cfg, std::vector<std::string> keys) {
    keys.insert(keys.end(), kGlobalKeys.begin(), kGlobalKeys.end());
    for (const auto& item : cfg.items()) {
        if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
            throw UsageError("unknown config key '" + item.key() + "'");
        }
    }
}

template <typename T>
std::optional<T> config_get(const json& cfg, const std::string& key) {
    if (!cfg.contains(key)) return std::nullopt;
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError("config key '" + key + "' has the wrong type");
    }
}

template <typename T>
T pick(const std::optional<T>& flag, const json& cfg, const std::string& key,
       T fallback) {
    if (flag) return *flag;
    if (auto v = config_get<T>(cfg, key)) return *v;
    return fallback;
}

template <typename T>
T need(const std::optional<T>& flag, const json& cfg, const std::string& key) {
    if (flag) return *flag;
    if (auto v = config_get<T>(cfg, key)) return *v;
    throw UsageError("missing required parameter '--" + key + "'");
}

// ---- small parsers --------------------------------------------------------------

Vec parse_vec(const std::string& text) {
    std::vector<double> vals;
    std::istringstream is(text);
    std::string cell;
    while (std::getline(is, cell, ',')) {
        try {
            size_t used = 0;
            vals.push_back(std::stod(cell, &used));
            while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw UsageError("cannot parse vector cell '" + cell + "'");
        }
    }
    if (vals.empty()) throw UsageError("empty vector literal '" + text + "'");
    Vec v(static_cast<long>(vals.size()));
    for (size_t i = 0; i < vals.size(); ++i) v(static_cast<long>(i)) = vals[i];
    return v;
}

std::vector<long> parse_longs(const std::string& text) {
    std::vector<long> out;
    std::istringstream is(text);
    std::string cell;
    while (std::getline(is, cell, ',')) {
        try {
            out.push_back(std::stol(cell));
        } catch (const std::exception&) {
            throw UsageError("cannot parse index '" + cell + "'");
        }
    }
    return out;
}

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// ---- output ---------------------------------------------------------------------

std::string iso_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Emitter {
  public:
    Emitter(std::string mode, std::string dir)
        : mode_(std::move(mode)), dir_(std::move(dir)) {
        if (mode_ != "csv" && mode_ != "json" && mode_ != "both") {
            throw UsageError("--emit must be csv, json, or both");
        }
    }

    bool wants_json() const { return mode_ != "csv"; }
    bool wants_csv() const { return mode_ != "json"; }

    // Canonical report plus a sidecar with the non-reproducible metadata.
    void json_report(const std::string& name, const json& canonical,
                     double runtime_seconds) const {
        if (!wants_json()) return;
        write_file(name + ".json", canonical.dump(2) + "\n");
        const json sidecar = {{"generated_at", iso_utc_now()},
                              {"runtime_seconds", runtime_seconds},
                              {"threads", max_threads()}};
        write_file(name + ".sidecar.json", sidecar.dump(2) + "\n");
    }

    void csv(const std::string& name, const std::string& content) const {
        if (!wants_csv()) return;
        write_file(name + ".csv", content);
    }

    void frame(const std::string& name, const Mat& points) const {
        std::filesystem::create_directories(dir_);
        const std::string path = dir_ + "/" + name + ".wclb";
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write '" + path + "'");
        write_wclb_frame(os, points);
        std::cout << "wrote " << path << "\n";
    }

  private:
    void write_file(const std::string& filename, const std::string& content) const {
        std::filesystem::create_directories(dir_);
        const std::string path = dir_ + "/" + filename;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write '" + path + "'");
        os << content;
        std::cout << "wrote " << path << "\n";
    }

    std::string mode_;
    std::string dir_;
};

std::string kv_csv(const std::vector<std::pair<std::string, double>>& rows) {
    std::ostringstream os;
    os << "name,value\n";
    for (const auto& [k, v] : rows) os << k << ',' << fmt17(v) << '\n';
    return os.str();
}

void print_report_line(const VerificationReport& rep) {
    std::cout << (rep.pass ? "[PASS] " : "[FAIL] ") << rep.claim
              << "  estimate=" << rep.estimate << "  bound=" << rep.bound
              << "  margin=" << rep.margin;
    if (!rep.location.empty()) std::cout << "  (" << rep.location << ")";
    std::cout << "\n";
}

std::string report_csv(const std::vector<VerificationReport>& reps) {
    std::ostringstream os;
    os << "claim,estimate,bound,margin,pass\n";
    for (const auto& r : reps) {
        os << r.claim << ',' << fmt17(r.estimate) << ',' << fmt17(r.bound) << ','
           << fmt17(r.margin) << ',' << (r.pass ? 1 : 0) << '\n';
    }
    return os.str();
}

// ---- shared builders ---------------------------------------------------------------

struct DriftFlags {
    std::optional<std::string> kind;
    std::optional<double> c0, amp, bump_radius;
    std::optional<int> dim;
    std::optional<std::string> certify_mode;

    void add(CLI::App* cmd) {
        cmd->add_option("--drift", kind, "drift kind: linear | perturbed");
        cmd->add_option("--c0", c0, "linear pull rate (default 1)");
        cmd->add_option("--d", dim, "state dimension (default 2)");
        cmd->add_option("--amp", amp, "bump amplitude for the perturbed kind");
        cmd->add_option("--bump-radius", bump_radius,
                        "bump radius for the perturbed kind");
        cmd->add_option("--certify", certify_mode,
                        "certificate mode: analytic | numeric");
    }

    static std::vector<std::string> keys() {
        return {"drift", "c0", "d", "amp", "bump-radius", "certify"};
    }

    DriftSpec build(const json& cfg) const {
        const std::string k = pick(kind, cfg, "drift", std::string("linear"));
        const int d = pick(dim, cfg, "d", 2);
        const double rate = pick(c0, cfg, "c0", 1.0);
        if (d < 1) throw UsageError("--d must be positive");
        DriftSpec spec =
            k == "linear"
                ? DriftSpec::linear(d, rate)
                : k == "perturbed"
                      ? DriftSpec::perturbed_linear(
                            d, rate, pick(amp, cfg, "amp", 0.2),
                            pick(bump_radius, cfg, "bump-radius", 1.0))
                      : throw UsageError("unknown drift kind '" + k + "'");
        const std::string mode =
            pick(certify_mode, cfg, "certify",
                 std::string(k == "linear" ? "analytic" : "numeric"));
        spec.certificate = certify(spec, mode);
        return spec;
    }
};

struct KappaFlags {
    std::optional<double> a, L, eps;

    void add(CLI::App* cmd) {
        cmd->add_option("--kappa-a", a, "weight cap curvature override (default 12K)");
        cmd->add_option("--kappa-L", L, "weight growth allowance override (default c/6)");
        cmd->add_option("--kappa-eps", eps,
                        "weight tail curvature margin override (default c/(42d))");
    }

    static std::vector<std::string> keys() {
        return {"kappa-a", "kappa-L", "kappa-eps"};
    }

    static std::optional<double> merge(const std::optional<double>& flag,
                                       const json& cfg, const std::string& key) {
        return flag ? flag : config_get<double>(cfg, key);
    }

    KappaFn build(const AssumptionCertificate& cert, const json& cfg) const {
        return KappaFn::build(cert, merge(a, cfg, "kappa-a"),
                              merge(L, cfg, "kappa-L"),
                              merge(eps, cfg, "kappa-eps"));
    }
};

// Built-in bounded-Lipschitz payoff for mean-field-game runs: each
// coordinate is eps * sin(x_j - y_j).
PayoffSpec sine_payoff(double eps, int d) {
    PayoffSpec payoff;
    payoff.fn = [eps](const Vec& u, const Vec& v) {
        Vec out(u.size());
        for (long j = 0; j < u.size(); ++j) out(j) = eps * std::sin(u(j) - v(j));
        return out;
    };
    payoff.sup_norm = eps * std::sqrt(static_cast<double>(d));
    payoff.lipschitz = eps;
    return payoff;
}

ParticleDriftSpec build_game(const DriftSpec& confinement, int particles,
                             double payoff_eps) {
    if (particles < 2 || particles % 2 != 0) {
        throw UsageError("--particles must be an even count of at least 2");
    }
    return build_mean_field_game(sine_payoff(payoff_eps, confinement.dim()),
                                 particles / 2, confinement);
}

std::pair<double, double> resolve_pair(const DriftSpec& drift, const KappaFn& kappa,
                                       const std::string& solve,
                                       const std::optional<double>& delta_flag,
                                       const std::optional<double>& temp_flag,
                                       const json& cfg) {
    if (solve == "alternate") {
        const SolveResult res = solve_admissible_pair(
            drift, kappa, SolveStrategy::Alternate, pick(delta_flag, cfg, "delta", 0.0),
            pick(temp_flag, cfg, "T", 0.0));
        if (!res.ok()) {
            throw GateViolation("no admissible (delta, T) found after " +
                                std::to_string(res.iterations) + " iterations");
        }
        return {res.delta, res.temperature};
    }
    if (solve != "validate") throw UsageError("--solve must be validate or alternate");
    return {need(delta_flag, cfg, "delta"), need(temp_flag, cfg, "T")};
}

ContractionEstimator parse_estimator(const std::string& name) {
    if (name == "quadrature") return ContractionEstimator::Quadrature;
    if (name == "mc") return ContractionEstimator::MonteCarlo;
    throw UsageError("--estimator must be quadrature or mc");
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

// ---- constants ----------------------------------------------------------------------

struct ConstantsCmd {
    DriftFlags drift;
    KappaFlags kappa;
    std::optional<double> delta, temperature;
    std::optional<std::string> solve, scan;
    std::optional<int> particles;
    std::optional<double> payoff_eps;

    void add(CLI::App* cmd) {
        drift.add(cmd);
        kappa.add(cmd);
        cmd->add_option("--delta", delta, "step size");
        cmd->add_option("--T", temperature, "temperature");
        cmd->add_option("--solve", solve, "validate | alternate (default validate)");
        cmd->add_option("--scan", scan,
                        "log-spaced step scan 'lo:hi:n' emitted as CSV");
        cmd->add_option("--particles", particles,
                        "particle count for the mean-field-game variant");
        cmd->add_option("--payoff-eps", payoff_eps,
                        "payoff amplitude for the mean-field-game variant");
    }

    std::vector<std::string> keys() const {
        auto k = DriftFlags::keys();
        auto kk = KappaFlags::keys();
        k.insert(k.end(), kk.begin(), kk.end());
        k.insert(k.end(), {"delta", "T", "solve", "scan", "particles", "payoff-eps"});
        return k;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const DriftSpec spec = drift.build(cfg);
        const KappaFn weight = kappa.build(*spec.certificate, cfg);
        const std::string mode = pick(solve, cfg, "solve", std::string("validate"));
        const int n_particles = pick(particles, cfg, "particles", 0);

        ConstantsReport report = [&] {
            if (n_particles > 0) {
                const ParticleDriftSpec pspec = build_game(
                    spec, n_particles, pick(payoff_eps, cfg, "payoff-eps", 0.05));
                return particle_constants(pspec, weight,
                                          need(delta, cfg, "delta"),
                                          need(temperature, cfg, "T"));
            }
            if (mode == "alternate") {
                const SolveResult res = solve_admissible_pair(
                    spec, weight, SolveStrategy::Alternate,
                    pick(delta, cfg, "delta", 0.0), pick(temperature, cfg, "T", 0.0));
                return res.report;
            }
            if (mode != "validate") {
                throw UsageError("--solve must be validate or alternate");
            }
            return single_chain_constants(spec, weight, need(delta, cfg, "delta"),
                                          need(temperature, cfg, "T"));
        }();

        std::cout << report.to_table();
        emit.json_report("constants", report.to_json(), elapsed(t0));
        if (emit.wants_csv()) {
            std::vector<std::pair<std::string, double>> rows = {
                {"delta", report.delta},     {"T", report.temperature},
                {"delta1", report.delta1},   {"delta2", report.delta2},
                {"delta3", report.delta3},   {"delta4", report.delta4},
                {"delta0", report.delta0},   {"T1", report.T1},
                {"T2", report.T2},           {"T3", report.T3},
                {"T0", report.T0},           {"r_bar", report.r_bar},
                {"rate", report.rate},       {"prefactor", report.prefactor},
                {"poincare", report.poincare},
                {"kappa_sup", report.kappa_sup},
                {"kappa_grad_sup", report.kappa_grad_sup},
                {"admissible", report.admissible ? 1.0 : 0.0},
            };
            emit.csv("constants", kv_csv(rows));
        }
        const std::string scan_spec = pick(scan, cfg, "scan", std::string());
        if (!scan_spec.empty()) emit_scan(scan_spec, spec, weight, report, emit);
        return 0;
    }

    static void emit_scan(const std::string& scan_spec, const DriftSpec& spec,
                          const KappaFn& weight, const ConstantsReport& base,
                          const Emitter& emit) {
        double lo = 0, hi = 0;
        long count = 0;
        char c1 = 0, c2 = 0;
        std::istringstream is(scan_spec);
        if (!(is >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' ||
            lo <= 0 || hi <= lo || count < 2) {
            throw UsageError("--scan expects 'lo:hi:n' with 0 < lo < hi, n >= 2");
        }
        std::ostringstream os;
        os << "delta,delta0,T0,rate,prefactor,poincare,admissible\n";
        for (long i = 0; i < count; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(count - 1);
            const double d = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
            const ConstantsReport r =
                single_chain_constants(spec, weight, d, base.temperature);
            os << fmt17(d) << ',' << fmt17(r.delta0) << ',' << fmt17(r.T0) << ','
               << fmt17(r.rate) << ',' << fmt17(r.prefactor) << ','
               << fmt17(r.poincare) << ',' << (r.admissible ? 1 : 0) << '\n';
        }
        emit.csv("constants-scan", os.str());
    }
};

// ---- kappa -----------------------------------------------------------------------------

struct KappaCmd {
    KappaFlags overrides;
    std::optional<double> R, c, K, delta, temperature;
    std::optional<int> dim;
    std::optional<long> profile_points, samples;
    std::optional<std::string> estimator;
    bool verify = false;
    std::optional<std::uint64_t> seed;

    void add(CLI::App* cmd) {
        cmd->add_option("--R", R, "contraction ball radius (default 1)");
        cmd->add_option("--c", c, "contraction rate outside the ball (default 1)");
        cmd->add_option("--K", K, "expansion allowance inside the ball (default 1)");
        cmd->add_option("--d", dim, "dimension (default 2)");
        overrides.add(cmd);
        cmd->add_option("--profile-points", profile_points,
                        "rows in the radial profile CSV (default 512)");
        cmd->add_flag("--verify", verify,
                      "check the two smoothing inequalities at (delta, T)");
        cmd->add_option("--delta", delta, "step size for --verify");
        cmd->add_option("--T", temperature, "temperature for --verify");
        cmd->add_option("--estimator", estimator,
                        "verification estimator: quadrature | mc");
        cmd->add_option("--samples", samples, "Monte Carlo samples per grid point");
        cmd->add_option("--seed", seed, "Monte Carlo seed");
    }

    std::vector<std::string> keys() const {
        auto k = KappaFlags::keys();
        k.insert(k.end(), {"R", "c", "K", "d", "profile-points", "verify", "delta",
                           "T", "estimator", "samples", "seed"});
        return k;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        AssumptionCertificate cert;
        cert.radius = pick(R, cfg, "R", 1.0);
        cert.contraction = pick(c, cfg, "c", 1.0);
        cert.expansion = pick(K, cfg, "K", 1.0);
        cert.lipschitz = cert.expansion;
        cert.dim = pick(dim, cfg, "d", 2);
        cert.method = "analytic";
        const KappaFn weight = overrides.build(cert, cfg);

        json out = {{"weight", weight.to_json()},
                    {"derived",
                     {{"sup_norm", weight.sup_norm()},
                      {"grad_sup_norm", weight.grad_sup_norm()},
                      {"seam_radius", weight.seam_radius()},
                      {"support_radius", weight.support_radius()}}}};

        int exit_code = 0;
        const bool do_verify = verify || pick<bool>({}, cfg, "verify", false);
        std::vector<VerificationReport> reps;
        if (do_verify) {
            KappaVerifyOptions opts;
            const std::string est =
                pick(estimator, cfg, "estimator", std::string("quadrature"));
            if (est == "mc") {
                opts.estimator = KappaEstimator::MonteCarlo;
            } else if (est != "quadrature") {
                throw UsageError("--estimator must be quadrature or mc");
            }
            opts.samples = pick<long>(samples, cfg, "samples", 200000);
            opts.seed = pick<std::uint64_t>(seed, cfg, "seed", 2024);
            const VerificationReport rep = verify_kappa_conditions(
                weight, need(delta, cfg, "delta"), need(temperature, cfg, "T"),
                nullptr, opts);
            print_report_line(rep);
            out["verification"] = rep.to_json();
            reps.push_back(rep);
            if (!rep.pass) exit_code = 2;
        }
        emit.json_report("kappa", out, elapsed(t0));
        if (emit.wants_csv()) {
            const long rows = pick<long>(profile_points, cfg, "profile-points", 512);
            if (rows < 2) throw UsageError("--profile-points must be at least 2");
            std::ostringstream os;
            os << "radius,kappa,grad_norm\n";
            const double r_max = 1.05 * weight.support_radius();
            for (long i = 0; i < rows; ++i) {
                const double r =
                    r_max * static_cast<double>(i) / static_cast<double>(rows - 1);
                os << fmt17(r) << ',' << fmt17(weight.radial(r)) << ','
                   << fmt17(std::abs(weight.radial_derivative(r))) << '\n';
            }
            emit.csv("kappa-profile", os.str());
            if (!reps.empty()) emit.csv("kappa-verify", report_csv(reps));
        }
        return exit_code;
    }
};

// ---- simulate -------------------------------------------------------------------------

struct SimulateCmd {
    DriftFlags drift;
    KappaFlags kappa;
    std::optional<double> delta, temperature, sigma0, payoff_eps;
    std::optional<long> steps;
    std::optional<int> replicas, particles;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode, x0, y0, mean0, record;
    bool frames = false;

    void add(CLI::App* cmd) {
        drift.add(cmd);
        kappa.add(cmd);
        cmd->add_option("--delta", delta, "step size");
        cmd->add_option("--T", temperature, "temperature");
        cmd->add_option("--steps", steps, "chain length (default 100)");
        cmd->add_option("--replicas", replicas, "ensemble replicas (default 256)");
        cmd->add_option("--seed", seed, "noise seed (default 2024)");
        cmd->add_option("--mode", mode, "coupled | ensemble (default coupled)");
        cmd->add_option("--x0", x0, "first initial state 'v1,v2,...'");
        cmd->add_option("--y0", y0, "second initial state (coupled mode)");
        cmd->add_option("--mean0", mean0, "ensemble initial mean");
        cmd->add_option("--sigma0", sigma0, "ensemble initial spread (default 0)");
        cmd->add_option("--record", record, "steps to record 'k1,k2,...'");
        cmd->add_option("--particles", particles, "mean-field-game particle count");
        cmd->add_option("--payoff-eps", payoff_eps, "mean-field payoff amplitude");
        cmd->add_flag("--frames", frames, "write binary sample-cloud frames");
    }

    std::vector<std::string> keys() const {
        auto k = DriftFlags::keys();
        auto kk = KappaFlags::keys();
        k.insert(k.end(), kk.begin(), kk.end());
        k.insert(k.end(), {"delta", "T", "steps", "replicas", "seed", "mode", "x0",
                           "y0", "mean0", "sigma0", "record", "particles",
                           "payoff-eps", "frames"});
        return k;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const DriftSpec spec = drift.build(cfg);
        const KappaFn weight = kappa.build(*spec.certificate, cfg);
        const double d_step = need(delta, cfg, "delta");
        const double temp = need(temperature, cfg, "T");
        const long n_steps = pick<long>(steps, cfg, "steps", 100);
        const std::uint64_t sd = pick<std::uint64_t>(seed, cfg, "seed", 2024);
        const std::string run_mode = pick(mode, cfg, "mode", std::string("coupled"));
        const std::vector<long> record_at =
            parse_longs(pick(record, cfg, "record", std::string()));
        const int n_particles = pick(particles, cfg, "particles", 0);

        if (run_mode == "coupled") {
            const Vec a = parse_vec(need(x0, cfg, "x0"));
            const Vec b = parse_vec(need(y0, cfg, "y0"));
            CoupledTrajectory traj = [&] {
                if (n_particles > 0) {
                    const ParticleDriftSpec pspec = build_game(
                        spec, n_particles, pick(payoff_eps, cfg, "payoff-eps", 0.05));
                    const int d = spec.dim();
                    if (a.size() != n_particles * d || b.size() != n_particles * d) {
                        throw UsageError("particle states need particles*d entries");
                    }
                    Mat A(n_particles, d), B(n_particles, d);
                    for (int i = 0; i < n_particles; ++i)
                        for (int j = 0; j < d; ++j) {
                            A(i, j) = a(i * d + j);
                            B(i, j) = b(i * d + j);
                        }
                    const ChainConfig c2{pspec, d_step, temp, n_steps, sd, 1};
                    return simulate_particles_coupled(A, B, c2, weight, record_at);
                }
                const ChainConfig c1{spec, d_step, temp, n_steps, sd, 1};
                return simulate_coupled(a, b, c1, weight, record_at);
            }();
            const json out = {{"mode", "coupled"},
                              {"steps", n_steps},
                              {"recorded", traj.steps.size()},
                              {"final_distance", traj.distance.back()},
                              {"final_rho", traj.rho.back()},
                              {"diverged", traj.diverged},
                              {"divergence_step", traj.divergence_step}};
            emit.json_report("simulate", out, elapsed(t0));
            if (emit.wants_csv()) {
                std::ostringstream os;
                write_trajectory_csv(os, traj);
                emit.csv("simulate-trajectory", os.str());
            }
            std::cout << "coupled chain: final distance "
                      << traj.distance.back() << ", final semimetric "
                      << traj.rho.back() << (traj.diverged ? " (diverged)" : "")
                      << "\n";
            return 0;
        }
        if (run_mode != "ensemble") throw UsageError("--mode must be coupled or ensemble");

        const Vec mean = parse_vec(need(mean0, cfg, "mean0"));
        const double spread = pick(sigma0, cfg, "sigma0", 0.0);
        const InitialSampler sampler =
            spread > 0 ? gaussian_sampler(sd, mean, spread) : dirac_sampler(mean);
        const ChainConfig c3{spec, d_step, temp, n_steps, sd,
                             pick(replicas, cfg, "replicas", 256)};
        const std::vector<EmpiricalMeasure> ms = ensemble(sampler, c3, record_at);
        json snaps = json::array();
        for (const auto& m : ms) {
            snaps.push_back({{"step", m.step},
                             {"n", m.n()},
                             {"excluded", m.diverged_excluded}});
            if (frames || pick<bool>({}, cfg, "frames", false)) {
                emit.frame("measure-" + std::to_string(m.step), m.points);
            }
        }
        emit.json_report("simulate", json{{"mode", "ensemble"}, {"snapshots", snaps}},
                         elapsed(t0));
        if (emit.wants_csv()) {
            std::ostringstream os;
            write_measures_csv(os, ms);
            emit.csv("simulate-measures", os.str());
        }
        std::cout << "ensemble: " << ms.size() << " snapshot(s)\n";
        return 0;
    }
};

// ---- ot --------------------------------------------------------------------------------

struct OtCmd {
    std::optional<std::string> mu, nu, cost, constants_path;
    std::optional<double> p;
    std::optional<int> particles;

    void add(CLI::App* cmd) {
        cmd->add_option("--mu", mu, "first sample cloud (.csv or .wclb)");
        cmd->add_option("--nu", nu, "second sample cloud (.csv or .wclb)");
        cmd->add_option("--cost", cost,
                        "euclidean | rho | rho-tilde (default euclidean)");
        cmd->add_option("--p", p, "outer exponent for euclidean (default 2)");
        cmd->add_option("--constants", constants_path,
                        "constants report JSON supplying the weight and T "
                        "(required for rho costs)");
        cmd->add_option("--particles", particles,
                        "particles per state for rho-tilde");
    }

    std::vector<std::string> keys() const {
        return {"mu", "nu", "cost", "p", "constants", "particles"};
    }

    static Mat load_cloud(const std::string& path) {
        if (path.size() >= 5 && path.substr(path.size() - 5) == ".wclb") {
            std::ifstream is(path, std::ios::binary);
            if (!is) throw UsageError("cannot open cloud '" + path + "'");
            return read_wclb_frame(is);
        }
        std::ifstream is(path);
        if (!is) throw UsageError("cannot open cloud '" + path + "'");
        try {
            return read_matrix_csv(is);
        } catch (const std::runtime_error& e) {
            throw UsageError("cloud '" + path + "': " + e.what());
        }
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const Mat a = load_cloud(need(mu, cfg, "mu"));
        const Mat b = load_cloud(need(nu, cfg, "nu"));
        const std::string kind = pick(cost, cfg, "cost", std::string("euclidean"));
        const double pv = pick(p, cfg, "p", 2.0);

        if (kind != "euclidean" && kind != "rho" && kind != "rho-tilde") {
            throw UsageError("--cost must be euclidean, rho, or rho-tilde");
        }
        const CostSpec spec = [&] {
            if (kind == "euclidean") return CostSpec::euclidean(pv);
            const std::string path = need(constants_path, cfg, "constants");
            std::ifstream is(path);
            if (!is) throw UsageError("cannot open constants report '" + path + "'");
            json j;
            try {
                is >> j;
            } catch (const json::exception& e) {
                throw UsageError("constants report parse error: " + std::string(e.what()));
            }
            const ConstantsReport report = ConstantsReport::from_json(j);
            const KappaFn weight = KappaFn::from_json(report.kappa_params);
            if (kind == "rho") return CostSpec::rho_cost(weight, report.temperature);
            return CostSpec::rho_tilde_cost(weight, report.temperature,
                                            pick(particles, cfg, "particles", 1));
        }();

        const EmpiricalMeasure ma{a, 0, 0}, mb{b, 0, 0};
        const double dist = wasserstein(ma, mb, spec);
        const json out = {{"cost", kind},
                          {"p", pv},
                          {"n", a.rows()},
                          {"d", a.cols()},
                          {"distance", dist}};
        emit.json_report("ot", out, elapsed(t0));
        emit.csv("ot", "cost,p,n,d,distance\n" + kind + ',' + fmt17(pv) + ',' +
                           std::to_string(a.rows()) + ',' +
                           std::to_string(a.cols()) + ',' + fmt17(dist) + '\n');
        std::cout << "transport distance (" << kind << "): " << fmt17(dist) << "\n";
        return 0;
    }
};

// ---- verify ---------------------------------------------------------------------------

struct VerifyCommon {
    DriftFlags drift;
    KappaFlags kappa;
    std::optional<double> delta, temperature;
    std::optional<std::string> solve, estimator;
    std::optional<long> samples;
    std::optional<std::uint64_t> seed;

    void add(CLI::App* cmd) {
        drift.add(cmd);
        kappa.add(cmd);
        cmd->add_option("--delta", delta, "step size");
        cmd->add_option("--T", temperature, "temperature");
        cmd->add_option("--solve", solve,
                        "validate | alternate (alternate derives (delta, T))");
        cmd->add_option("--estimator", estimator, "quadrature | mc");
        cmd->add_option("--samples", samples, "Monte Carlo samples");
        cmd->add_option("--seed", seed, "Monte Carlo seed");
    }

    std::vector<std::string> keys() const {
        auto k = DriftFlags::keys();
        auto kk = KappaFlags::keys();
        k.insert(k.end(), kk.begin(), kk.end());
        k.insert(k.end(), {"delta", "T", "solve", "estimator", "samples", "seed"});
        return k;
    }

    AnalysisOptions options(const json& cfg) const {
        AnalysisOptions opts;
        opts.estimator = parse_estimator(
            pick(estimator, cfg, "estimator", std::string("quadrature")));
        opts.samples = pick<long>(samples, cfg, "samples", 100000);
        opts.seed = pick<std::uint64_t>(seed, cfg, "seed", 2024);
        return opts;
    }
};

std::string pairs_csv(const json& details) {
    std::ostringstream os;
    os << "pair,x_norm,y_norm,distance,excess,margin,coincident,pass\n";
    long i = 0;
    for (const auto& p : details.at("pairs")) {
        os << i++ << ',' << fmt17(p.at("x_norm").get<double>()) << ','
           << fmt17(p.at("y_norm").get<double>()) << ','
           << fmt17(p.at("distance").get<double>()) << ','
           << fmt17(p.at("excess").get<double>()) << ','
           << fmt17(p.at("margin").get<double>()) << ','
           << (p.at("coincident").get<bool>() ? 1 : 0) << ','
           << (p.at("pass").get<bool>() ? 1 : 0) << '\n';
    }
    return os.str();
}

struct VerifyRhoCmd {
    VerifyCommon common;

    void add(CLI::App* cmd) { common.add(cmd); }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, common.keys());
        const DriftSpec spec = common.drift.build(cfg);
        const KappaFn weight = common.kappa.build(*spec.certificate, cfg);
        const auto [d_step, temp] =
            resolve_pair(spec, weight, pick(common.solve, cfg, "solve", std::string("validate")),
                         common.delta, common.temperature, cfg);
        const VerificationReport rep = one_step_rho_contraction(
            spec, weight, d_step, temp, {}, common.options(cfg));
        print_report_line(rep);
        emit.json_report("verify-rho-onestep", rep.to_json(), elapsed(t0));
        if (emit.wants_csv()) emit.csv("verify-rho-onestep", pairs_csv(rep.details));
        return rep.pass ? 0 : 2;
    }
};

struct VerifyEnvelopeCmd {
    VerifyCommon common;
    std::optional<long> kmax;
    std::optional<int> replicas;
    std::optional<std::string> checkpoints, mu_mean, nu_mean;
    std::optional<double> mu_sigma, nu_sigma;

    void add(CLI::App* cmd) {
        common.add(cmd);
        cmd->add_option("--kmax", kmax, "horizon in steps (default 50)");
        cmd->add_option("--replicas", replicas, "coupled replicas (default 64)");
        cmd->add_option("--checkpoints", checkpoints, "steps to report 'k1,k2,...'");
        cmd->add_option("--mu0-mean", mu_mean, "first initial mean 'v1,...'");
        cmd->add_option("--mu0-sigma", mu_sigma, "first initial spread");
        cmd->add_option("--nu0-mean", nu_mean, "second initial mean");
        cmd->add_option("--nu0-sigma", nu_sigma, "second initial spread");
    }

    std::vector<std::string> keys() const {
        auto k = common.keys();
        k.insert(k.end(), {"kmax", "replicas", "checkpoints", "mu0-mean",
                           "mu0-sigma", "nu0-mean", "nu0-sigma"});
        return k;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const DriftSpec spec = common.drift.build(cfg);
        const KappaFn weight = common.kappa.build(*spec.certificate, cfg);
        const auto [d_step, temp] =
            resolve_pair(spec, weight, pick(common.solve, cfg, "solve", std::string("validate")),
                         common.delta, common.temperature, cfg);
        const AnalysisOptions opts = common.options(cfg);

        const Vec m_mu = parse_vec(need(mu_mean, cfg, "mu0-mean"));
        const Vec m_nu = parse_vec(need(nu_mean, cfg, "nu0-mean"));
        const double s_mu = pick(mu_sigma, cfg, "mu0-sigma", 0.0);
        const double s_nu = pick(nu_sigma, cfg, "nu0-sigma", 0.0);
        const InitialSampler mu0 = s_mu > 0
                                       ? gaussian_sampler(opts.seed ^ 1, m_mu, s_mu)
                                       : dirac_sampler(m_mu);
        const InitialSampler nu0 = s_nu > 0
                                       ? gaussian_sampler(opts.seed ^ 2, m_nu, s_nu)
                                       : dirac_sampler(m_nu);

        const std::vector<VerificationReport> reps = w2_contraction_envelope(
            spec, weight, d_step, temp, mu0, nu0, pick<long>(kmax, cfg, "kmax", 50),
            pick(replicas, cfg, "replicas", 64),
            parse_longs(pick(checkpoints, cfg, "checkpoints", std::string())), opts);

        json arr = json::array();
        bool all_pass = true;
        std::ostringstream os;
        os << "k,exact_w2,coupling_w2,bound,margin,pass\n";
        for (const auto& r : reps) {
            print_report_line(r);
            arr.push_back(r.to_json());
            all_pass = all_pass && r.pass;
            os << r.details.at("k").get<long>() << ',' << fmt17(r.estimate) << ','
               << fmt17(r.details.at("coupling_w2").get<double>()) << ','
               << fmt17(r.bound) << ',' << fmt17(r.margin) << ','
               << (r.pass ? 1 : 0) << '\n';
        }
        emit.json_report("verify-w2-envelope", arr, elapsed(t0));
        emit.csv("verify-w2-envelope", os.str());
        return all_pass ? 0 : 2;
    }
};

struct VerifyParticlesCmd {
    VerifyCommon common;
    std::optional<int> particles;
    std::optional<double> payoff_eps;

    void add(CLI::App* cmd) {
        common.add(cmd);
        cmd->add_option("--particles", particles, "particle count (default 4)");
        cmd->add_option("--payoff-eps", payoff_eps,
                        "payoff amplitude (default 0.05)");
    }

    std::vector<std::string> keys() const {
        auto k = common.keys();
        k.insert(k.end(), {"particles", "payoff-eps"});
        return k;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const DriftSpec spec = common.drift.build(cfg);
        const KappaFn weight = common.kappa.build(*spec.certificate, cfg);
        const ParticleDriftSpec pspec =
            build_game(spec, pick(particles, cfg, "particles", 4),
                       pick(payoff_eps, cfg, "payoff-eps", 0.05));
        const VerificationReport rep = particle_contraction(
            pspec, weight, need(common.delta, cfg, "delta"),
            need(common.temperature, cfg, "T"), {}, common.options(cfg));
        print_report_line(rep);
        emit.json_report("verify-particles", rep.to_json(), elapsed(t0));
        if (emit.wants_csv()) emit.csv("verify-particles", pairs_csv(rep.details));
        return rep.pass ? 0 : 2;
    }
};

struct VerifyPoincareCmd {
    VerifyCommon common;
    std::optional<long> k;
    std::optional<std::string> x;

    void add(CLI::App* cmd) {
        common.add(cmd);
        cmd->add_option("--k", k, "kernel step count (default 1)");
        cmd->add_option("--x", x, "starting state 'v1,v2,...'");
    }

    std::vector<std::string> keys() const {
        auto kk = common.keys();
        kk.insert(kk.end(), {"k", "x"});
        return kk;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const DriftSpec spec = common.drift.build(cfg);
        const KappaFn weight = common.kappa.build(*spec.certificate, cfg);
        const auto [d_step, temp] =
            resolve_pair(spec, weight, pick(common.solve, cfg, "solve", std::string("validate")),
                         common.delta, common.temperature, cfg);
        const Vec start = parse_vec(need(x, cfg, "x"));
        const VerificationReport rep =
            poincare_check(spec, weight, d_step, temp, pick<long>(k, cfg, "k", 1),
                           start, {}, common.options(cfg));
        print_report_line(rep);
        emit.json_report("verify-poincare", rep.to_json(), elapsed(t0));
        if (emit.wants_csv()) {
            std::ostringstream os;
            os << "function,excess,margin,pass\n";
            for (const auto& f : rep.details.at("functions")) {
                os << f.at("name").get<std::string>() << ','
                   << fmt17(f.at("excess").get<double>()) << ','
                   << fmt17(f.at("margin").get<double>()) << ','
                   << (f.at("pass").get<bool>() ? 1 : 0) << '\n';
            }
            emit.csv("verify-poincare", os.str());
        }
        return rep.pass ? 0 : 2;
    }
};

struct VerifyGradCommuteCmd {
    VerifyCommon common;
    std::optional<long> k;
    std::optional<std::string> x, fn;

    void add(CLI::App* cmd) {
        common.add(cmd);
        cmd->add_option("--k", k, "kernel step count (default 1)");
        cmd->add_option("--x", x, "evaluation point 'v1,v2,...'");
        cmd->add_option("--fn", fn,
                        "test function name from the built-in family "
                        "(default squared-norm)");
    }

    std::vector<std::string> keys() const {
        auto kk = common.keys();
        kk.insert(kk.end(), {"k", "x", "fn"});
        return kk;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const DriftSpec spec = common.drift.build(cfg);
        const Vec point = parse_vec(need(x, cfg, "x"));
        const std::string fname =
            pick(fn, cfg, "fn", std::string("squared-norm"));
        const auto family = default_test_functions(spec.dim());
        const auto it = std::find_if(family.begin(), family.end(),
                                     [&](const TestFunction& t) {
                                         return t.name == fname;
                                     });
        if (it == family.end()) {
            std::string names;
            for (const auto& t : family) names += (names.empty() ? "" : ", ") + t.name;
            throw UsageError("unknown test function '" + fname +
                             "'; available: " + names);
        }
        const VerificationReport rep = gradient_commutation_linear(
            spec, need(common.delta, cfg, "delta"),
            need(common.temperature, cfg, "T"), pick<long>(k, cfg, "k", 1),
            it->f, point, common.options(cfg));
        print_report_line(rep);
        emit.json_report("verify-grad-commute", rep.to_json(), elapsed(t0));
        emit.csv("verify-grad-commute", report_csv({rep}));
        return rep.pass ? 0 : 2;
    }
};

// ---- bounds ----------------------------------------------------------------------------

struct BoundsTailCmd {
    std::optional<long> n;
    std::optional<double> u, theta, C, C0, M;
    std::optional<std::string> constants_path;

    void add(CLI::App* cmd) {
        cmd->add_option("--n", n, "averaged steps");
        cmd->add_option("--u", u, "deviation level");
        cmd->add_option("--theta", theta, "per-step contraction rate");
        cmd->add_option("--C", C, "per-step smoothing constant");
        cmd->add_option("--C0", C0, "initial-law constant");
        cmd->add_option("--M", M, "weak-contraction prefactor");
        cmd->add_option("--constants", constants_path,
                        "constants report JSON filling theta, C, and M");
    }

    std::vector<std::string> keys() const {
        return {"n", "u", "theta", "C", "C0", "M", "constants"};
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        ConcentrationInput in;
        const std::string path = pick(constants_path, cfg, "constants", std::string());
        if (!path.empty()) {
            std::ifstream is(path);
            if (!is) throw UsageError("cannot open constants report '" + path + "'");
            json j;
            is >> j;
            in = ConcentrationInput::from_constants(ConstantsReport::from_json(j),
                                                    need(n, cfg, "n"),
                                                    need(u, cfg, "u"),
                                                    need(C0, cfg, "C0"));
        } else {
            in.n = need(n, cfg, "n");
            in.u = need(u, cfg, "u");
            in.theta = need(theta, cfg, "theta");
            in.C = need(C, cfg, "C");
            in.C0 = need(C0, cfg, "C0");
            in.M = need(M, cfg, "M");
        }
        const double bound = concentration_tail_bound(in);
        const json out = {{"n", in.n},     {"u", in.u}, {"theta", in.theta},
                          {"C", in.C},     {"C0", in.C0}, {"M", in.M},
                          {"bound", bound}};
        emit.json_report("bounds-tail", out, elapsed(t0));
        emit.csv("bounds-tail", kv_csv({{"n", static_cast<double>(in.n)},
                                        {"u", in.u},
                                        {"theta", in.theta},
                                        {"C", in.C},
                                        {"C0", in.C0},
                                        {"M", in.M},
                                        {"bound", bound}}));
        std::cout << "tail bound: " << fmt17(bound) << "\n";
        return 0;
    }
};

struct BoundsCiCmd {
    std::optional<double> t, delta, h, T, C0, M, alpha;
    bool one_sided = false;

    void add(CLI::App* cmd) {
        cmd->add_option("--t", t, "time horizon");
        cmd->add_option("--delta", delta, "step size");
        cmd->add_option("--h", h, "per-step contraction rate");
        cmd->add_option("--T", T, "temperature");
        cmd->add_option("--C0", C0, "initial-law constant (default 0)");
        cmd->add_option("--M", M, "weak-contraction prefactor (default 1)");
        cmd->add_option("--alpha", alpha, "failure probability (default 0.05)");
        cmd->add_flag("--one-sided", one_sided, "invert the one-sided bound");
    }

    std::vector<std::string> keys() const {
        return {"t", "delta", "h", "T", "C0", "M", "alpha", "one-sided"};
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const bool two_sided = !(one_sided || pick<bool>({}, cfg, "one-sided", false));
        const ConfidenceInterval ci = confidence_interval(
            need(t, cfg, "t"), need(delta, cfg, "delta"), need(h, cfg, "h"),
            need(T, cfg, "T"), pick(C0, cfg, "C0", 0.0), pick(M, cfg, "M", 1.0),
            pick(alpha, cfg, "alpha", 0.05), two_sided);
        const json out = {{"t", ci.t},
                          {"n", ci.n},
                          {"alpha", ci.alpha},
                          {"two_sided", ci.two_sided},
                          {"half_width", ci.half_width},
                          {"bound_at_half_width", ci.bound_at_half_width}};
        emit.json_report("bounds-ci", out, elapsed(t0));
        emit.csv("bounds-ci", kv_csv({{"t", ci.t},
                                      {"n", static_cast<double>(ci.n)},
                                      {"alpha", ci.alpha},
                                      {"two_sided", ci.two_sided ? 1.0 : 0.0},
                                      {"half_width", ci.half_width},
                                      {"bound_at_half_width", ci.bound_at_half_width}}));
        std::cout << "confidence half-width at alpha=" << ci.alpha << ": "
                  << fmt17(ci.half_width) << "\n";
        return 0;
    }
};

struct BoundsBiasCmd {
    std::optional<double> M, theta, w1, c2, delta;
    std::optional<long> n;

    void add(CLI::App* cmd) {
        cmd->add_option("--M", M, "weak-contraction prefactor");
        cmd->add_option("--n", n, "averaged steps");
        cmd->add_option("--theta", theta, "per-step contraction rate");
        cmd->add_option("--w1", w1, "initial transport distance");
        cmd->add_option("--c2", c2, "discretisation coefficient (optional)");
        cmd->add_option("--delta", delta, "step size (with --c2)");
    }

    std::vector<std::string> keys() const {
        return {"M", "n", "theta", "w1", "c2", "delta"};
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const double m = need(M, cfg, "M");
        const long steps = need(n, cfg, "n");
        const double th = need(theta, cfg, "theta");
        const double w = need(w1, cfg, "w1");
        const double long_run = bias_bound(m, steps, th, w);
        json out = {{"M", m}, {"n", steps}, {"theta", th},
                    {"w1", w}, {"bound", long_run}};
        std::vector<std::pair<std::string, double>> rows = {
            {"M", m}, {"n", static_cast<double>(steps)}, {"theta", th},
            {"w1", w}, {"bound", long_run}};
        const double c2v = pick(c2, cfg, "c2", -1.0);
        if (c2v >= 0) {
            const double total =
                bias_total(m, steps, th, w, c2v, need(delta, cfg, "delta"));
            out["c2"] = c2v;
            out["total"] = total;
            rows.push_back({"c2", c2v});
            rows.push_back({"total", total});
        }
        emit.json_report("bounds-bias", out, elapsed(t0));
        emit.csv("bounds-bias", kv_csv(rows));
        std::cout << "bias bound: " << fmt17(long_run) << "\n";
        return 0;
    }
};

struct BoundsEntropyCmd {
    std::optional<long> n;
    std::optional<double> delta, T, L, C, horizon;
    std::optional<std::string> x, y;

    void add(CLI::App* cmd) {
        cmd->add_option("--n", n, "step count (>= 2)");
        cmd->add_option("--delta", delta, "step size");
        cmd->add_option("--T", T, "temperature");
        cmd->add_option("--L", L, "drift Lipschitz constant");
        cmd->add_option("--C", C, "Hessian-Lipschitz constant (default 0)");
        cmd->add_option("--horizon", horizon, "time horizon c (n delta < c)");
        cmd->add_option("--x", x, "first endpoint 'v1,v2,...'");
        cmd->add_option("--y", y, "second endpoint");
    }

    std::vector<std::string> keys() const {
        return {"n", "delta", "T", "L", "C", "horizon", "x", "y"};
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        EntropyInput in;
        in.n = need(n, cfg, "n");
        in.delta = need(delta, cfg, "delta");
        in.temperature = need(T, cfg, "T");
        in.lipschitz = need(L, cfg, "L");
        in.hessian_lipschitz = pick(C, cfg, "C", 0.0);
        in.horizon = need(horizon, cfg, "horizon");
        in.x = parse_vec(need(x, cfg, "x"));
        in.y = parse_vec(need(y, cfg, "y"));
        const EntropyBounds b = entropy_bound_n_step(in);
        const json out = {{"n", in.n},
                          {"delta", in.delta},
                          {"T", in.temperature},
                          {"L", in.lipschitz},
                          {"C", in.hessian_lipschitz},
                          {"horizon", in.horizon},
                          {"point_to_point", b.point_to_point},
                          {"per_w2_squared", b.per_w2_squared},
                          {"gate_ceiling", b.gate_ceiling}};
        emit.json_report("bounds-entropy", out, elapsed(t0));
        emit.csv("bounds-entropy", kv_csv({{"point_to_point", b.point_to_point},
                                           {"per_w2_squared", b.per_w2_squared},
                                           {"gate_ceiling", b.gate_ceiling}}));
        std::cout << "entropy bound (endpoints): " << fmt17(b.point_to_point)
                  << "\n";
        return 0;
    }
};

struct BoundsEntropyCheckCmd {
    std::optional<double> c0, delta, T, horizon;
    std::optional<long> n;
    std::optional<std::string> x, y;

    void add(CLI::App* cmd) {
        cmd->add_option("--c0", c0, "linear pull rate");
        cmd->add_option("--delta", delta, "step size");
        cmd->add_option("--T", T, "temperature");
        cmd->add_option("--n", n, "step count (>= 2)");
        cmd->add_option("--x", x, "first endpoint 'v1,v2,...'");
        cmd->add_option("--y", y, "second endpoint");
        cmd->add_option("--horizon", horizon, "time horizon (default 2 n delta)");
    }

    std::vector<std::string> keys() const {
        return {"c0", "delta", "T", "n", "x", "y", "horizon"};
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const VerificationReport rep = entropy_check_linear(
            pick(c0, cfg, "c0", 1.0), need(delta, cfg, "delta"),
            need(T, cfg, "T"), need(n, cfg, "n"),
            parse_vec(need(x, cfg, "x")), parse_vec(need(y, cfg, "y")),
            pick(horizon, cfg, "horizon", 0.0));
        print_report_line(rep);
        emit.json_report("bounds-entropy-check", rep.to_json(), elapsed(t0));
        emit.csv("bounds-entropy-check", report_csv({rep}));
        return rep.pass ? 0 : 2;
    }
};

struct BoundsExperimentCmd {
    DriftFlags drift;
    KappaFlags kappa;
    std::optional<double> delta, T, u, sigma0, theta, C;
    std::optional<long> n, runs;
    std::optional<std::string> phi, mean0;
    std::optional<std::uint64_t> seed;

    void add(CLI::App* cmd) {
        drift.add(cmd);
        kappa.add(cmd);
        cmd->add_option("--delta", delta, "step size");
        cmd->add_option("--T", T, "temperature");
        cmd->add_option("--n", n, "averaged steps (default 50)");
        cmd->add_option("--u", u, "deviation level");
        cmd->add_option("--runs", runs, "measurement chains (default 10000)");
        cmd->add_option("--phi", phi,
                        "observable: first-coordinate | norm | cosine");
        cmd->add_option("--mean0", mean0, "initial mean 'v1,v2,...'");
        cmd->add_option("--sigma0", sigma0,
                        "initial spread (0 = point mass, default 0)");
        cmd->add_option("--theta", theta, "override the per-step rate");
        cmd->add_option("--C", C, "override the smoothing constant");
        cmd->add_option("--seed", seed, "noise seed (default 2024)");
    }

    std::vector<std::string> keys() const {
        auto k = DriftFlags::keys();
        auto kk = KappaFlags::keys();
        k.insert(k.end(), kk.begin(), kk.end());
        k.insert(k.end(), {"delta", "T", "n", "u", "runs", "phi", "mean0",
                           "sigma0", "theta", "C", "seed"});
        return k;
    }

    int run(const json& cfg, const Emitter& emit) const {
        const auto t0 = std::chrono::steady_clock::now();
        check_schema(cfg, keys());
        const DriftSpec spec = drift.build(cfg);
        const KappaFn weight = kappa.build(*spec.certificate, cfg);
        const std::string phi_name =
            pick(phi, cfg, "phi", std::string("first-coordinate"));
        const TestObservable obs =
            phi_name == "first-coordinate" ? TestObservable::FirstCoordinate
            : phi_name == "norm"           ? TestObservable::Norm
            : phi_name == "cosine"
                ? TestObservable::Cosine
                : throw UsageError("unknown observable '" + phi_name + "'");
        InitialLaw nu0;
        nu0.mean = parse_vec(need(mean0, cfg, "mean0"));
        nu0.sigma = pick(sigma0, cfg, "sigma0", 0.0);
        ConcentrationExperimentOptions opts;
        opts.runs = pick<long>(runs, cfg, "runs", 10000);
        opts.seed = pick<std::uint64_t>(seed, cfg, "seed", 2024);
        if (auto v = theta ? theta : config_get<double>(cfg, "theta")) opts.theta = *v;
        if (auto v = C ? C : config_get<double>(cfg, "C")) opts.C = *v;
        const VerificationReport rep = concentration_experiment(
            spec, weight, need(delta, cfg, "delta"), need(T, cfg, "T"), obs, nu0,
            pick<long>(n, cfg, "n", 50), need(u, cfg, "u"), opts);
        print_report_line(rep);
        emit.json_report("bounds-experiment", rep.to_json(), elapsed(t0));
        emit.csv("bounds-experiment", report_csv({rep}));
        return rep.pass ? 0 : 2;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Numerical laboratory for weighted contraction bounds of Euler "
        "chains: derived constants, weight construction, simulation, exact "
        "transport distances, contraction/Poincare verification, and "
        "concentration/entropy bounds."};
    app.require_subcommand(1);

    std::optional<std::string> config_path, emit_mode, out_dir;
    std::optional<unsigned> threads;
    app.add_option("--config", config_path,
                   "JSON config; flags override file values")
        ->expected(1);
    app.add_option("--emit", emit_mode, "csv | json | both (default json)");
    app.add_option("--out", out_dir, "output directory (default '.')");
    app.add_option("--threads", threads,
                   "worker cap (default WCLB_THREADS or hardware)");

    ConstantsCmd constants_cmd;
    KappaCmd kappa_cmd;
    SimulateCmd simulate_cmd;
    OtCmd ot_cmd;
    VerifyRhoCmd rho_cmd;
    VerifyEnvelopeCmd envelope_cmd;
    VerifyParticlesCmd particles_cmd;
    VerifyPoincareCmd poincare_cmd;
    VerifyGradCommuteCmd grad_cmd;
    BoundsTailCmd tail_cmd;
    BoundsCiCmd ci_cmd;
    BoundsBiasCmd bias_cmd;
    BoundsEntropyCmd entropy_cmd;
    BoundsEntropyCheckCmd entropy_check_cmd;
    BoundsExperimentCmd experiment_cmd;

    CLI::App* c_constants =
        app.add_subcommand("constants", "derived constants and admissibility");
    c_constants->fallthrough();
    constants_cmd.add(c_constants);

    CLI::App* c_kappa =
        app.add_subcommand("kappa", "weight construction, profile, verification");
    c_kappa->fallthrough();
    kappa_cmd.add(c_kappa);

    CLI::App* c_simulate =
        app.add_subcommand("simulate", "coupled chains and replica ensembles");
    c_simulate->fallthrough();
    simulate_cmd.add(c_simulate);

    CLI::App* c_ot =
        app.add_subcommand("ot", "exact transport distance between clouds");
    c_ot->fallthrough();
    ot_cmd.add(c_ot);

    CLI::App* c_verify =
        app.add_subcommand("verify", "contraction and Poincare verification");
    c_verify->fallthrough();
    c_verify->require_subcommand(1);
    CLI::App* v_rho = c_verify->add_subcommand(
        "rho-onestep", "one-step weighted-semimetric contraction");
    v_rho->fallthrough();
    rho_cmd.add(v_rho);
    CLI::App* v_env = c_verify->add_subcommand(
        "w2-envelope", "k-step transport distance against the decay envelope");
    v_env->fallthrough();
    envelope_cmd.add(v_env);
    CLI::App* v_part = c_verify->add_subcommand(
        "particles", "one-step particle-system contraction");
    v_part->fallthrough();
    particles_cmd.add(v_part);
    CLI::App* v_poi = c_verify->add_subcommand(
        "poincare", "local variance inequality along the chain");
    v_poi->fallthrough();
    poincare_cmd.add(v_poi);
    CLI::App* v_grad = c_verify->add_subcommand(
        "grad-commute", "gradient/kernel commutation for the linear chain");
    v_grad->fallthrough();
    grad_cmd.add(v_grad);

    CLI::App* c_bounds =
        app.add_subcommand("bounds", "concentration and entropy bounds");
    c_bounds->fallthrough();
    c_bounds->require_subcommand(1);
    CLI::App* b_tail =
        c_bounds->add_subcommand("tail", "finite-sample tail bound");
    b_tail->fallthrough();
    tail_cmd.add(b_tail);
    CLI::App* b_ci =
        c_bounds->add_subcommand("ci", "confidence half-width inversion");
    b_ci->fallthrough();
    // Long-only help here so the contraction-rate option can be spelled --h.
    b_ci->set_help_flag("--help", "print help");
    ci_cmd.add(b_ci);
    CLI::App* b_bias = c_bounds->add_subcommand("bias", "time-average bias bound");
    b_bias->fallthrough();
    bias_cmd.add(b_bias);
    CLI::App* b_entropy =
        c_bounds->add_subcommand("entropy", "n-step relative-entropy bounds");
    b_entropy->fallthrough();
    entropy_cmd.add(b_entropy);
    CLI::App* b_check = c_bounds->add_subcommand(
        "entropy-check", "closed-form linear-chain entropy comparison");
    b_check->fallthrough();
    entropy_check_cmd.add(b_check);
    CLI::App* b_exp = c_bounds->add_subcommand(
        "experiment", "simulation-backed time-average tail experiment");
    b_exp->fallthrough();
    experiment_cmd.add(b_exp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        const json cfg =
            config_path ? load_config(*config_path) : json::object();
        const unsigned worker_cap = pick<unsigned>(threads, cfg, "threads", 0);
        if (worker_cap > 0) set_max_threads(worker_cap);
        const Emitter emit(pick(emit_mode, cfg, "emit", std::string("json")),
                           pick(out_dir, cfg, "out", std::string(".")));

        if (c_constants->parsed()) return constants_cmd.run(cfg, emit);
        if (c_kappa->parsed()) return kappa_cmd.run(cfg, emit);
        if (c_simulate->parsed()) return simulate_cmd.run(cfg, emit);
        if (c_ot->parsed()) return ot_cmd.run(cfg, emit);
        if (c_verify->parsed()) {
            if (v_rho->parsed()) return rho_cmd.run(cfg, emit);
            if (v_env->parsed()) return envelope_cmd.run(cfg, emit);
            if (v_part->parsed()) return particles_cmd.run(cfg, emit);
            if (v_poi->parsed()) return poincare_cmd.run(cfg, emit);
            if (v_grad->parsed()) return grad_cmd.run(cfg, emit);
        }
        if (c_bounds->parsed()) {
            if (b_tail->parsed()) return tail_cmd.run(cfg, emit);
            if (b_ci->parsed()) return ci_cmd.run(cfg, emit);
            if (b_bias->parsed()) return bias_cmd.run(cfg, emit);
            if (b_entropy->parsed()) return entropy_cmd.run(cfg, emit);
            if (b_check->parsed()) return entropy_check_cmd.run(cfg, emit);
            if (b_exp->parsed()) return experiment_cmd.run(cfg, emit);
        }
        std::cerr << "usage error: no subcommand selected\n";
        return 1;
    } catch (const GateViolation& e) {
        std::cerr << "verification gate: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const CertificationError& e) {
        std::cerr << "certification error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
