#include "wclb/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "wclb/math.hpp"
#include "wclb/parallel.hpp"
#include "wclb/rng.hpp"
#include "wclb/transport.hpp"

namespace wclb {
namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

Vec axis_dir(int d) {
    Vec e = Vec::Zero(d);
    e(0) = 1.0;
    return e;
}

// A second probe direction, guaranteed distinct from the first axis.
Vec diag_dir(int d) {
    if (d == 1) return Vec::Constant(1, -1.0);
    Vec u(d);
    for (int j = 0; j < d; ++j) u(j) = (j % 2 == 0) ? 1.0 : -1.0;
    return Vec(u / u.norm());
}

// E[S(r) - S(m_old)] for r ~ |m_shift e1 + sigma Z|, with the absolute-value
// companion used to scale the declared quadrature allowance.
struct WeightGain {
    double mean = 0.0;
    double abs_mean = 0.0;
};

WeightGain weight_gain(const KappaFn& kappa, double m_shift, double m_old,
                       double sigma) {
    const math::RadialGaussian rg(kappa.dim(), m_shift, sigma);
    const std::vector<double> seams{kappa.seam_radius(), kappa.support_radius()};
    auto diff = [&](double r) { return kappa.radial_difference(r, m_old); };
    WeightGain g;
    g.mean = rg.expectation(diff, seams, 1e-11);
    g.abs_mean =
        rg.expectation([&](double r) { return std::fabs(diff(r)); }, seams, 1e-6);
    return g;
}

// One grid pair of a one-step check, in excess form: excess = E[rho1]/rho0 - 1
// compared against bound = -(rate) delta.  The geometric factor
// u = (|D1|^2 - |D0|^2)/|D0|^2 and the weight factor v = (E[dkappa_x] +
// E[dkappa_y])/W0 compose exactly as excess = u + v + u v, so nothing is ever
// resolved by subtracting two O(rho) quantities.
struct PairOutcome {
    double excess = 0.0;
    double margin = 0.0;
    double se = 0.0; // Monte Carlo only
    double x_norm = 0.0, y_norm = 0.0, distance = 0.0;
    bool coincident = false;

    double key(double bound) const { return excess - bound - margin; }
};

nlohmann::json pair_json(const PairOutcome& p, double bound) {
    return nlohmann::json{{"x_norm", p.x_norm},
                          {"y_norm", p.y_norm},
                          {"distance", p.distance},
                          {"excess", p.excess},
                          {"margin", p.margin},
                          {"coincident", p.coincident},
                          {"pass", p.coincident || p.excess <= bound + p.margin}};
}

PairOutcome evaluate_pair(const DriftSpec& drift, const KappaFn& kappa,
                          double delta, double temperature, const Vec& x,
                          const Vec& y, double bound_scale,
                          const AnalysisOptions& opts, std::uint64_t pair_index) {
    PairOutcome out;
    out.x_norm = x.norm();
    out.y_norm = y.norm();
    const Vec d0 = x - y;
    const double d0sq = d0.squaredNorm();
    out.distance = std::sqrt(d0sq);
    if (d0sq == 0.0) {
        // The synchronous coupling keeps equal chains equal; zero semimetric
        // is preserved exactly.
        out.coincident = true;
        return out;
    }

    const Vec bx = drift(x), by = drift(y);
    const Vec db = delta * (bx - by);
    const double u = (2.0 * d0 + db).dot(db) / d0sq;
    const double w0 =
        temperature + kappa.radial(out.x_norm) + kappa.radial(out.y_norm);
    const double sigma = std::sqrt(2.0 * delta * temperature);
    const Vec xs = x + delta * bx, ys = y + delta * by;

    if (opts.estimator == ContractionEstimator::Quadrature) {
        const WeightGain gx = weight_gain(kappa, xs.norm(), out.x_norm, sigma);
        const WeightGain gy = weight_gain(kappa, ys.norm(), out.y_norm, sigma);
        const double v = (gx.mean + gy.mean) / w0;
        out.excess = u + v + u * v;
        out.margin = 1e-8 * (std::fabs(u) + (gx.abs_mean + gy.abs_mean) / w0 +
                             bound_scale);
    } else {
        NoiseField nf(opts.seed, Stream::PairGrid);
        const long n = std::max<long>(opts.samples, 100);
        const int d = kappa.dim();
        double mean = 0.0, m2 = 0.0;
        Vec z(d);
        for (long s = 0; s < n; ++s) {
            // One shared draw: both chains see the same noise.
            for (int c = 0; c < d; ++c)
                z(c) = nf.normal(pair_index, static_cast<std::uint64_t>(s), 0,
                                 static_cast<std::uint64_t>(c));
            const double gx =
                kappa.radial_difference((xs + sigma * z).norm(), out.x_norm);
            const double gy =
                kappa.radial_difference((ys + sigma * z).norm(), out.y_norm);
            const double val = gx + gy;
            const double dlt = val - mean;
            mean += dlt / static_cast<double>(s + 1);
            m2 += dlt * (val - mean);
        }
        const double se_g =
            std::sqrt(std::max(m2 / (static_cast<double>(n) - 1.0), 0.0) /
                      static_cast<double>(n));
        const double v = mean / w0;
        out.excess = u + v + u * v;
        out.se = se_g * (1.0 + std::fabs(u)) / w0;
        out.margin = 3.0 * out.se;
    }
    return out;
}

// Shared reduction: the reported triple is the non-coincident check with the
// largest signed distance to failure, so the report invariant coincides with
// the conjunction over the grid.
struct WorstPick {
    PairOutcome outcome;
    std::size_t index = 0;
    bool found = false;
};

WorstPick pick_worst(const std::vector<PairOutcome>& rows, double bound) {
    WorstPick w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].coincident) continue;
        if (!w.found || rows[i].key(bound) > w.outcome.key(bound)) {
            w.found = true;
            w.outcome = rows[i];
            w.index = i;
        }
    }
    return w;
}

void fill_from_worst(VerificationReport& report, const WorstPick& w, double bound,
                     const std::vector<PairOutcome>& rows,
                     const AnalysisOptions& opts) {
    report.bound = bound;
    if (!w.found) {
        // Only coincident pairs: the inequality holds with both sides zero.
        report.estimate = bound;
        report.margin = 0.0;
        report.location = "coincident pairs only (zero semimetric preserved)";
    } else {
        report.estimate = w.outcome.excess;
        report.margin = w.outcome.margin;
        report.location = "pair " + std::to_string(w.index) +
                          ": |x|=" + fmt(w.outcome.x_norm) +
                          ", |y|=" + fmt(w.outcome.y_norm);
    }
    report.provenance = opts.estimator == ContractionEstimator::Quadrature
                            ? Provenance::quadrature()
                            : Provenance::monte_carlo(
                                  std::max<long>(opts.samples, 100),
                                  w.found ? w.outcome.se : 0.0);
    nlohmann::json pairs = nlohmann::json::array();
    for (const PairOutcome& p : rows) pairs.push_back(pair_json(p, bound));
    report.details["pairs"] = std::move(pairs);
    report.finalize();
}

// Expectation of g under N(m, s^2 I_d) by a product Gauss-Hermite rule.
double gauss_expectation(const std::function<double(const Vec&)>& g, const Vec& m,
                         double s, const math::HermiteRule& rule) {
    if (s == 0.0) return g(m);
    const int d = static_cast<int>(m.size());
    const int n = static_cast<int>(rule.nodes.size());
    const double root2 = std::numbers::sqrt2;
    const double norm = std::pow(std::numbers::pi, -0.5 * d);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Vec z(d);
    double acc = 0.0;
    while (true) {
        double w = 1.0;
        for (int j = 0; j < d; ++j) {
            z(j) = m(j) + s * root2 * rule.nodes[static_cast<std::size_t>(idx[j])];
            w *= rule.weights[static_cast<std::size_t>(idx[j])];
        }
        acc += w * g(z);
        int j = 0;
        while (j < d && ++idx[static_cast<std::size_t>(j)] == n) {
            idx[static_cast<std::size_t>(j)] = 0;
            ++j;
        }
        if (j == d) break;
    }
    return acc * norm;
}

// Sample variance, its asymptotic standard error (via the fourth central
// moment), and the mean with its standard error.
struct MomentSummary {
    double mean = 0.0, se_mean = 0.0;
    double variance = 0.0, se_variance = 0.0;
};

MomentSummary summarize(const std::vector<double>& v) {
    MomentSummary s;
    const double n = static_cast<double>(v.size());
    if (v.size() < 2) {
        s.mean = v.empty() ? 0.0 : v[0];
        return s;
    }
    double acc = 0.0;
    for (double t : v) acc += t;
    s.mean = acc / n;
    double acc2 = 0.0, acc4 = 0.0;
    for (double t : v) {
        const double e = t - s.mean;
        acc2 += e * e;
        acc4 += e * e * e * e;
    }
    const double m2 = acc2 / n;
    const double m4 = acc4 / n;
    s.variance = acc2 / (n - 1.0);
    s.se_mean = std::sqrt(std::max(m2, 0.0) / n);
    // Var(s^2) ~= (m4 - sigma^4 (n-3)/(n-1)) / n.
    s.se_variance =
        std::sqrt(std::max(m4 - m2 * m2 * (n - 3.0) / (n - 1.0), 0.0) / n);
    return s;
}

std::string admissibility_message(const std::string& op,
                                  const ConstantsReport& consts) {
    return op + " requires an admissible (delta, T): delta=" + fmt(consts.delta) +
           " vs delta0=" + fmt(consts.delta0) + " (ok=" +
           (consts.delta_ok ? "yes" : "no") + "), T=" + fmt(consts.temperature) +
           " vs T0=" + fmt(consts.T0) + " (ok=" +
           (consts.temperature_ok ? "yes" : "no") + ")";
}

} // namespace

// ---------------------------------------------------------------------------
// Pair grids.

PairGrid default_pair_grid(const KappaFn& kappa, double delta,
                           double temperature) {
    const int d = kappa.dim();
    const double R = kappa.ball_radius();
    const double rz = kappa.support_radius();
    const double sigma = std::sqrt(std::max(2.0 * delta * temperature, 0.0));
    const double tail = rz + 6.0 * sigma; // one smoothing step cannot bridge this
    const Vec e1 = axis_dir(d), u2 = diag_dir(d);

    PairGrid g;
    auto add = [&](const Vec& a, const Vec& b) { g.pairs.emplace_back(a, b); };
    add(Vec(0.6 * R * e1), Vec(0.6 * R * e1));       // coincident
    add(Vec(0.25 * R * e1), Vec(-0.55 * R * e1));    // both inside the ball
    add(Vec(0.9 * R * e1), Vec(0.45 * R * u2));      // both inside, skew
    add(Vec(0.8 * R * e1), Vec(1.6 * R * e1));       // ball / annulus straddle
    add(Vec(1.9 * R * e1), Vec(2.2 * R * u2));       // both in the convex branch
    add(Vec(0.3 * R * u2), Vec((tail + 0.1 * R) * e1)); // inside / beyond support
    add(Vec((tail + 0.1 * R) * e1), Vec(-(tail + 0.5 * R) * e1)); // both beyond
    add(Vec((tail + 0.1 * R) * e1), Vec((0.5 * rz + tail) * u2)); // both beyond, skew
    add(Vec((tail + 0.2 * R) * e1), Vec((tail + 1.7 * R) * e1));  // aligned tail
    return g;
}

ParticlePairGrid default_particle_pair_grid(const ParticleDriftSpec& pspec,
                                            const KappaFn& kappa) {
    const int N = pspec.particles;
    const int d = pspec.dim;
    if (N <= 0)
        throw std::invalid_argument("particle pair grid: particle count not set");
    if (d != kappa.dim())
        throw std::invalid_argument("particle pair grid: dimension mismatch");
    const double R = kappa.ball_radius();
    const double rz = kappa.support_radius();
    const Vec e1 = axis_dir(d), u2 = diag_dir(d);

    Mat inside_a(N, d), inside_b(N, d), mixed(N, d), mixed_shift(N, d),
        tail_a(N, d), tail_b(N, d);
    for (int i = 0; i < N; ++i) {
        const Vec& dir = (i % 2 == 0) ? e1 : u2;
        inside_a.row(i) = ((0.2 + 0.15 * (i % 4)) * R) * dir.transpose();
        inside_b.row(i) = (-(0.1 + 0.2 * (i % 3)) * R) * dir.transpose();
        mixed.row(i) = (i % 2 == 0 ? 0.5 * R : rz + 0.8 * R) * dir.transpose();
        mixed_shift.row(i) = mixed.row(i) + (0.3 * R) * u2.transpose();
        tail_a.row(i) = (rz + (0.5 + 0.4 * (i % 3)) * R) * dir.transpose();
        tail_b.row(i) = -(rz + (0.7 + 0.2 * (i % 2)) * R) * dir.transpose();
    }

    ParticlePairGrid g;
    g.pairs.emplace_back(inside_a, inside_b); // every particle inside the ball
    g.pairs.emplace_back(mixed, mixed_shift); // straddling configuration
    g.pairs.emplace_back(tail_a, tail_b);     // every particle beyond support
    g.pairs.emplace_back(mixed, mixed);       // coincident
    return g;
}

// ---------------------------------------------------------------------------
// One-step contraction of the weighted semimetric.

VerificationReport one_step_rho_contraction(const DriftSpec& drift,
                                            const KappaFn& kappa, double delta,
                                            double temperature,
                                            const PairGrid& grid,
                                            const AnalysisOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConstantsReport consts =
        single_chain_constants(drift, kappa, delta, temperature);
    if (!consts.admissible)
        throw GateViolation(admissibility_message("one-step contraction", consts));

    const double h = consts.rate;
    const double bound = -h * delta; // excess form of (1 - h delta)
    const PairGrid& g =
        grid.pairs.empty() ? default_pair_grid(kappa, delta, temperature) : grid;
    for (const auto& [x, y] : g.pairs)
        if (x.size() != kappa.dim() || y.size() != kappa.dim())
            throw std::invalid_argument("one-step contraction: pair dimension");

    std::vector<PairOutcome> rows(g.pairs.size());
    parallel_for(g.pairs.size(), [&](std::size_t i) {
        rows[i] = evaluate_pair(drift, kappa, delta, temperature, g.pairs[i].first,
                                g.pairs[i].second, h * delta, opts, i);
    });

    VerificationReport report;
    report.claim = "rho-one-step-contraction";
    report.details = nlohmann::json{{"delta", delta},
                                    {"temperature", temperature},
                                    {"rate", h},
                                    {"estimator",
                                     opts.estimator == ContractionEstimator::Quadrature
                                         ? "quadrature"
                                         : "monte-carlo"}};
    fill_from_worst(report, pick_worst(rows, bound), bound, rows, opts);
    report.runtime_seconds = seconds_since(t0);
    return report;
}

// ---------------------------------------------------------------------------
// k-step W2 envelope.

std::vector<VerificationReport> w2_contraction_envelope(
    const DriftSpec& drift, const KappaFn& kappa, double delta, double temperature,
    const InitialSampler& mu0, const InitialSampler& nu0, long k_max, int replicas,
    const std::vector<long>& checkpoints, const AnalysisOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConstantsReport consts =
        single_chain_constants(drift, kappa, delta, temperature);
    if (!consts.admissible)
        throw GateViolation(admissibility_message("W2 envelope", consts));
    if (k_max < 0) throw std::invalid_argument("W2 envelope: k_max must be >= 0");
    if (replicas < 1)
        throw std::invalid_argument("W2 envelope: need at least one replica");
    if (replicas > 4096)
        throw std::invalid_argument(
            "W2 envelope: replica count exceeds the exact-assignment cap (4096)");
    if (!mu0 || !nu0)
        throw std::invalid_argument("W2 envelope: initial samplers must be set");

    const double h = consts.rate;
    const double prefactor = consts.prefactor;
    const int d = kappa.dim();
    const long n = replicas;

    std::vector<long> ks;
    if (checkpoints.empty()) {
        ks.reserve(static_cast<std::size_t>(k_max) + 1);
        for (long k = 0; k <= k_max; ++k) ks.push_back(k);
    } else {
        std::set<long> uniq(checkpoints.begin(), checkpoints.end());
        uniq.insert(0);
        for (long k : uniq) {
            if (k < 0 || k > k_max)
                throw std::invalid_argument("W2 envelope: checkpoint " +
                                            std::to_string(k) +
                                            " outside [0, k_max]");
            ks.push_back(k);
        }
    }

    // Initial clouds, optimally paired so the coupling bound is tight at k = 0.
    Mat x0(n, d), y0(n, d);
    for (long r = 0; r < n; ++r) {
        const Vec xr = mu0(static_cast<int>(r));
        const Vec yr = nu0(static_cast<int>(r));
        if (xr.size() != d || yr.size() != d)
            throw std::invalid_argument("W2 envelope: sampler dimension mismatch");
        x0.row(r) = xr.transpose();
        y0.row(r) = yr.transpose();
    }
    Mat cost(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        for (long j = 0; j < n; ++j)
            cost(static_cast<long>(i), j) =
                (x0.row(static_cast<long>(i)) - y0.row(j)).squaredNorm();
    });
    std::vector<int> rowsol;
    const double total0 = solve_assignment(cost, rowsol);
    const double w2_initial = std::sqrt(std::max(total0, 0.0) / static_cast<double>(n));

    const ChainConfig cfg{drift, delta, temperature, k_max, opts.seed, replicas};

    std::vector<CoupledTrajectory> trajs(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t r) {
        trajs[r] = simulate_coupled(
            Vec(x0.row(static_cast<long>(r)).transpose()),
            Vec(y0.row(rowsol[r]).transpose()), cfg, kappa, ks,
            static_cast<int>(r));
    });
    for (std::size_t r = 0; r < trajs.size(); ++r)
        if (trajs[r].diverged)
            throw std::runtime_error("W2 envelope: replica " + std::to_string(r) +
                                     " diverged at step " +
                                     std::to_string(trajs[r].divergence_step));

    // Step after which the weak envelope improves on the trivial bound M W2.
    const double k_star =
        prefactor > 1.0 ? std::ceil(std::log(prefactor) / -std::log1p(-h * delta))
                        : 0.0;
    const CostSpec euclid2 = CostSpec::euclidean(2.0);

    std::vector<VerificationReport> series;
    series.reserve(ks.size());
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        const long k = ks[ki];
        const double ub = coupling_upper_bound(trajs, euclid2, k);

        std::vector<double> costs(static_cast<std::size_t>(n));
        Mat mu_k(n, d), nu_k(n, d);
        for (long r = 0; r < n; ++r) {
            const auto& tr = trajs[static_cast<std::size_t>(r)];
            costs[static_cast<std::size_t>(r)] =
                tr.distance[ki] * tr.distance[ki];
            mu_k.row(r) = tr.x[ki].transpose();
            nu_k.row(r) = tr.y[ki].transpose();
        }
        const MomentSummary ms = summarize(costs);
        const double margin =
            ms.mean > 0.0 ? 3.0 * ms.se_mean / (2.0 * std::sqrt(ms.mean)) : 0.0;
        const double exact =
            wasserstein(EmpiricalMeasure{mu_k, k, 0}, EmpiricalMeasure{nu_k, k, 0},
                        euclid2);
        const double envelope =
            prefactor * std::exp(static_cast<double>(k) * std::log1p(-h * delta)) *
            w2_initial;

        VerificationReport rep;
        rep.claim = "w2-envelope k=" + std::to_string(k);
        rep.estimate = ub;
        rep.bound = envelope;
        rep.margin = margin;
        rep.location = "k=" + std::to_string(k);
        rep.provenance = Provenance::monte_carlo(n, margin / 3.0);
        rep.details = nlohmann::json{
            {"k", k},
            {"coupling_w2", ub},
            // Finite-sample assignment distance; biased upward when the true
            // distance is small, reported for reference only.
            {"empirical_w2", exact},
            {"w2_initial", w2_initial},
            {"prefactor", prefactor},
            {"rate", h},
            {"k_star", k_star},
        };
        rep.finalize();
        rep.runtime_seconds = seconds_since(t0);
        series.push_back(std::move(rep));
    }
    return series;
}

// ---------------------------------------------------------------------------
// Particle-system contraction.

VerificationReport particle_contraction(const ParticleDriftSpec& pspec,
                                        const KappaFn& kappa, double delta,
                                        double temperature,
                                        const ParticlePairGrid& grid,
                                        const AnalysisOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConstantsReport consts =
        particle_constants(pspec, kappa, delta, temperature);
    const ParticleConstants& pc = *consts.particle;
    if (!pc.admissible)
        throw GateViolation(
            "particle contraction requires admissible particle gates: delta=" +
            fmt(delta) + " vs delta0~=" + fmt(pc.delta0) + ", T=" +
            fmt(temperature) + " vs T0~=" + fmt(pc.T0));

    const double net = pc.net_rate_ratio;
    const bool monitoring = !(net > 0.0);
    const double bound = monitoring ? 0.0 : -net * delta;
    const double bound_scale = consts.rate * delta;
    const int N = pspec.particles;
    const int d = pspec.dim;
    const double sigma = std::sqrt(2.0 * delta * temperature);

    const ParticlePairGrid& g =
        grid.pairs.empty() ? default_particle_pair_grid(pspec, kappa) : grid;
    for (const auto& [X, Y] : g.pairs)
        if (X.rows() != N || X.cols() != d || Y.rows() != N || Y.cols() != d)
            throw std::invalid_argument("particle contraction: pair shape");

    std::vector<PairOutcome> rows(g.pairs.size());
    parallel_for(g.pairs.size(), [&](std::size_t pi) {
        const Mat& X = g.pairs[pi].first;
        const Mat& Y = g.pairs[pi].second;
        PairOutcome out;
        out.x_norm = X.norm(); // Frobenius norms locate the configuration
        out.y_norm = Y.norm();

        Mat x_shift(N, d), y_shift(N, d);
        for (int i = 0; i < N; ++i) {
            x_shift.row(i) = X.row(i) + delta * pspec.drift_of(i, X).transpose();
            y_shift.row(i) = Y.row(i) + delta * pspec.drift_of(i, Y).transpose();
        }

        double rho0 = 0.0, det_gain = 0.0;
        Vec d1sq(N), w0(N);
        for (int i = 0; i < N; ++i) {
            const Vec d0 = (X.row(i) - Y.row(i)).transpose();
            const Vec db =
                (x_shift.row(i) - y_shift.row(i)).transpose() - d0;
            w0(i) = temperature + kappa.radial(X.row(i).norm()) +
                    kappa.radial(Y.row(i).norm());
            rho0 += d0.squaredNorm() * w0(i);
            det_gain += (2.0 * d0 + db).dot(db) * w0(i);
            d1sq(i) = (d0 + db).squaredNorm();
        }
        out.distance = std::sqrt((X - Y).squaredNorm());
        if (rho0 == 0.0) {
            out.coincident = true;
            rows[pi] = out;
            return;
        }

        if (opts.estimator == ContractionEstimator::Quadrature) {
            double stoch = 0.0, abs_acc = 0.0;
            for (int i = 0; i < N; ++i) {
                const WeightGain gx = weight_gain(kappa, x_shift.row(i).norm(),
                                                  X.row(i).norm(), sigma);
                const WeightGain gy = weight_gain(kappa, y_shift.row(i).norm(),
                                                  Y.row(i).norm(), sigma);
                stoch += d1sq(i) * (gx.mean + gy.mean);
                abs_acc += d1sq(i) * (gx.abs_mean + gy.abs_mean);
            }
            out.excess = (det_gain + stoch) / rho0;
            out.margin =
                1e-8 * ((std::fabs(det_gain) + abs_acc) / rho0 + bound_scale);
        } else {
            NoiseField nf(opts.seed, Stream::PairGrid);
            const long nsamp = std::max<long>(opts.samples, 100);
            double mean = 0.0, m2 = 0.0;
            Vec zi(d);
            for (long s = 0; s < nsamp; ++s) {
                double val = 0.0;
                for (int i = 0; i < N; ++i) {
                    for (int c = 0; c < d; ++c)
                        zi(c) = nf.normal(pi, static_cast<std::uint64_t>(s),
                                          static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(c));
                    const double gx = kappa.radial_difference(
                        (x_shift.row(i).transpose() + sigma * zi).norm(),
                        X.row(i).norm());
                    const double gy = kappa.radial_difference(
                        (y_shift.row(i).transpose() + sigma * zi).norm(),
                        Y.row(i).norm());
                    val += d1sq(i) * (gx + gy);
                }
                const double dlt = val - mean;
                mean += dlt / static_cast<double>(s + 1);
                m2 += dlt * (val - mean);
            }
            const double se =
                std::sqrt(std::max(m2 / (static_cast<double>(nsamp) - 1.0), 0.0) /
                          static_cast<double>(nsamp));
            out.excess = (det_gain + mean) / rho0;
            out.se = se / rho0;
            out.margin = 3.0 * out.se;
        }
        rows[pi] = out;
    });

    VerificationReport report;
    report.claim = monitoring ? "rho-tilde-one-step-decay-monitor"
                              : "rho-tilde-one-step-contraction";
    report.details = nlohmann::json{
        {"delta", delta},
        {"temperature", temperature},
        {"rate", consts.rate},
        {"interaction_drag", pc.h_tilde_ratio},
        {"net_rate", net},
        {"contraction_predicted", !monitoring},
        {"sufficient_condition", pc.sufficient_condition},
        {"estimator", opts.estimator == ContractionEstimator::Quadrature
                          ? "quadrature"
                          : "monte-carlo"}};
    fill_from_worst(report, pick_worst(rows, bound), bound, rows, opts);
    report.runtime_seconds = seconds_since(t0);
    return report;
}

// ---------------------------------------------------------------------------
// Gradient commutation for the linear chain.

VerificationReport gradient_commutation_linear(
    const DriftSpec& drift, double delta, double temperature, long k,
    const std::function<double(const Vec&)>& f, const Vec& x,
    const AnalysisOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)opts;
    if (drift.kind() != DriftKind::Linear)
        throw std::invalid_argument(
            "gradient commutation: the exact identity holds for the linear "
            "chain only");
    if (!(delta > 0.0) || !(temperature > 0.0))
        throw std::invalid_argument(
            "gradient commutation: delta and T must be positive");
    if (k < 0) throw std::invalid_argument("gradient commutation: k must be >= 0");
    if (!f) throw std::invalid_argument("gradient commutation: f must be set");
    const int d = drift.dim();
    if (x.size() != d)
        throw std::invalid_argument("gradient commutation: point dimension");
    if (d > 3)
        throw std::invalid_argument(
            "gradient commutation: product quadrature supports d <= 3");

    const double c0 = drift.rate();
    const double a = 1.0 - c0 * delta;
    // Kernel variance after k steps: 2 delta T sum_{j<k} a^{2j}.
    double var_k = 0.0;
    if (k > 0) {
        const double a2 = a * a;
        var_k = 2.0 * delta * temperature *
                (a2 == 1.0 ? static_cast<double>(k)
                           : (1.0 - std::pow(a2, static_cast<double>(k))) /
                                 (1.0 - a2));
    }
    const double s = std::sqrt(var_k);
    const double ak = std::pow(a, static_cast<double>(k));
    const math::HermiteRule rule = math::gauss_hermite(40);

    auto kernel_mean = [&](const std::function<double(const Vec&)>& g,
                           const Vec& z) {
        return gauss_expectation(g, Vec(ak * z), s, rule);
    };

    // Left side: central differences of Q^k f, Richardson refined.
    Vec lhs(d), rhs(d);
    const double h0 = 1e-4 * (1.0 + x.norm());
    for (int j = 0; j < d; ++j) {
        Vec e = Vec::Zero(d);
        e(j) = 1.0;
        auto central = [&](double step) {
            return (kernel_mean(f, Vec(x + step * e)) -
                    kernel_mean(f, Vec(x - step * e))) /
                   (2.0 * step);
        };
        const double d1 = central(h0);
        const double d2 = central(0.5 * h0);
        lhs(j) = (4.0 * d2 - d1) / 3.0;

        // Right side: a^k Q^k (partial_j f), the inner derivative by a short
        // central difference at each quadrature node.
        auto df = [&](const Vec& z) {
            const double hf = 1e-6 * (1.0 + z.norm());
            return (f(Vec(z + hf * e)) - f(Vec(z - hf * e))) / (2.0 * hf);
        };
        rhs(j) = ak * kernel_mean(df, x);
    }

    const double scale =
        std::max({1e-8, lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff()});
    VerificationReport report;
    report.claim = "gradient-commutation-linear k=" + std::to_string(k);
    report.estimate = (lhs - rhs).cwiseAbs().maxCoeff() / scale;
    report.bound = 0.0;
    report.margin = 1e-4;
    report.location = "x with |x|=" + fmt(x.norm());
    report.provenance = Provenance::quadrature();
    report.details = nlohmann::json{
        {"k", k},
        {"decay_factor", a},
        {"decay_factor_k", ak},
        {"kernel_variance", var_k},
        {"qkf_at_x", kernel_mean(f, x)},
        {"lhs", std::vector<double>(lhs.data(), lhs.data() + d)},
        {"rhs", std::vector<double>(rhs.data(), rhs.data() + d)},
    };
    report.finalize();
    report.runtime_seconds = seconds_since(t0);
    return report;
}

// ---------------------------------------------------------------------------
// Poincare checks.

std::vector<TestFunction> default_test_functions(int dim) {
    if (dim < 1) throw std::invalid_argument("test functions: dimension");
    std::vector<TestFunction> fams;
    const int coords = std::min(dim, 3);
    for (int j = 0; j < coords; ++j) {
        fams.push_back(TestFunction{
            "coordinate-" + std::to_string(j + 1),
            [j](const Vec& z) { return z(j); },
            [j, dim](const Vec&) {
                Vec g = Vec::Zero(dim);
                g(j) = 1.0;
                return g;
            }});
    }
    fams.push_back(TestFunction{"squared-norm",
                                [](const Vec& z) { return z.squaredNorm(); },
                                [](const Vec& z) { return Vec(2.0 * z); }});
    fams.push_back(TestFunction{"first-coordinate-squared",
                                [](const Vec& z) { return z(0) * z(0); },
                                [dim](const Vec& z) {
                                    Vec g = Vec::Zero(dim);
                                    g(0) = 2.0 * z(0);
                                    return g;
                                }});
    const Vec th1 = Vec::Constant(dim, 0.8 / std::sqrt(static_cast<double>(dim)));
    Vec th2 = diag_dir(dim) * 0.5;
    fams.push_back(TestFunction{
        "cosine-wave-1", [th1](const Vec& z) { return std::cos(th1.dot(z)); },
        [th1](const Vec& z) { return Vec(-std::sin(th1.dot(z)) * th1); }});
    fams.push_back(TestFunction{
        "cosine-wave-2", [th2](const Vec& z) { return std::cos(th2.dot(z)); },
        [th2](const Vec& z) { return Vec(-std::sin(th2.dot(z)) * th2); }});
    return fams;
}

VerificationReport poincare_onestep_tightness(const DriftSpec& drift, double delta,
                                              double temperature, const Vec& x,
                                              const AnalysisOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(delta > 0.0) || !(temperature > 0.0))
        throw std::invalid_argument(
            "one-step tightness: delta and T must be positive");
    if (x.size() != drift.dim())
        throw std::invalid_argument("one-step tightness: point dimension");

    const double sigma = std::sqrt(2.0 * delta * temperature);
    const double target = 2.0 * delta * temperature;
    const long n = std::max<long>(opts.samples, 100);
    const double shift = (x + delta * drift(x))(0);

    NoiseField nf(opts.seed, Stream::Certification);
    std::vector<double> values(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
        values[s] = shift + sigma * nf.normal(static_cast<std::uint64_t>(s), 0, 0, 0);
    });
    const MomentSummary ms = summarize(values);

    VerificationReport report;
    report.claim = "poincare-one-step-tightness";
    report.estimate = std::fabs(ms.variance - target);
    report.bound = 0.0;
    report.margin = 3.0 * ms.se_variance;
    report.location = "f(z) = z1 at |x|=" + fmt(x.norm());
    report.provenance = Provenance::monte_carlo(n, ms.se_variance);
    report.details = nlohmann::json{{"variance", ms.variance},
                                    {"target", target},
                                    {"se_variance", ms.se_variance}};
    report.finalize();
    report.runtime_seconds = seconds_since(t0);
    return report;
}

VerificationReport poincare_check(const DriftSpec& drift, const KappaFn& kappa,
                                  double delta, double temperature, long k,
                                  const Vec& x,
                                  const std::vector<TestFunction>& family,
                                  const AnalysisOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConstantsReport consts =
        single_chain_constants(drift, kappa, delta, temperature);
    if (!consts.admissible)
        throw GateViolation(admissibility_message("Poincare check", consts));
    if (k < 0) throw std::invalid_argument("Poincare check: k must be >= 0");
    if (x.size() != kappa.dim())
        throw std::invalid_argument("Poincare check: point dimension");

    const double cp = consts.poincare;
    const std::vector<TestFunction> fams =
        family.empty() ? default_test_functions(kappa.dim()) : family;
    for (const TestFunction& tf : fams)
        if (!tf.f || !tf.grad)
            throw std::invalid_argument("Poincare check: test function incomplete");

    const ChainConfig cfg{drift, delta, temperature, k, opts.seed,
                          static_cast<int>(std::max<long>(opts.samples, 100))};
    const std::vector<EmpiricalMeasure> snaps =
        ensemble(dirac_sampler(x), cfg, {k});
    const Mat& cloud = snaps.at(0).points;
    const long n = cloud.rows();

    struct FamilyRow {
        double variance = 0, grad_term = 0, se_var = 0, se_grad = 0;
        double excess = 0, margin = 0;
        double key() const { return excess - margin; }
    };
    std::vector<FamilyRow> rows(fams.size());
    parallel_for(fams.size(), [&](std::size_t fi) {
        std::vector<double> fv(static_cast<std::size_t>(n)),
            gv(static_cast<std::size_t>(n));
        for (long r = 0; r < n; ++r) {
            const Vec z = cloud.row(r).transpose();
            fv[static_cast<std::size_t>(r)] = fams[fi].f(z);
            gv[static_cast<std::size_t>(r)] = fams[fi].grad(z).squaredNorm();
        }
        const MomentSummary mf = summarize(fv);
        const MomentSummary mg = summarize(gv);
        FamilyRow row;
        row.variance = mf.variance;
        row.grad_term = mg.mean;
        row.se_var = mf.se_variance;
        row.se_grad = mg.se_mean;
        row.excess = mf.variance - cp * mg.mean;
        row.margin = 3.0 * (mf.se_variance + cp * mg.se_mean);
        rows[fi] = row;
    });

    std::size_t worst = 0;
    for (std::size_t fi = 1; fi < rows.size(); ++fi)
        if (rows[fi].key() > rows[worst].key()) worst = fi;

    VerificationReport report;
    report.claim = "local-poincare k=" + std::to_string(k);
    report.estimate = rows[worst].excess;
    report.bound = 0.0;
    report.margin = rows[worst].margin;
    report.location = fams[worst].name + " at |x|=" + fmt(x.norm());
    report.provenance = Provenance::monte_carlo(n, rows[worst].se_var);
    nlohmann::json per_f = nlohmann::json::array();
    for (std::size_t fi = 0; fi < fams.size(); ++fi) {
        per_f.push_back(nlohmann::json{
            {"name", fams[fi].name},
            {"variance", rows[fi].variance},
            {"grad_term", rows[fi].grad_term},
            {"se_variance", rows[fi].se_var},
            {"se_grad", rows[fi].se_grad},
            {"excess", rows[fi].excess},
            {"margin", rows[fi].margin},
            {"pass", rows[fi].excess <= rows[fi].margin},
        });
    }
    report.details = nlohmann::json{
        {"constant", cp},
        {"k", k},
        {"replicas_excluded", snaps.at(0).diverged_excluded},
        {"functions", std::move(per_f)},
        // The one-step Gaussian case where the kernel constant 2 delta T is
        // attained by linear test functions; informational companion check.
        {"tightness",
         poincare_onestep_tightness(drift, delta, temperature, x, opts).to_json()},
    };
    report.finalize();
    report.runtime_seconds = seconds_since(t0);
    return report;
}

} // namespace wclb
