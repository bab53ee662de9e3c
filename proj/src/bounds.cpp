#include "wclb/bounds.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "wclb/parallel.hpp"
#include "wclb/rng.hpp"
#include "wclb/sim.hpp"

namespace wclb {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + " must be finite");
    }
}

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

} // namespace

// ---- Tail bound --------------------------------------------------------------

void ConcentrationInput::validate() const {
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    require_finite(u, "u");
    if (u < 0) throw std::invalid_argument("u must be nonnegative");
    require_finite(theta, "theta");
    if (!(theta > 0.0 && theta < 1.0)) {
        throw std::invalid_argument("theta must lie in (0, 1)");
    }
    require_finite(C, "C");
    if (C < 0) throw std::invalid_argument("C must be nonnegative");
    if (std::isnan(C0) || C0 < 0) {
        throw std::invalid_argument("C0 must be nonnegative");
    }
    require_finite(M, "M");
    if (M < 1) throw std::invalid_argument("M must be at least 1");
}

ConcentrationInput ConcentrationInput::from_constants(const ConstantsReport& consts,
                                                      long n, double u, double C0) {
    if (!consts.admissible) {
        throw GateViolation(
            "constants report is inadmissible: delta=" + fmt(consts.delta) +
            " vs delta0=" + fmt(consts.delta0) + ", T=" + fmt(consts.temperature) +
            " vs T0=" + fmt(consts.T0));
    }
    ConcentrationInput in;
    in.n = n;
    in.u = u;
    in.theta = consts.rate * consts.delta;
    in.C = consts.delta * consts.temperature;
    in.C0 = C0;
    in.M = consts.prefactor;
    in.validate();
    return in;
}

double concentration_tail_bound(const ConcentrationInput& in) {
    in.validate();
    if (in.u == 0.0) return 1.0;
    const double num = static_cast<double>(in.n) * static_cast<double>(in.n) *
                       in.u * in.u * in.theta * in.theta;
    const double den =
        2.0 * (static_cast<double>(in.n - 1) * in.C * in.theta * in.theta +
               in.C0 * in.M * in.M);
    if (den == 0.0) return 0.0; // no variance anywhere: point mass average
    return clamp_probability(std::exp(-num / den));
}

// ---- Composite bound and its inversion ----------------------------------------

namespace {

void validate_composite(double t, double h, double temperature, double C0,
                        double M) {
    require_finite(t, "t");
    if (t <= 0) throw std::invalid_argument("t must be positive");
    require_finite(h, "h");
    if (h <= 0) throw std::invalid_argument("h must be positive");
    require_finite(temperature, "T");
    if (temperature <= 0) throw std::invalid_argument("T must be positive");
    if (std::isnan(C0) || C0 < 0) {
        throw std::invalid_argument("C0 must be nonnegative");
    }
    require_finite(M, "M");
    if (M < 1) throw std::invalid_argument("M must be at least 1");
}

} // namespace

double composite_tail_bound(double t, double u, double h, double temperature,
                            double C0, double M, bool two_sided) {
    validate_composite(t, h, temperature, C0, M);
    require_finite(u, "u");
    if (u < 0) throw std::invalid_argument("u must be nonnegative");
    const double s = two_sided ? 2.0 : 1.0;
    const double den = 2.0 * (temperature + C0 * M * M / t);
    const double q = t * u * u * h * h / den;
    return clamp_probability(s * std::exp(-q));
}

ConfidenceInterval confidence_interval(double t, double delta, double h,
                                       double temperature, double C0, double M,
                                       double alpha, bool two_sided) {
    validate_composite(t, h, temperature, C0, M);
    require_finite(delta, "delta");
    if (delta <= 0) throw std::invalid_argument("delta must be positive");
    if (std::isnan(alpha) || alpha <= 0.0 || alpha > 1.0) {
        throw std::invalid_argument("alpha must lie in (0, 1]");
    }
    ConfidenceInterval ci;
    ci.t = t;
    ci.n = static_cast<long>(std::ceil(t / delta));
    ci.alpha = alpha;
    ci.two_sided = two_sided;
    if (alpha == 1.0) {
        ci.half_width = 0.0; // the clamped bound is vacuously <= 1 at u = 0
    } else {
        const double s = two_sided ? 2.0 : 1.0;
        ci.half_width = std::sqrt(2.0 * (temperature + C0 * M * M / t) *
                                  std::log(s / alpha) / (t * h * h));
    }
    ci.bound_at_half_width =
        composite_tail_bound(t, ci.half_width, h, temperature, C0, M, two_sided);
    return ci;
}

// ---- Bias ---------------------------------------------------------------------

double bias_bound(double M, long n, double theta, double w1_initial) {
    require_finite(M, "M");
    if (M < 1) throw std::invalid_argument("M must be at least 1");
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    require_finite(theta, "theta");
    if (!(theta > 0.0 && theta < 1.0)) {
        throw std::invalid_argument("theta must lie in (0, 1)");
    }
    require_finite(w1_initial, "W1");
    if (w1_initial < 0) throw std::invalid_argument("W1 must be nonnegative");
    return M * w1_initial / (static_cast<double>(n) * theta);
}

double bias_total(double M, long n, double theta, double w1_initial, double c2,
                  double delta) {
    require_finite(c2, "c2");
    if (c2 < 0) throw std::invalid_argument("c2 must be nonnegative");
    require_finite(delta, "delta");
    if (delta < 0) throw std::invalid_argument("delta must be nonnegative");
    return bias_bound(M, n, theta, w1_initial) + c2 * std::sqrt(delta);
}

// ---- Tail experiment ------------------------------------------------------------

std::string observable_name(TestObservable phi) {
    switch (phi) {
        case TestObservable::FirstCoordinate: return "first-coordinate";
        case TestObservable::Norm: return "norm";
        case TestObservable::Cosine: return "cosine-first-coordinate";
    }
    throw std::invalid_argument("unknown observable");
}

double evaluate_observable(TestObservable phi, const Vec& state) {
    switch (phi) {
        case TestObservable::FirstCoordinate: return state(0);
        case TestObservable::Norm: return state.norm();
        case TestObservable::Cosine: return std::cos(state(0));
    }
    throw std::invalid_argument("unknown observable");
}

namespace {

// Time averages (1/n) sum_{k<n} phi(X_k) for `runs` independent chains.
// Initial states and chain noise are keyed by the supplied seed, so the
// pilot ensemble can run under a derived seed independent of the
// measurement ensemble.
std::vector<double> time_averages(const DriftSpec& drift, const KappaFn&,
                                  double delta, double temperature,
                                  TestObservable phi, const Vec& mean,
                                  double sigma, long n, long runs,
                                  std::uint64_t seed) {
    const int d = drift.dim();
    const InitialSampler init = gaussian_sampler(seed, mean, sigma);
    const NoiseField noise(seed, Stream::ChainNoise);
    std::vector<double> averages(static_cast<std::size_t>(runs), 0.0);
    std::vector<char> bad(static_cast<std::size_t>(runs), 0);
    parallel_for(static_cast<std::size_t>(runs), [&](std::size_t r) {
        Vec xs = init(static_cast<int>(r));
        double acc = 0.0;
        Vec z(d);
        for (long k = 0; k < n; ++k) {
            acc += evaluate_observable(phi, xs);
            for (int c = 0; c < d; ++c) {
                z(c) = noise.normal(r, static_cast<std::uint64_t>(k), 0,
                                    static_cast<std::uint64_t>(c));
            }
            xs = step(xs, drift, delta, temperature, z);
            if (!xs.allFinite() || xs.norm() > kDivergenceThreshold) {
                bad[r] = 1;
                return;
            }
        }
        averages[r] = acc / static_cast<double>(n);
    });
    for (std::size_t r = 0; r < bad.size(); ++r) {
        if (bad[r]) {
            throw std::runtime_error("chain " + std::to_string(r) +
                                     " diverged during the tail experiment");
        }
    }
    return averages;
}

} // namespace

VerificationReport concentration_experiment(
    const DriftSpec& drift, const KappaFn& kappa, double delta,
    double temperature, TestObservable phi, const InitialLaw& nu0, long n,
    double u, const ConcentrationExperimentOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const ConstantsReport consts =
        single_chain_constants(drift, kappa, delta, temperature);
    if (!consts.admissible) {
        throw GateViolation("inadmissible (delta, T) for the tail experiment: "
                            "delta=" + fmt(delta) + " vs delta0=" +
                            fmt(consts.delta0) + ", T=" + fmt(temperature) +
                            " vs T0=" + fmt(consts.T0));
    }
    if (nu0.mean.size() != drift.dim()) {
        throw std::invalid_argument("initial mean dimension mismatch");
    }
    if (std::isnan(nu0.sigma) || nu0.sigma < 0) {
        throw std::invalid_argument("initial sigma must be nonnegative");
    }
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    if (opts.runs < 1) throw std::invalid_argument("runs must be at least 1");

    // A point mass has no finite smoothing constant; substitute a tight
    // Gaussian and record the substitution.
    const bool dirac_fallback = nu0.sigma == 0.0;
    const double sigma0 =
        dirac_fallback ? std::sqrt(kDiracFallbackVariance) : nu0.sigma;

    ConcentrationInput in;
    in.n = n;
    in.u = u;
    in.theta = opts.theta.value_or(consts.rate * delta);
    in.C = opts.C.value_or(delta * temperature);
    in.C0 = sigma0 * sigma0;
    in.M = consts.prefactor;
    const double bound = concentration_tail_bound(in); // also validates

    // Pilot ensemble (10x larger, derived seed) estimates the centring mean.
    const std::uint64_t pilot_seed = opts.seed * 0x9E3779B97F4A7C15ULL + 1;
    const long pilot_runs = 10 * opts.runs;
    const std::vector<double> pilot =
        time_averages(drift, kappa, delta, temperature, phi, nu0.mean, sigma0, n,
                      pilot_runs, pilot_seed);
    double pilot_mean = 0.0;
    for (double a : pilot) pilot_mean += a;
    pilot_mean /= static_cast<double>(pilot_runs);
    double pilot_var = 0.0;
    for (double a : pilot) pilot_var += (a - pilot_mean) * (a - pilot_mean);
    pilot_var /= static_cast<double>(std::max<long>(pilot_runs - 1, 1));
    const double pilot_se = std::sqrt(pilot_var / static_cast<double>(pilot_runs));

    const std::vector<double> averages =
        time_averages(drift, kappa, delta, temperature, phi, nu0.mean, sigma0, n,
                      opts.runs, opts.seed);
    long exceed = 0;
    for (double a : averages) {
        if (a - pilot_mean >= u) ++exceed;
    }
    const double p_hat =
        static_cast<double>(exceed) / static_cast<double>(opts.runs);
    const double se =
        std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(opts.runs));

    VerificationReport rep;
    rep.claim = "time-average-tail n=" + std::to_string(n);
    rep.estimate = p_hat;
    rep.bound = bound;
    rep.margin = 3.0 * se;
    rep.location = "observable " + observable_name(phi) + ", u=" + fmt(u);
    rep.provenance = Provenance::monte_carlo(opts.runs, se);
    rep.details = {
        {"n", n},
        {"u", u},
        {"theta", in.theta},
        {"C", in.C},
        // The exponent uses the one-step smoothing constant delta T
        // (logarithmic-Sobolev convention); the same kernel's Poincare
        // constant is 2 delta T.  Flagged so scans can tell them apart.
        {"kernel_poincare_constant", 2.0 * delta * temperature},
        {"smoothing_constant_convention", "log-sobolev (delta T)"},
        {"C0", in.C0},
        {"M", in.M},
        {"sigma0", sigma0},
        {"dirac_fallback", dirac_fallback},
        {"runs", opts.runs},
        {"pilot_runs", pilot_runs},
        {"pilot_mean", pilot_mean},
        {"pilot_se", pilot_se},
        {"observable", observable_name(phi)},
    };
    rep.finalize();
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

// ---- One-step relative entropy ---------------------------------------------------

OneStepKl one_step_kl(const DriftSpec& drift, double delta, double temperature,
                      const Vec& x, const Vec& y) {
    require_finite(delta, "delta");
    require_finite(temperature, "T");
    if (delta <= 0) throw std::invalid_argument("delta must be positive");
    if (temperature <= 0) throw std::invalid_argument("T must be positive");
    if (x.size() != drift.dim() || y.size() != drift.dim()) {
        throw std::invalid_argument("endpoint dimension mismatch");
    }
    if (!drift.certificate.has_value()) {
        throw std::invalid_argument(
            "drift certificate required for the Lipschitz display");
    }
    const Vec gap = (x - y) + delta * (drift(x) - drift(y));
    OneStepKl out;
    out.exact = gap.squaredNorm() / (4.0 * delta * temperature);
    const double lb = drift.certificate->lipschitz;
    const double factor = (1.0 + delta * lb) * (1.0 + delta * lb);
    out.displayed_bound =
        factor * (x - y).squaredNorm() / (2.0 * delta * temperature);
    out.displayed_uses_half_variance = true;
    out.tv_bound = std::sqrt(0.5 * out.exact);
    return out;
}

// ---- n-step relative entropy ------------------------------------------------------

double EntropyInput::gate_ceiling() const {
    return 1.0 / (16.0 * horizon * lipschitz * lipschitz *
                  std::exp(2.0 * horizon * lipschitz));
}

void EntropyInput::validate() const {
    if (n < 2) throw std::invalid_argument("n must be at least 2");
    require_finite(delta, "delta");
    if (delta <= 0) throw std::invalid_argument("delta must be positive");
    require_finite(temperature, "T");
    if (temperature <= 0) throw std::invalid_argument("T must be positive");
    require_finite(lipschitz, "L_b");
    if (lipschitz <= 0) throw std::invalid_argument("L_b must be positive");
    require_finite(hessian_lipschitz, "C");
    if (hessian_lipschitz < 0) {
        throw std::invalid_argument("C must be nonnegative");
    }
    require_finite(horizon, "horizon");
    if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
    if (x.size() == 0 || x.size() != y.size()) {
        throw std::invalid_argument("endpoints must share a positive dimension");
    }
    if (!(static_cast<double>(n) * delta < horizon)) {
        throw std::invalid_argument("n delta must stay below the horizon");
    }
    const double ceiling = gate_ceiling();
    if (delta > ceiling) {
        throw GateViolation("delta=" + fmt(delta) +
                            " exceeds the n-step entropy gate 1/(16 c L_b^2 "
                            "exp(2 c L_b)) = " + fmt(ceiling));
    }
}

EntropyBounds entropy_bound_n_step(const EntropyInput& in) {
    in.validate();
    const double d = static_cast<double>(in.x.size());
    const double nd = static_cast<double>(in.n) * in.delta;
    const double l2 = in.lipschitz * in.lipschitz;
    const double curvature = 0.5 * in.horizon * in.horizon *
                             in.hessian_lipschitz * in.hessian_lipschitz * d *
                             std::exp(2.0 * in.horizon * in.lipschitz);
    EntropyBounds out;
    out.point_to_point =
        ((in.horizon * l2 + 1.0 / nd) / (2.0 * in.temperature) + curvature) *
        (in.x - in.y).squaredNorm();
    out.per_w2_squared = (nd * l2 + 1.0 / nd) / (2.0 * in.temperature) + curvature;
    out.gate_ceiling = in.gate_ceiling();
    return out;
}

VerificationReport entropy_check_linear(double c0, double delta,
                                        double temperature, long n, const Vec& x,
                                        const Vec& y, double horizon) {
    const auto t0 = std::chrono::steady_clock::now();
    require_finite(c0, "c0");
    if (c0 <= 0) throw std::invalid_argument("c0 must be positive");
    EntropyInput in;
    in.n = n;
    in.delta = delta;
    in.temperature = temperature;
    in.lipschitz = c0;
    in.hessian_lipschitz = 0.0;
    in.horizon = horizon > 0.0 ? horizon
                               : 2.0 * static_cast<double>(n) * delta;
    in.x = x;
    in.y = y;
    const EntropyBounds bounds = entropy_bound_n_step(in); // validates

    // n-step kernel from z: N(a^n z, sigma_n^2 I) with a = 1 - c0 delta and
    // sigma_n^2 = 2 delta T sum_{j<n} a^{2j}; same-covariance Gaussian
    // relative entropy is |mean gap|^2 / (2 sigma_n^2).
    const double a = 1.0 - c0 * delta;
    const double a2 = a * a;
    const double geom =
        a2 == 1.0 ? static_cast<double>(n)
                  : (1.0 - std::pow(a2, static_cast<double>(n))) / (1.0 - a2);
    const double sigma_n_sq = 2.0 * delta * temperature * geom;
    const double kl = std::pow(a, 2.0 * static_cast<double>(n)) *
                      (x - y).squaredNorm() / (2.0 * sigma_n_sq);

    VerificationReport rep;
    rep.claim = "entropy-n-step-linear n=" + std::to_string(n);
    rep.estimate = kl;
    rep.bound = bounds.point_to_point;
    rep.margin = 0.0;
    rep.location = "endpoints |x|=" + fmt(x.norm()) + ", |y|=" + fmt(y.norm());
    rep.provenance = Provenance::formula();
    rep.details = {
        {"n", n},
        {"delta", delta},
        {"temperature", temperature},
        {"horizon", in.horizon},
        {"lipschitz", c0},
        {"decay_factor", a},
        {"sigma_n_sq", sigma_n_sq},
        {"per_w2_coefficient", bounds.per_w2_squared},
        {"gate_ceiling", bounds.gate_ceiling},
    };
    rep.finalize();
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

} // namespace wclb
