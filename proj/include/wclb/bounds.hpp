// Concentration and relative-entropy bounds for time averages of the Euler
// chain: the finite-sample tail bound for (1/n) sum phi(X_k), its inversion
// into a confidence half-width, the long-run bias bound, a simulation-backed
// tail experiment, and the one-step / n-step Gaussian relative-entropy
// estimates with their closed-form linear-chain verification.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "wclb/constants.hpp"
#include "wclb/drift.hpp"
#include "wclb/kappa.hpp"
#include "wclb/report.hpp"

namespace wclb {

// ---- Tail bound for time averages ------------------------------------------

// Inputs of the finite-sample deviation bound
//   P( (1/n) sum_{k<n} phi(X_k) - E[...] >= u )
//     <= exp( -n^2 u^2 theta^2 / (2 ((n-1) C theta^2 + C0 M^2)) )
// for 1-Lipschitz phi.  theta is the per-step contraction rate (h delta), C
// the per-step smoothing constant (delta T, logarithmic-Sobolev convention;
// the kernel's Poincare constant is 2 delta T -- both are reported wherever
// the distinction could matter), C0 the constant of the initial law, and M
// the weak-contraction prefactor.
struct ConcentrationInput {
    long n = 1;        // number of averaged steps
    double u = 0.0;    // deviation level, >= 0
    double theta = 0.0; // per-step contraction rate, in (0, 1)
    double C = 0.0;    // per-step smoothing constant, >= 0
    double C0 = 0.0;   // initial-law constant, >= 0
    double M = 1.0;    // weak-contraction prefactor, >= 1

    void validate() const; // throws std::invalid_argument

    // Fills theta = h delta and C = delta T from a constants report (the
    // report must be admissible); M is taken from the report.
    static ConcentrationInput from_constants(const ConstantsReport& consts, long n,
                                             double u, double C0);
};

// The tail probability bound above, clamped to [0, 1].  u = 0 (or a zero
// denominator with u = 0) yields the vacuous bound 1.
double concentration_tail_bound(const ConcentrationInput& in);

// ---- Confidence interval from the composite time-parametrised bound --------

// Forward bound over a time horizon t (n = t/delta steps):
//   P( |average - mean| >= u ) <= s exp( -t u^2 h^2 / (2 (T + C0 M^2 / t)) ),
// s = 2 two-sided, s = 1 one-sided; clamped to [0, 1].
double composite_tail_bound(double t, double u, double h, double temperature,
                            double C0, double M, bool two_sided = true);

struct ConfidenceInterval {
    double t = 0;        // time horizon
    long n = 0;          // ceil(t / delta) chain steps realising the horizon
    double alpha = 0;    // target failure probability
    bool two_sided = true;
    double half_width = 0;           // smallest u with composite bound <= alpha
    double bound_at_half_width = 0;  // forward bound evaluated back at that u
};

// Inverts the composite bound in closed form:
//   u(alpha) = sqrt( 2 (T + C0 M^2 / t) log(s / alpha) / (t h^2) ).
// alpha = 1 returns half-width 0 (the clamped bound is vacuously <= 1);
// alpha outside (0, 1] throws std::invalid_argument.
ConfidenceInterval confidence_interval(double t, double delta, double h,
                                       double temperature, double C0, double M,
                                       double alpha, bool two_sided = true);

// ---- Bias of the time average ----------------------------------------------

// Long-run bias bound |E[average] - stationary mean| <= M W1 / (n theta)
// for 1-Lipschitz observables; W1 is a transport distance between the
// initial law and the stationary law.
double bias_bound(double M, long n, double theta, double w1_initial);

// Adds the discretisation term: M W1 / (n theta) + c2 sqrt(delta).  The
// coefficient c2 is not computable from the certificate and must be supplied.
double bias_total(double M, long n, double theta, double w1_initial, double c2,
                  double delta);

// ---- Simulation-backed tail experiment --------------------------------------

// Built-in 1-Lipschitz observables for the experiment.
enum class TestObservable { FirstCoordinate, Norm, Cosine };

std::string observable_name(TestObservable phi);
double evaluate_observable(TestObservable phi, const Vec& state);

// Initial law of the experiment: N(mean, sigma^2 I), or a point mass when
// sigma = 0.  A point mass has no finite smoothing constant, so it is
// replaced by a tight Gaussian with sigma^2 = kDiracFallbackVariance, and
// C0 = sigma^2 either way.
struct InitialLaw {
    Vec mean;
    double sigma = 0.0;
};

inline constexpr double kDiracFallbackVariance = 1e-4;

struct ConcentrationExperimentOptions {
    long runs = 10000;          // measurement chains
    std::uint64_t seed = 2024;
    // Overrides for sensitivity scans; defaults come from the constants report.
    std::optional<double> theta; // default h delta
    std::optional<double> C;     // default delta T
};

// Runs `runs` independent chains of n steps from the initial law, forms the
// time average A_r = (1/n) sum_{k<n} phi(X_k) for each, centres by the mean
// estimated from a 10x larger pilot ensemble, and compares the empirical
// tail frequency P_hat(A - mean >= u) against concentration_tail_bound with
// a 3-standard-error margin.  Throws GateViolation when (delta, T) is
// inadmissible for the weight, std::runtime_error if any chain diverges.
VerificationReport concentration_experiment(
    const DriftSpec& drift, const KappaFn& kappa, double delta,
    double temperature, TestObservable phi, const InitialLaw& nu0, long n,
    double u, const ConcentrationExperimentOptions& opts = {});

// ---- One-step relative entropy ----------------------------------------------

// Relative entropy between the one-step kernels from x and from y.  Both are
// Gaussians with covariance 2 delta T I, so the exact value is
//   |x + delta b(x) - y - delta b(y)|^2 / (4 delta T).
// The published display uses the prefactor 1/(2 delta T) together with the
// Lipschitz estimate of the mean gap; it is reported alongside for
// comparison (it is NOT the same-covariance Gaussian identity -- see the
// `displayed_uses_half_variance` flag and the README).
struct OneStepKl {
    double exact = 0;           // |mean gap|^2 / (4 delta T)
    double displayed_bound = 0; // (1 + delta L_b)^2 |x - y|^2 / (2 delta T)
    bool displayed_uses_half_variance = true;
    double tv_bound = 0;        // Pinsker: sqrt(exact / 2) dominates total variation
};

// Requires delta, T > 0, matching dimensions, and a certificate on the drift
// (for the Lipschitz display).
OneStepKl one_step_kl(const DriftSpec& drift, double delta, double temperature,
                      const Vec& x, const Vec& y);

// ---- n-step relative entropy -------------------------------------------------

// Inputs of the n-step entropy bound between chains started at x and y and
// run for n steps of size delta within a time horizon c (n delta < c), for a
// drift with Lipschitz constant L_b and Hessian-Lipschitz constant C.
// The step gate delta <= 1 / (16 c L_b^2 exp(2 c L_b)) is enforced.
struct EntropyInput {
    long n = 2;
    double delta = 0;
    double temperature = 0;
    double lipschitz = 0;         // L_b
    double hessian_lipschitz = 0; // C (zero for linear drifts)
    double horizon = 0;           // c, with n delta < c
    Vec x, y;

    double gate_ceiling() const; // 1 / (16 c L_b^2 exp(2 c L_b))
    // Throws std::invalid_argument on malformed fields, GateViolation with
    // the violated inequality when delta exceeds the gate ceiling.
    void validate() const;
};

struct EntropyBounds {
    // ((1/(2T)) (c L_b^2 + 1/(n delta)) + (1/2) c^2 C^2 d e^{2 c L_b}) |x-y|^2.
    double point_to_point = 0;
    // Same with n delta L_b^2 in place of c L_b^2, per unit squared
    // 2-Wasserstein distance between the initial law and the stationary law.
    double per_w2_squared = 0;
    double gate_ceiling = 0;
};

EntropyBounds entropy_bound_n_step(const EntropyInput& in);

// Closed-form check for the linear drift b(x) = -c0 x, whose n-step kernel
// is Gaussian: relative entropy a^{2n} |x - y|^2 / (2 sigma_n^2) with
// a = 1 - c0 delta and sigma_n^2 = 2 delta T sum_{j<n} a^{2j}, compared
// against the point-to-point bound with L_b = c0 and C = 0.  horizon = 0
// picks c = 2 n delta.  Throws GateViolation when delta exceeds the gate.
VerificationReport entropy_check_linear(double c0, double delta,
                                        double temperature, long n, const Vec& x,
                                        const Vec& y, double horizon = 0.0);

} // namespace wclb
