// Numerical verification of the contraction and Poincare statements: one-step
// weighted-semimetric contraction, k-step W2 envelopes, particle-system
// contraction, gradient commutation for linear chains, and local Poincare
// inequalities.  Every check returns a VerificationReport whose pass flag is
// recomputable from (estimate, bound, margin).
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wclb/constants.hpp"
#include "wclb/report.hpp"
#include "wclb/sim.hpp"

namespace wclb {

enum class ContractionEstimator {
    Quadrature,  // exact radial integrals of the weight (deterministic)
    MonteCarlo,  // sampled one-step expectations with 3-SE margins
};

struct AnalysisOptions {
    ContractionEstimator estimator = ContractionEstimator::Quadrature;
    long samples = 100000;     // per grid pair (Monte Carlo)
    std::uint64_t seed = 2024;
};

// Deterministic pair placement covering the proof's case split: both points
// inside the contraction ball, straddling pairs, and both beyond the weight
// support (plus one coincident pair).
struct PairGrid {
    std::vector<std::pair<Vec, Vec>> pairs;
};
PairGrid default_pair_grid(const KappaFn& kappa, double delta, double temperature);

// Checks E[rho(X1, Y1)] <= (1 - h delta) rho(x, y) under the synchronous
// one-step coupling on every grid pair.  Estimates and bounds are carried in
// excess form (rho1/rho0 - 1 vs -h delta) so the tiny admissible step sizes
// stay resolvable.  Throws GateViolation when (delta, T) is inadmissible.
VerificationReport one_step_rho_contraction(const DriftSpec& drift,
                                            const KappaFn& kappa, double delta,
                                            double temperature,
                                            const PairGrid& grid = {},
                                            const AnalysisOptions& opts = {});

// Runs `replicas` synchronously coupled pairs from optimally paired initial
// clouds and, at every step in checkpoints (empty = all k <= k_max), compares
// the coupling upper bound against M (1 - h delta)^k W2(mu0, nu0).  Exact
// assignment W2 between the recorded marginals is reported alongside in the
// details (its finite-sample bias inflates small distances); pass/fail is
// decided on the coupling bound.  details.k_star records the step after
// which the weak envelope beats the trivial bound M W2.
std::vector<VerificationReport> w2_contraction_envelope(
    const DriftSpec& drift, const KappaFn& kappa, double delta, double temperature,
    const InitialSampler& mu0, const InitialSampler& nu0, long k_max, int replicas,
    const std::vector<long>& checkpoints = {}, const AnalysisOptions& opts = {});

struct ParticlePairGrid {
    std::vector<std::pair<Mat, Mat>> pairs;
};
ParticlePairGrid default_particle_pair_grid(const ParticleDriftSpec& pspec,
                                            const KappaFn& kappa);

// One-step particle contraction: E[rho~(X1, Y1)] vs (1 - (h - h~) delta)
// rho~(x, y) per grid pair, with the ratio-form interaction drag.  When no
// contraction is predicted (h <= h~) the check degrades to a decay monitor
// with bound 1 and says so in the claim.
VerificationReport particle_contraction(const ParticleDriftSpec& pspec,
                                        const KappaFn& kappa, double delta,
                                        double temperature,
                                        const ParticlePairGrid& grid = {},
                                        const AnalysisOptions& opts = {});

// For the linear chain the k-step kernel is Gaussian, and gradient and kernel
// commute exactly: grad Q^k f = (1 - c0 delta)^k Q^k grad f.  Verified by
// central finite differences on quadrature evaluations of Q^k f (Richardson
// refined); estimate is the worst relative discrepancy, bound 0, margin 1e-4.
// Rejects non-linear drifts.
VerificationReport gradient_commutation_linear(
    const DriftSpec& drift, double delta, double temperature, long k,
    const std::function<double(const Vec&)>& f, const Vec& x,
    const AnalysisOptions& opts = {});

// Smooth test functions with analytic gradients for the Poincare checks.
struct TestFunction {
    std::string name;
    std::function<double(const Vec&)> f;
    std::function<Vec(const Vec&)> grad;
};
// Coordinates, |z|^2, z1^2, and two cosine waves.
std::vector<TestFunction> default_test_functions(int dim);

// Local Poincare at the k-step kernel from x: Var_{Q^k(x,.)}(f) <=
// C_P E_{Q^k(x,.)} |grad f|^2 for every test function, with C_P =
// 2 T M^2 / (2h - h^2 delta) from the module constants and 3-SE margins.
// The one-step tightness case (constant 2 delta T, equality for linear f) is
// run alongside and summarised in details.tightness.
VerificationReport poincare_check(const DriftSpec& drift, const KappaFn& kappa,
                                  double delta, double temperature, long k,
                                  const Vec& x,
                                  const std::vector<TestFunction>& family = {},
                                  const AnalysisOptions& opts = {});

// k = 1, f(z) = z1: the kernel variance equals 2 delta T exactly for any
// drift; checks |Var - 2 delta T| <= 3 SE.
VerificationReport poincare_onestep_tightness(const DriftSpec& drift, double delta,
                                              double temperature, const Vec& x,
                                              const AnalysisOptions& opts = {});

} // namespace wclb
