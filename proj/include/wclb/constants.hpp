// Derived-constant computation and (delta, T) admissibility for the weighted
// contraction machinery: step-size gates delta1..delta4, temperature gates
// T1..T3, the enlarged radius r_bar, the per-step rate h, the weak-contraction
// prefactor M, and the local Poincare constant.  Particle-system analogues are
// included.  The scalar gate formulas are inline so lightweight callers can
// evaluate them without linking the full module.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include <json.hpp>

#include "wclb/drift.hpp"
#include "wclb/kappa.hpp"
#include "wclb/math.hpp"

namespace wclb {

// ---- Scalar gate formulas (single chain) ----------------------------------

// Largest step for which the drift displacement is a contraction-friendly
// perturbation of the identity.
inline double gate_delta1(double lipschitz) { return 1.0 / lipschitz; }

// Step ceiling keeping the squared-increment term below the contraction rate.
inline double gate_delta2(double contraction, double lipschitz) {
    return contraction / (lipschitz * lipschitz);
}

// Step ceiling keeping the squared-increment term below the expansion rate.
inline double gate_delta3(double expansion, double lipschitz) {
    return expansion / (lipschitz * lipschitz);
}

// Step ceiling under which one Gaussian smoothing step strictly decreases the
// inner weight branch: R^2 d G(d/2) / (8 T (d+2) (d G(d/2) + 2 T G((d+2)/2))).
inline double gate_delta4(double radius, int dim, double temperature) {
    const double gd2 = math::gamma_fn(0.5 * dim);
    const double gd2p1 = math::gamma_fn(0.5 * (dim + 2));
    const double num = radius * radius * dim * gd2;
    const double den =
        8.0 * temperature * (dim + 2) * (dim * gd2 + 2.0 * temperature * gd2p1);
    return num / den;
}

// Radius beyond which one Euler step cannot re-enter the weight support:
// (R_* + delta |b(0)|) / (1 - delta L_b).  Undefined when delta L_b >= 1.
inline double enlarged_radius(double support_radius, double delta,
                              double drift_at_origin_norm, double lipschitz) {
    const double den = 1.0 - delta * lipschitz;
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    return (support_radius + delta * drift_at_origin_norm) / den;
}

// Temperature floors making the drift shift negligible against the weight's
// decrease (T1, over the contraction ball) and growth allowance (T2, over the
// enlarged ball), plus the absolute floor T3 from the weight's sup norm.
inline double gate_T1(double grad_kappa_sup, double drift_sup_inner, double a) {
    return 2.0 * grad_kappa_sup * drift_sup_inner / a;
}
inline double gate_T2(double grad_kappa_sup, double drift_sup_enlarged, double L) {
    return 2.0 * grad_kappa_sup * drift_sup_enlarged / L;
}
inline double gate_T3(double kappa_sup) { return 2.0 * kappa_sup; }

// Per-step contraction rate of the weighted semimetric.
inline double rate_h(double contraction, double a) {
    return std::min(0.5 * contraction, 0.25 * a);
}

// Prefactor converting the weighted contraction into a weak W2 contraction.
inline double weak_prefactor(double kappa_sup, double temperature) {
    return 1.0 + 2.0 * kappa_sup / temperature;
}

// Composed local Poincare constant C_LP Mbar^2 / (1 - (1 - wbar)^2).
double poincare_constant(double c_lp, double m_bar, double w_bar);

// ---- Reports ----------------------------------------------------------------

// Particle-system block of a ConstantsReport.
struct ParticleConstants {
    double delta1 = 0, delta2 = 0, delta3 = 0, delta4 = 0, delta0 = 0;
    double T1 = 0, T2 = 0, T3 = 0, T0 = 0;
    double r_tilde = 0; // enlarged radius for the interacting system
    // Interaction drag on the rate, in the two published forms (see
    // README): multiplied by the absolute factor (T0_tilde + 2 sup kappa)
    // versus the dimensionless ratio (1 + 2 sup kappa / T).  The ratio form
    // is the default net-rate predictor.
    double h_tilde_displayed = 0;
    double h_tilde_ratio = 0;
    double net_rate_displayed = 0; // h - h_tilde_displayed
    double net_rate_ratio = 0;     // h - h_tilde_ratio
    bool sufficient_condition = false; // min(c/2, L_F/2) >= 5 C_G
    bool admissible = false;           // delta <= delta0 and T >= T0 (particle gates)

    nlohmann::json to_json() const;
    static ParticleConstants from_json(const nlohmann::json& j);
};

// Every derived constant for a given (certificate, weight, delta, T).
struct ConstantsReport {
    // Echo of the inputs.
    double delta = 0, temperature = 0;
    AssumptionCertificate certificate;
    nlohmann::json kappa_params; // weight parameters, round-trippable

    // Step-size gates and their minimum.
    double delta1 = 0, delta2 = 0, delta3 = 0, delta4 = 0, delta0 = 0;
    // Temperature floors and their maximum.
    double T1 = 0, T2 = 0, T3 = 0, T0 = 0;
    double r_bar = 0;  // enlarged radius (infinity when delta lipschitz >= 1)
    double rate = 0;   // h = min(c/2, a/4)
    double prefactor = 0;  // M = 1 + 2 sup kappa / T
    double poincare = 0;   // C_P = 2 T M^2 / (2h - h^2 delta)
    // Sup-norm inputs.
    double kappa_sup = 0, kappa_grad_sup = 0;
    double drift_sup_inner = 0;    // sup |b| over the contraction ball
    double drift_sup_enlarged = 0; // sup |b| over the enlarged ball
    bool drift_sup_is_estimate = false;
    // Admissibility of the supplied pair.
    bool delta_ok = false; // delta <= delta0(T)
    bool temperature_ok = false; // T >= T0(delta)
    bool admissible = false;
    // True sup-norm of the weight vs its simplified published estimate
    // (1 + 84K/c) 48KR^2/d; they disagree, both are reported.
    double kappa_sup_simplified_display = 0;

    std::optional<ParticleConstants> particle;

    nlohmann::json to_json() const;
    static ConstantsReport from_json(const nlohmann::json& j);
    // Aligned human-readable table.
    std::string to_table() const;
};

// ---- Operations -------------------------------------------------------------

// Fills every constant for a single chain.  The drift supplies both the
// certificate (must be present) and the ball sup-norms.
ConstantsReport single_chain_constants(const DriftSpec& drift, const KappaFn& kappa,
                                       double delta, double temperature);

// Low-level variant with precomputed sup-norms: sup_b(r) returns
// sup_{|y| <= r} |b(y)|; sup_is_estimate marks numeric (safety-factored) sups.
ConstantsReport single_chain_constants(const AssumptionCertificate& cert,
                                       const KappaFn& kappa, double delta,
                                       double temperature,
                                       const std::function<double(double)>& sup_b,
                                       bool sup_is_estimate);

// Particle-system constants; also fills the single-chain block for the
// confinement drift.
ConstantsReport particle_constants(const ParticleDriftSpec& pspec,
                                   const KappaFn& kappa, double delta,
                                   double temperature);

// (delta, T) selection.
enum class SolveStrategy { ValidateOnly, Alternate };

struct SolveResult {
    enum class Outcome { Admissible, Inadmissible, Converged, NonConvergence };
    Outcome outcome;
    double delta = 0, temperature = 0;
    int iterations = 0;
    ConstantsReport report; // at the final pair
    nlohmann::json trace;   // per-iteration (delta, T) for the alternate solver

    bool ok() const {
        return outcome == Outcome::Admissible || outcome == Outcome::Converged;
    }
};

// validate-only: echoes admissibility of the supplied pair.  alternate:
// iterates delta <- delta0(T), T <- T0(delta) from the analytic starting
// point and stops at a 1e-10 relative fixed point, or reports
// non-convergence after max_iter.
SolveResult solve_admissible_pair(const DriftSpec& drift, const KappaFn& kappa,
                                  SolveStrategy strategy, double delta = 0,
                                  double temperature = 0, int max_iter = 200);

} // namespace wclb
