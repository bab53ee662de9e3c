// Compactly supported C^1 radial weight used inside the contraction
// semimetric, plus the semimetric itself (single-chain rho and per-particle
// rho_tilde) and a verifier for the weight's two defining smoothing
// inequalities.
//
// The weight kappa(x) = S(|x|) has three radial branches:
//   [0, 2R]        S(r) = alpha1 - (a/d) r^2          (concave cap)
//   (2R, r_zero]   S(r) = (L/(2d) - eps) (r - alpha2)^2 (convex tail)
//   (r_zero, inf)  S(r) = 0
// with alpha1, alpha2 chosen so value and slope match at both seams and the
// support ends exactly at r_zero = alpha2.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "wclb/drift.hpp"
#include "wclb/report.hpp"

namespace wclb {

class KappaFn {
  public:
    // Builds the weight from certified drift constants.  Defaults:
    // a = 12K, L = c/6, eps = c/(42d).  Preconditions: a >= 12K,
    // 0 < L <= c/6, 0 < eps < L/(2d).
    static KappaFn build(const AssumptionCertificate& cert,
                         std::optional<double> a = std::nullopt,
                         std::optional<double> L = std::nullopt,
                         std::optional<double> eps = std::nullopt);

    double operator()(const Vec& x) const;
    Vec gradient(const Vec& x) const;

    // Radial profile S and its derivative; kappa(x) = S(|x|).
    double radial(double r) const;
    double radial_derivative(double r) const;

    // S(r) - S(m), evaluated branch-aware so the huge constant offset alpha1
    // never enters: near the support peak both values are ~alpha1 while their
    // difference can be ~1e-15 alpha1, far below what subtracting two direct
    // evaluations can resolve.
    double radial_difference(double r, double m) const;

    int dim() const { return dim_; }
    double a() const { return a_; }
    double L() const { return L_; }
    double eps() const { return eps_; }
    double ball_radius() const { return R_; }        // R from the certificate
    double seam_radius() const { return 2.0 * R_; }   // branch switch
    double support_radius() const { return alpha2_; } // r_zero = alpha2
    double sup_norm() const { return alpha1_; }       // attained at the origin
    double grad_sup_norm() const;                     // 4 a R / d, exact
    double contraction_rate() const { return c_; }    // c from the certificate
    double expansion_rate() const { return K_; }      // K from the certificate

    nlohmann::json to_json() const;
    static KappaFn from_json(const nlohmann::json& j);

  private:
    KappaFn() = default;

    int dim_ = 1;
    double R_ = 0, c_ = 0, K_ = 0;
    double a_ = 0, L_ = 0, eps_ = 0;
    double beta1_ = 0, beta2_ = 0;   // branch curvatures a/d and L/(2d) - eps
    double alpha1_ = 0, alpha2_ = 0; // peak value and tail centre (= support end)
};

// Weighted squared-distance semimetric |x-y|^2 (T + kappa(x) + kappa(y)).
double rho(const KappaFn& kappa, double temperature, const Vec& x, const Vec& y);

// Per-particle sum of rho over the rows of two N x d states.
double rho_tilde(const KappaFn& kappa, double temperature, const Mat& X,
                 const Mat& Y);

// ---- Verification of the two smoothing inequalities -------------------------
//
// Drift-free (requires delta <= delta4):
//   E[kappa(x + sqrt(2 delta T) Z)] <= kappa(x) - a delta T   for |x| <= R
//   E[kappa(x + sqrt(2 delta T) Z)] <= kappa(x) + L delta T   for all x
// With a drift b (requires delta <= 1/L_b and T >= max(T1, T2)):
//   E[kappa(x + delta b(x) + sqrt(2 delta T) Z)] <= kappa(x) - (a/2) delta T
//                                                             for |x| <= R
//   E[kappa(x + delta b(x) + sqrt(2 delta T) Z)] <= kappa(x) + (3/2) L delta T
//                                                             for all x

enum class KappaEstimator { QuadratureRadial, MonteCarlo };

struct KappaVerifyOptions {
    KappaEstimator estimator = KappaEstimator::QuadratureRadial;
    long long samples = 200000; // Monte Carlo sample count per grid point
    std::uint64_t seed = 2024;
    std::vector<Vec> grid; // evaluation points; a covering default when empty
};

// Checks both inequalities on the grid and returns the worst slack.  The
// expectation difference E[kappa(shifted)] - kappa(x) is computed directly
// (radial quadrature of the smoothing distribution against
// radial_difference, or Monte Carlo with a 3-standard-error margin).
VerificationReport verify_kappa_conditions(const KappaFn& kappa, double delta,
                                           double temperature,
                                           const DriftSpec* drift = nullptr,
                                           const KappaVerifyOptions& opts = {});

} // namespace wclb
