#pragma once
// Numerical kernels shared across modules: gamma-function helpers, adaptive
// quadrature wrappers, Gauss-Hermite rules, and the radial law of |m e1 + s Z|
// for Z standard d-dimensional Gaussian (the workhorse behind every
// expectation of a radial function under one smoothing step).

#include <functional>
#include <memory>
#include <vector>

namespace wclb::math {

// Gamma(x) via the standard library (Lanczos-class implementation).
double gamma_fn(double x);
double log_gamma(double x);

// Surface measure of the (d-2)-sphere, |S^{d-2}| = 2 pi^{(d-1)/2} / Gamma((d-1)/2).
// Valid for d >= 2 (|S^0| = 2).
double sphere_area_dm2(int d);

// Adaptive 15-point Gauss-Kronrod on [a, b].  If err_out is non-null it
// receives the error estimate reported by the quadrature.
double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double rel_tol = 1e-11, double* err_out = nullptr);

// tanh-sinh quadrature on [a, b]; robust to integrable endpoint singularities.
double integrate_tanh_sinh(const std::function<double(double)>& f, double a,
                           double b, double rel_tol = 1e-12);

// Gauss-Hermite rule for the weight e^{-t^2} on R (physicists' convention):
// integral of e^{-t^2} h(t) dt ~= sum w_i h(t_i).  Nodes ascending.
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
HermiteRule gauss_hermite(int n);

// Law of W = |m e1 + sigma Z|, Z ~ N(0, I_d): density on [0, inf) and
// expectations of radial test functions against it.  The angular integral is
// reduced to the scalar factor
//   lam(z) = e^{-z} * integral_0^pi sin^{d-2}(t) e^{z cos t} dt,
// evaluated by quadrature in a form that never exponentiates a large
// positive argument, so the density is stable for arbitrarily large m/sigma.
class RadialGaussian {
public:
    RadialGaussian(int d, double m, double sigma);

    double dim() const { return d_; }
    double mean_norm() const { return m_; }
    double sigma() const { return sigma_; }

    // Density of W at r >= 0.
    double density(double r) const;

    // Angular factor lam(z) for z >= 0 (d >= 2 only).  Served from a
    // per-dimension Chebyshev table (built once, accurate to ~1e-12 relative);
    // angular_factor_quad is the direct quadrature it is built from.
    double angular_factor(double z) const;
    static double angular_factor_quad(int d, double z);

    // integral of f(r) * density(r) dr over the effective support
    // [max(0, m - width*sigma), m + width*sigma], split at the given
    // breakpoints (any order; points outside the window are ignored).
    // Each segment is integrated by adaptive Gauss-Kronrod at rel_tol.
    double expectation(const std::function<double(double)>& f,
                       const std::vector<double>& breakpoints = {},
                       double rel_tol = 1e-11, double width = 45.0) const;

private:
    struct AngularTable;
    static std::shared_ptr<const AngularTable> angular_table(int d);

    int d_;
    double m_, sigma_;
    double log_norm_; // log of r-independent density prefactor (d >= 2)
    std::shared_ptr<const AngularTable> table_;
};

} // namespace wclb::math
