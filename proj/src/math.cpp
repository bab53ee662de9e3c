#include "wclb/math.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace wclb::math {

double gamma_fn(double x) { return std::tgamma(x); }
double log_gamma(double x) { return std::lgamma(x); }

double sphere_area_dm2(int d) {
    if (d < 2) throw std::invalid_argument("sphere_area_dm2: need d >= 2");
    const double e = 0.5 * (d - 1);
    return 2.0 * std::pow(M_PI, e) / gamma_fn(e);
}

double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double rel_tol, double* err_out) {
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, 15, rel_tol, &err);
    if (err_out) *err_out = err;
    return v;
}

double integrate_tanh_sinh(const std::function<double(double)>& f, double a,
                           double b, double rel_tol) {
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(f, a, b, rel_tol);
}

HermiteRule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: need n >= 1");
    // Golub-Welsch: Jacobi matrix for Hermite polynomials has zero diagonal
    // and off-diagonal sqrt(k/2); weights from first eigenvector components.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(0.5 * k);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    HermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mu0 = std::sqrt(M_PI); // integral of e^{-t^2}
    for (int k = 0; k < n; ++k) {
        rule.nodes[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        rule.weights[k] = mu0 * v0 * v0;
    }
    return rule;
}

namespace {

// Chebyshev interpolant on [a, b]: first-kind nodes, Clenshaw evaluation.
struct Cheb {
    double a = 0.0, b = 1.0;
    std::vector<double> c;
};

Cheb cheb_fit(double a, double b, int n, const std::function<double(double)>& f) {
    std::vector<double> fv(n);
    for (int j = 0; j < n; ++j) {
        const double x = std::cos(M_PI * (j + 0.5) / n);
        fv[j] = f(a + 0.5 * (b - a) * (x + 1.0));
    }
    Cheb out{a, b, std::vector<double>(n)};
    for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += fv[j] * std::cos(M_PI * k * (j + 0.5) / n);
        out.c[k] = 2.0 * s / n;
    }
    return out;
}

double cheb_eval(const Cheb& ch, double t) {
    const double x = 2.0 * (t - ch.a) / (ch.b - ch.a) - 1.0;
    double b0 = 0.0, b1 = 0.0;
    for (std::size_t k = ch.c.size(); k-- > 1;) {
        const double nxt = 2.0 * x * b0 - b1 + ch.c[k];
        b1 = b0;
        b0 = nxt;
    }
    return x * b0 - b1 + 0.5 * ch.c[0];
}

} // namespace

// Cached per-dimension representation of the angular factor: on z in [0, 50]
// a fit of lam(z) (1+z)^{(d-1)/2}, beyond that a fit in w = 1/z of
// G(w) = lam(1/w) w^{-(d-1)/2}; both are analytic on their ranges so the
// fits converge geometrically.
struct RadialGaussian::AngularTable {
    double e2 = 0.0; // (d-1)/2
    Cheb low;
    Cheb high;
};

std::shared_ptr<const RadialGaussian::AngularTable>
RadialGaussian::angular_table(int d) {
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const RadialGaussian::AngularTable>> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(d);
    if (it == cache.end()) {
        auto t = std::make_shared<RadialGaussian::AngularTable>();
        t->e2 = 0.5 * (d - 1);
        t->low = cheb_fit(0.0, 50.0, 96, [&](double z) {
            return RadialGaussian::angular_factor_quad(d, z) * std::pow(1.0 + z, t->e2);
        });
        t->high = cheb_fit(0.0, 0.02, 48, [&](double w) {
            const double ex = 0.5 * (d - 3.0);
            auto g = [&](double s) {
                const double q = std::max(0.0, 2.0 - s * s * w);
                return std::exp(-s * s) * std::pow(s, d - 2.0) * std::pow(q, ex);
            };
            return 2.0 * integrate_gk(g, 0.0, 9.0, 1e-13);
        });
        it = cache.emplace(d, std::move(t)).first;
    }
    return it->second;
}

RadialGaussian::RadialGaussian(int d, double m, double sigma)
    : d_(d), m_(m), sigma_(sigma), log_norm_(0.0) {
    if (d < 1) throw std::invalid_argument("RadialGaussian: d >= 1");
    if (sigma <= 0.0) throw std::invalid_argument("RadialGaussian: sigma > 0");
    if (m < 0.0) throw std::invalid_argument("RadialGaussian: m >= 0");
    if (d_ >= 2) {
        log_norm_ = std::log(sphere_area_dm2(d_)) -
                    0.5 * d_ * std::log(2.0 * M_PI * sigma_ * sigma_);
        if (d_ != 3) table_ = angular_table(d_);
    }
}

double RadialGaussian::angular_factor_quad(int d, double z) {
    if (d < 2) throw std::logic_error("angular_factor: d >= 2 only");
    if (z < 0.0) throw std::invalid_argument("angular_factor: z >= 0");
    const double dd = static_cast<double>(d);
    const double ex = 0.5 * (dd - 3.0);
    if (z < 50.0) {
        // lam(z) = 2 * integral_0^sqrt2 e^{-z t^2} t^{d-2} (2-t^2)^{(d-3)/2} dt;
        // tanh-sinh absorbs the endpoint singularity when d = 2.
        auto g = [&](double t) {
            const double w = std::max(0.0, 2.0 - t * t);
            return std::exp(-z * t * t) * std::pow(t, dd - 2.0) * std::pow(w, ex);
        };
        return 2.0 * integrate_tanh_sinh(g, 0.0, std::sqrt(2.0), 1e-12);
    }
    // Large z: substitute s = t sqrt(z); integrand dies by s ~ 9, safely
    // inside the (2 - s^2/z) > 0 region for every z >= 50.
    auto g = [&](double s) {
        const double w = std::max(0.0, 2.0 - s * s / z);
        return std::exp(-s * s) * std::pow(s, dd - 2.0) * std::pow(w, ex);
    };
    return 2.0 * std::pow(z, -0.5 * (dd - 1.0)) * integrate_gk(g, 0.0, 9.0, 1e-12);
}

double RadialGaussian::angular_factor(double z) const {
    if (d_ < 2) throw std::logic_error("angular_factor: d >= 2 only");
    if (z < 0.0) throw std::invalid_argument("angular_factor: z >= 0");
    const double dd = static_cast<double>(d_);
    if (z == 0.0) return std::sqrt(M_PI) * gamma_fn(0.5 * (dd - 1)) / gamma_fn(0.5 * dd);
    if (d_ == 3) return -std::expm1(-2.0 * z) / z;
    if (z >= 50.0) return cheb_eval(table_->high, 1.0 / z) * std::pow(z, -table_->e2);
    return cheb_eval(table_->low, z) / std::pow(1.0 + z, table_->e2);
}

double RadialGaussian::density(double r) const {
    if (r < 0.0) return 0.0;
    if (d_ == 1) {
        const double a = (r - m_) / sigma_, b = (r + m_) / sigma_;
        const double inv = 1.0 / (sigma_ * std::sqrt(2.0 * M_PI));
        return inv * (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b));
    }
    if (r == 0.0) return 0.0;
    const double dev = (r - m_) / sigma_;
    const double lg = (d_ - 1.0) * std::log(r) + log_norm_ - 0.5 * dev * dev;
    return std::exp(lg) * angular_factor(r * m_ / (sigma_ * sigma_));
}

double RadialGaussian::expectation(const std::function<double(double)>& f,
                                   const std::vector<double>& breakpoints,
                                   double rel_tol, double width) const {
    const double lo = std::max(0.0, m_ - width * sigma_);
    const double hi = m_ + width * sigma_;
    std::vector<double> pts{lo, hi};
    if (m_ > lo && m_ < hi) pts.push_back(m_); // split at the density peak
    for (double b : breakpoints)
        if (b > lo && b < hi) pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [&](double x, double y) {
                              return std::fabs(x - y) <= 1e-15 * (hi - lo);
                          }),
              pts.end());
    auto integrand = [&](double r) { return f(r) * density(r); };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        total += integrate_gk(integrand, pts[i], pts[i + 1], rel_tol);
    return total;
}

} // namespace wclb::math
