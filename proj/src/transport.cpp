#include "wclb/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "wclb/parallel.hpp"

namespace wclb {

CostSpec CostSpec::euclidean(double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("cost: exponent p must be >= 1");
    CostSpec c;
    c.kind = Kind::EuclideanP;
    c.p = p;
    return c;
}

CostSpec CostSpec::rho_cost(const KappaFn& kappa, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("cost: T must be > 0");
    CostSpec c;
    c.kind = Kind::Rho;
    c.kappa = kappa;
    c.temperature = temperature;
    return c;
}

CostSpec CostSpec::rho_tilde_cost(const KappaFn& kappa, double temperature,
                                  int particles) {
    if (!(temperature > 0.0)) throw std::invalid_argument("cost: T must be > 0");
    if (particles < 1) throw std::invalid_argument("cost: particles must be >= 1");
    CostSpec c;
    c.kind = Kind::RhoTilde;
    c.kappa = kappa;
    c.temperature = temperature;
    c.particles = particles;
    return c;
}

namespace {

Mat unstack(const Vec& v, int particles) {
    if (v.size() % particles != 0)
        throw std::invalid_argument("cost: stacked state not divisible by particles");
    const long d = v.size() / particles;
    Mat m(particles, d);
    for (int i = 0; i < particles; ++i)
        for (long j = 0; j < d; ++j) m(i, j) = v[i * d + j];
    return m;
}

} // namespace

double CostSpec::operator()(const Vec& x, const Vec& y) const {
    if (x.size() != y.size()) throw std::invalid_argument("cost: dimension mismatch");
    switch (kind) {
    case Kind::EuclideanP:
        return std::pow((x - y).norm(), p);
    case Kind::Rho:
        return rho(*kappa, temperature, x, y);
    case Kind::RhoTilde:
        return rho_tilde(*kappa, temperature, unstack(x, particles),
                         unstack(y, particles));
    }
    return 0.0; // unreachable
}

double CostSpec::finish(double mean_cost) const {
    if (kind == Kind::EuclideanP) return std::pow(mean_cost, 1.0 / p);
    return mean_cost; // first-order transport under the semimetrics
}

// Shortest-augmenting-path assignment with dual potentials (the classical
// square-matrix formulation; rows and columns are 1-based internally).
double solve_assignment(const Mat& cost, std::vector<int>& rowsol) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n || n < 1)
        throw std::invalid_argument("assignment: square nonempty matrix required");

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), std::numeric_limits<double>::infinity());
        std::fill(used.begin(), used.end(), char(0));
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    rowsol.assign(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) rowsol[p[j] - 1] = j - 1;
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, rowsol[i]);
    return total;
}

namespace {

Mat build_cost_matrix(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                      const CostSpec& cost) {
    const long n = mu.n();
    Mat c(n, n);
    parallel_for(static_cast<size_t>(n), [&](size_t i) {
        const Vec x = mu.points.row(static_cast<long>(i)).transpose();
        for (long j = 0; j < n; ++j)
            c(static_cast<long>(i), j) = cost(x, nu.points.row(j).transpose());
    });
    if (!c.allFinite())
        throw std::invalid_argument("transport: non-finite pairwise cost");
    return c;
}

void check_clouds(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.n() != nu.n())
        throw std::invalid_argument("transport: clouds must have equal sample counts");
    if (mu.d() != nu.d())
        throw std::invalid_argument("transport: clouds must share a dimension");
    if (mu.n() < 1) throw std::invalid_argument("transport: empty cloud");
}

} // namespace

double wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                   const CostSpec& cost, long max_n) {
    check_clouds(mu, nu);
    if (mu.n() > max_n)
        throw std::invalid_argument("transport: sample count exceeds the solver cap");
    const Mat c = build_cost_matrix(mu, nu, cost);
    std::vector<int> rowsol;
    const double total = solve_assignment(c, rowsol);
    return cost.finish(total / static_cast<double>(mu.n()));
}

double brute_force_wasserstein(const EmpiricalMeasure& mu,
                               const EmpiricalMeasure& nu, const CostSpec& cost) {
    check_clouds(mu, nu);
    const long n = mu.n();
    if (n > 8)
        throw std::invalid_argument("brute force transport: n must be <= 8");
    const Mat c = build_cost_matrix(mu, nu, cost);
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (long i = 0; i < n; ++i) total += c(i, perm[static_cast<size_t>(i)]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return cost.finish(best / static_cast<double>(n));
}

double coupling_upper_bound(const std::vector<CoupledTrajectory>& trajectories,
                            const CostSpec& cost, long step) {
    if (trajectories.empty())
        throw std::invalid_argument("coupling bound: empty ensemble");
    double total = 0.0;
    for (const auto& traj : trajectories) {
        const auto it = std::lower_bound(traj.steps.begin(), traj.steps.end(), step);
        if (it == traj.steps.end() || *it != step)
            throw std::invalid_argument(
                "coupling bound: step not recorded in every trajectory");
        const size_t k = static_cast<size_t>(it - traj.steps.begin());
        total += cost(traj.x[k], traj.y[k]);
    }
    if (!std::isfinite(total))
        throw std::invalid_argument("coupling bound: non-finite cost");
    return cost.finish(total / static_cast<double>(trajectories.size()));
}

} // namespace wclb
