// Exact optimal transport between equal-size, equal-weight sample clouds.
// Costs: |x-y|^p with the outer 1/p root, or the weighted semimetrics (no
// root, first-order transport).  Equal weights turn the problem into an
// assignment solved exactly by shortest augmenting paths in O(n^3).
#pragma once

#include <optional>
#include <vector>

#include "wclb/kappa.hpp"
#include "wclb/sim.hpp"

namespace wclb {

struct CostSpec {
    enum class Kind { EuclideanP, Rho, RhoTilde };
    Kind kind = Kind::EuclideanP;
    double p = 2.0;  // outer exponent, euclidean only (p >= 1)
    std::optional<KappaFn> kappa;
    double temperature = 0.0;
    int particles = 0;  // rho-tilde states are stacked (particles x d) rows

    static CostSpec euclidean(double p);
    static CostSpec rho_cost(const KappaFn& kappa, double temperature);
    static CostSpec rho_tilde_cost(const KappaFn& kappa, double temperature,
                                   int particles);

    // Raw pairwise cost (before averaging and the outer root).
    double operator()(const Vec& x, const Vec& y) const;
    // Final transform: mean cost -> reported distance.
    double finish(double mean_cost) const;
};

// Minimal-total-cost assignment on a square matrix (rows -> cols); fills
// rowsol with the optimal column per row and returns the total.
double solve_assignment(const Mat& cost, std::vector<int>& rowsol);

// Exact W: min over permutations of the mean cost, then the outer root.
// Requires mu.n() == nu.n() <= max_n and finite costs.
double wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                   const CostSpec& cost, long max_n = 4096);

// Exhaustive oracle over all n! pairings; n <= 8.
double brute_force_wasserstein(const EmpiricalMeasure& mu,
                               const EmpiricalMeasure& nu, const CostSpec& cost);

// Mean cost across coupled replicas at one recorded step, under the outer
// root.  Any coupling dominates the infimum, so this upper-bounds the exact
// distance between the recorded marginals.
double coupling_upper_bound(const std::vector<CoupledTrajectory>& trajectories,
                            const CostSpec& cost, long step);

} // namespace wclb
