// Euler-chain simulation: single chains, synchronously coupled pairs,
// replica ensembles, and interacting particle systems, all driven by the
// counter-based noise field so results are bit-reproducible for a fixed seed
// regardless of scheduling.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "wclb/drift.hpp"
#include "wclb/kappa.hpp"

namespace wclb {

// Everything needed to run a chain X_{k+1} = X_k + delta b(X_k) + sqrt(2 T
// delta) Z_{k+1} (or its N-particle analogue with one independent Gaussian
// per particle per step).
struct ChainConfig {
    std::variant<DriftSpec, ParticleDriftSpec> drift;
    double delta = 0.01;
    double temperature = 1.0;
    long steps = 1;
    std::uint64_t seed = 0;
    int replicas = 1;

    void validate() const; // throws std::invalid_argument
    bool is_particle() const { return drift.index() == 1; }
    const DriftSpec& single() const;
    const ParticleDriftSpec& particle() const;
};

// Synchronously coupled pair; both chains consume identical noise at every
// step.  For particle systems the state vectors are the stacked rows of the
// N x d state (particle-major) and rho holds the summed per-particle
// semimetric.
struct CoupledTrajectory {
    std::vector<long> steps;  // recorded step indices
    std::vector<Vec> x, y;    // states at the recorded steps
    std::vector<double> rho;       // weighted semimetric at the recorded steps
    std::vector<double> distance;  // |X_k - Y_k|
    bool shared_noise = true;
    bool diverged = false;
    long divergence_step = -1; // first step whose state blew up
    int particles = 0;         // 0 for a single chain
};

// Equal-weight sample cloud standing in for the law at one step.
struct EmpiricalMeasure {
    Mat points; // n x d
    long step = 0;
    int diverged_excluded = 0; // replicas dropped at this step

    long n() const { return points.rows(); }
    int d() const { return static_cast<int>(points.cols()); }
};

// States with norm beyond this are flagged diverged (as is any non-finite
// state) and excluded from empirical measures.
inline constexpr double kDivergenceThreshold = 1e12;

// One Euler step; noise is a d-dim standard normal draw.
Vec step(const Vec& state, const DriftSpec& drift, double delta,
         double temperature, const Vec& noise);

// One particle-system step; row i of noise drives particle i.
Mat step_particles(const Mat& state, const ParticleDriftSpec& pspec, double delta,
                   double temperature, const Mat& noise);

// Runs the synchronous coupling from (x0, y0).  record_at lists the step
// indices to keep (empty = every step 0..steps); replica selects the noise
// substream.  The noise addressed at step k drives the k -> k+1 transition.
CoupledTrajectory simulate_coupled(const Vec& x0, const Vec& y0,
                                   const ChainConfig& config, const KappaFn& kappa,
                                   const std::vector<long>& record_at = {},
                                   int replica = 0);

// Particle analogue over R^{N d}; rho records the summed semimetric.
CoupledTrajectory simulate_particles_coupled(const Mat& X0, const Mat& Y0,
                                             const ChainConfig& config,
                                             const KappaFn& kappa,
                                             const std::vector<long>& record_at = {},
                                             int replica = 0);

// Deterministic initial sampler: replica index -> initial state.
using InitialSampler = std::function<Vec(int)>;

InitialSampler dirac_sampler(Vec point);
// Independent N(mean, sigma^2 I) draws keyed by (seed, replica).
InitialSampler gaussian_sampler(std::uint64_t seed, Vec mean, double sigma);

// Evolves `replicas` independent chains from the sampler and snapshots the
// empirical measure at each step in record_at (empty = final step only).
// Replica r draws from substream r; output bits do not depend on the thread
// count.  Replicas are excluded from a snapshot once diverged; a snapshot
// with no survivors throws std::runtime_error.
std::vector<EmpiricalMeasure> ensemble(const InitialSampler& sample_initial,
                                       const ChainConfig& config,
                                       const std::vector<long>& record_at = {});

} // namespace wclb
