#include "wclb/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "wclb/parallel.hpp"
#include "wclb/rng.hpp"

namespace wclb {

namespace {

bool state_ok(const Vec& v) {
    return v.allFinite() && v.norm() <= kDivergenceThreshold;
}

bool state_ok(const Mat& m) {
    return m.allFinite() && m.norm() <= kDivergenceThreshold;
}

// Normalizes the record list: empty -> every step when dense_default, else
// just the final step; otherwise sorted unique indices within [0, steps].
std::vector<long> normalize_record_at(const std::vector<long>& record_at, long steps,
                                      bool dense_default) {
    std::vector<long> out;
    if (record_at.empty()) {
        if (dense_default) {
            out.resize(static_cast<size_t>(steps) + 1);
            for (long k = 0; k <= steps; ++k) out[static_cast<size_t>(k)] = k;
        } else {
            out.push_back(steps);
        }
        return out;
    }
    std::set<long> uniq(record_at.begin(), record_at.end());
    for (long k : uniq) {
        if (k < 0 || k > steps)
            throw std::invalid_argument("record_at index outside [0, steps]");
        out.push_back(k);
    }
    return out;
}

Vec flatten_rows(const Mat& m) {
    Vec out(m.rows() * m.cols());
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
    return out;
}

} // namespace

void ChainConfig::validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("chain config: delta must be > 0");
    if (!(temperature > 0.0))
        throw std::invalid_argument("chain config: T must be > 0");
    if (steps < 0) throw std::invalid_argument("chain config: steps must be >= 0");
    if (replicas < 1) throw std::invalid_argument("chain config: replicas must be >= 1");
}

const DriftSpec& ChainConfig::single() const {
    if (is_particle())
        throw std::invalid_argument("chain config holds a particle drift");
    return std::get<DriftSpec>(drift);
}

const ParticleDriftSpec& ChainConfig::particle() const {
    if (!is_particle())
        throw std::invalid_argument("chain config holds a single-chain drift");
    return std::get<ParticleDriftSpec>(drift);
}

Vec step(const Vec& state, const DriftSpec& drift, double delta, double temperature,
         const Vec& noise) {
    if (state.size() != drift.dim() || noise.size() != state.size())
        throw std::invalid_argument("step: dimension mismatch");
    return state + delta * drift(state) +
           std::sqrt(2.0 * temperature * delta) * noise;
}

Mat step_particles(const Mat& state, const ParticleDriftSpec& pspec, double delta,
                   double temperature, const Mat& noise) {
    if (noise.rows() != state.rows() || noise.cols() != state.cols())
        throw std::invalid_argument("step: noise shape mismatch");
    const double sigma = std::sqrt(2.0 * temperature * delta);
    Mat next(state.rows(), state.cols());
    for (int i = 0; i < state.rows(); ++i)
        next.row(i) = state.row(i) +
                      delta * pspec.drift_of(i, state).transpose() +
                      sigma * noise.row(i);
    return next;
}

CoupledTrajectory simulate_coupled(const Vec& x0, const Vec& y0,
                                   const ChainConfig& config, const KappaFn& kappa,
                                   const std::vector<long>& record_at, int replica) {
    config.validate();
    const DriftSpec& drift = config.single();
    const int d = drift.dim();
    if (x0.size() != d || y0.size() != d || kappa.dim() != d)
        throw std::invalid_argument("simulate_coupled: dimension mismatch");

    const auto record = normalize_record_at(record_at, config.steps, true);
    const NoiseField noise(config.seed, Stream::ChainNoise);

    CoupledTrajectory traj;
    traj.particles = 0;
    Vec x = x0, y = y0;
    size_t next_record = 0;
    for (long k = 0; k <= config.steps; ++k) {
        if (!state_ok(x) || !state_ok(y)) {
            traj.diverged = true;
            traj.divergence_step = k;
            break;
        }
        if (next_record < record.size() && record[next_record] == k) {
            traj.steps.push_back(k);
            traj.x.push_back(x);
            traj.y.push_back(y);
            traj.rho.push_back(rho(kappa, config.temperature, x, y));
            traj.distance.push_back((x - y).norm());
            ++next_record;
        }
        if (k == config.steps) break;
        Vec z(d);
        for (int j = 0; j < d; ++j)
            z[j] = noise.normal(static_cast<std::uint64_t>(replica),
                                static_cast<std::uint64_t>(k), 0,
                                static_cast<std::uint64_t>(j));
        x = step(x, drift, config.delta, config.temperature, z);
        y = step(y, drift, config.delta, config.temperature, z);
    }
    return traj;
}

CoupledTrajectory simulate_particles_coupled(const Mat& X0, const Mat& Y0,
                                             const ChainConfig& config,
                                             const KappaFn& kappa,
                                             const std::vector<long>& record_at,
                                             int replica) {
    config.validate();
    const ParticleDriftSpec& pspec = config.particle();
    const int N = pspec.particles, d = pspec.dim;
    if (X0.rows() != N || X0.cols() != d || Y0.rows() != N || Y0.cols() != d)
        throw std::invalid_argument("simulate_particles_coupled: state shape mismatch");
    if (kappa.dim() != d)
        throw std::invalid_argument("simulate_particles_coupled: weight dimension");

    const auto record = normalize_record_at(record_at, config.steps, true);
    const NoiseField noise(config.seed, Stream::ChainNoise);

    CoupledTrajectory traj;
    traj.particles = N;
    Mat X = X0, Y = Y0;
    size_t next_record = 0;
    for (long k = 0; k <= config.steps; ++k) {
        if (!state_ok(X) || !state_ok(Y)) {
            traj.diverged = true;
            traj.divergence_step = k;
            break;
        }
        if (next_record < record.size() && record[next_record] == k) {
            traj.steps.push_back(k);
            traj.x.push_back(flatten_rows(X));
            traj.y.push_back(flatten_rows(Y));
            traj.rho.push_back(rho_tilde(kappa, config.temperature, X, Y));
            traj.distance.push_back((X - Y).norm());
            ++next_record;
        }
        if (k == config.steps) break;
        Mat Z(N, d);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j)
                Z(i, j) = noise.normal(static_cast<std::uint64_t>(replica),
                                       static_cast<std::uint64_t>(k),
                                       static_cast<std::uint64_t>(i),
                                       static_cast<std::uint64_t>(j));
        X = step_particles(X, pspec, config.delta, config.temperature, Z);
        Y = step_particles(Y, pspec, config.delta, config.temperature, Z);
    }
    return traj;
}

InitialSampler dirac_sampler(Vec point) {
    return [point = std::move(point)](int) { return point; };
}

InitialSampler gaussian_sampler(std::uint64_t seed, Vec mean, double sigma) {
    if (!(sigma >= 0.0))
        throw std::invalid_argument("gaussian_sampler: sigma must be >= 0");
    return [noise = NoiseField(seed, Stream::InitialLaw), mean = std::move(mean),
            sigma](int replica) {
        Vec v(mean.size());
        for (long j = 0; j < mean.size(); ++j)
            v[j] = mean[j] + sigma * noise.normal(static_cast<std::uint64_t>(replica),
                                                  0, 0,
                                                  static_cast<std::uint64_t>(j));
        return v;
    };
}

std::vector<EmpiricalMeasure> ensemble(const InitialSampler& sample_initial,
                                       const ChainConfig& config,
                                       const std::vector<long>& record_at) {
    config.validate();
    const DriftSpec& drift = config.single();
    const int d = drift.dim();
    const int R = config.replicas;
    const auto record = normalize_record_at(record_at, config.steps, false);
    const NoiseField noise(config.seed, Stream::ChainNoise);

    // One buffer row per replica per snapshot; rows are single-writer so the
    // parallel loop below is race-free and thread-count independent.
    std::vector<Mat> buffers(record.size(), Mat(R, d));
    std::vector<std::vector<std::uint8_t>> alive_at(
        record.size(), std::vector<std::uint8_t>(static_cast<size_t>(R), 0));

    parallel_for(static_cast<size_t>(R), [&](size_t ri) {
        const int r = static_cast<int>(ri);
        Vec state = sample_initial(r);
        if (state.size() != d)
            throw std::invalid_argument("ensemble: sampler dimension mismatch");
        bool alive = state_ok(state);
        size_t next_record = 0;
        for (long k = 0; k <= config.steps; ++k) {
            if (next_record < record.size() && record[next_record] == k) {
                if (alive) {
                    buffers[next_record].row(ri) = state;
                    alive_at[next_record][ri] = 1;
                }
                ++next_record;
            }
            if (k == config.steps || !alive) break;
            Vec z(d);
            for (int j = 0; j < d; ++j)
                z[j] = noise.normal(ri, static_cast<std::uint64_t>(k), 0,
                                    static_cast<std::uint64_t>(j));
            state = step(state, drift, config.delta, config.temperature, z);
            alive = state_ok(state);
        }
    });

    std::vector<EmpiricalMeasure> out;
    out.reserve(record.size());
    for (size_t s = 0; s < record.size(); ++s) {
        long n = 0;
        for (int r = 0; r < R; ++r) n += alive_at[s][static_cast<size_t>(r)];
        if (n == 0)
            throw std::runtime_error("ensemble: every replica diverged by step " +
                                     std::to_string(record[s]));
        EmpiricalMeasure m;
        m.step = record[s];
        m.diverged_excluded = static_cast<int>(R - n);
        m.points.resize(n, d);
        long row = 0;
        for (int r = 0; r < R; ++r)
            if (alive_at[s][static_cast<size_t>(r)])
                m.points.row(row++) = buffers[s].row(r);
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace wclb
