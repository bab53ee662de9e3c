// Chain simulation: stepping, synchronous couplings, ensembles, particle
// systems, divergence handling, and the CSV/binary dumps.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wclb/constants.hpp"
#include "wclb/io.hpp"
#include "wclb/parallel.hpp"
#include "wclb/rng.hpp"
#include "wclb/sim.hpp"

using namespace wclb;

namespace {

AssumptionCertificate example_cert(int d) {
    AssumptionCertificate cert;
    cert.lipschitz = 1.0;
    cert.radius = 1.0;
    cert.contraction = 1.0;
    cert.expansion = 1.0;
    cert.dim = d;
    cert.method = "analytic";
    return cert;
}

DriftSpec example_drift(int d) {
    DriftSpec drift = DriftSpec::linear(d, 1.0);
    drift.certificate = example_cert(d);
    return drift;
}

struct Welford {
    long n = 0;
    double mean = 0, m2 = 0;
    void add(double v) {
        ++n;
        const double d1 = v - mean;
        mean += d1 / static_cast<double>(n);
        m2 += d1 * (v - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double se() const { return std::sqrt(variance() / static_cast<double>(n)); }
};

} // namespace

TEST_CASE("single euler step") {
    const DriftSpec lin = DriftSpec::linear(1, 1.0);
    Vec x(1), z(1);
    x << 1.0;
    z << 0.0;
    CHECK(step(x, lin, 0.1, 7.0, z)[0] == doctest::Approx(0.9).epsilon(1e-15));

    // A drift fixed point with zero noise is a chain fixed point.
    const DriftSpec shifted =
        DriftSpec::custom(1, [](const Vec& v) { return Vec((2.0 - v.array()).matrix()); });
    Vec fp(1);
    fp << 2.0;
    CHECK(step(fp, shifted, 0.3, 1.0, z)[0] == 2.0);

    // Noise enters with coefficient sqrt(2 T delta).
    z << 1.5;
    const double got = step(x, lin, 0.1, 2.0, z)[0];
    CHECK(got == doctest::Approx(0.9 + std::sqrt(0.4) * 1.5).epsilon(1e-15));

    Vec bad(2);
    bad << 1.0, 2.0;
    CHECK_THROWS_AS(step(bad, lin, 0.1, 1.0, z), std::invalid_argument);
    CHECK_THROWS_AS(step(x, lin, 0.1, 1.0, bad), std::invalid_argument);
}

TEST_CASE("particle step with zero interaction is a row-wise euler step") {
    const DriftSpec conf = example_drift(2);
    ParticleDriftSpec pspec(conf);
    pspec.particles = 3;
    pspec.dim = 2;

    Mat X(3, 2), Z(3, 2);
    X << 1.0, -0.5, 2.0, 0.25, -3.0, 4.0;
    Z << 0.3, -0.7, 1.1, 0.0, -0.2, 0.9;
    const Mat next = step_particles(X, pspec, 0.05, 1.5, Z);
    for (int i = 0; i < 3; ++i) {
        const Vec row = step(X.row(i).transpose(), conf, 0.05, 1.5,
                             Z.row(i).transpose());
        CHECK(next(i, 0) == row[0]);
        CHECK(next(i, 1) == row[1]);
    }

    Mat badZ(2, 2);
    CHECK_THROWS_AS(step_particles(X, pspec, 0.05, 1.5, badZ),
                    std::invalid_argument);
}

TEST_CASE("particle step exchangeability") {
    // Exchangeable interaction: pull toward the ensemble mean.
    const DriftSpec conf = example_drift(1);
    ParticleDriftSpec pspec(conf);
    pspec.particles = 3;
    pspec.dim = 1;
    pspec.interaction = [](int i, const Mat& state) {
        Vec g(1);
        g[0] = 0.1 * (state.col(0).mean() - state(i, 0));
        return g;
    };

    Mat X(3, 1), Z(3, 1);
    X << 0.4, -1.2, 2.5;
    Z << 0.9, -0.3, 0.1;
    const Mat next = step_particles(X, pspec, 0.1, 1.0, Z);

    // Reverse the particles and their noise rows together.
    Mat Xp = X.colwise().reverse().eval();
    Mat Zp = Z.colwise().reverse().eval();
    const Mat nextp = step_particles(Xp, pspec, 0.1, 1.0, Zp);
    for (int i = 0; i < 3; ++i)
        CHECK(nextp(i, 0) == doctest::Approx(next(2 - i, 0)).epsilon(1e-14));
}

TEST_CASE("coupled linear chains: the difference is noise-free") {
    const DriftSpec drift = example_drift(2);
    const KappaFn kappa = KappaFn::build(*drift.certificate);
    ChainConfig cfg{drift, 0.1, 1.0, 60, 42, 1};

    Vec x0(2), y0(2);
    x0 << 1.0, 2.0;
    y0 << -1.0, 0.0;
    const auto traj = simulate_coupled(x0, y0, cfg, kappa);
    REQUIRE(traj.steps.size() == 61);
    CHECK(traj.shared_noise);
    CHECK_FALSE(traj.diverged);
    CHECK(traj.particles == 0);

    const double d0 = (x0 - y0).norm();
    for (size_t k = 0; k < traj.steps.size(); ++k) {
        const double expect = std::pow(0.9, static_cast<double>(k)) * d0;
        CHECK(traj.distance[k] == doctest::Approx(expect).epsilon(1e-10));
        // The recorded semimetric matches its definition at the states.
        if (k % 20 == 0)
            CHECK(traj.rho[k] ==
                  doctest::Approx(rho(kappa, cfg.temperature, traj.x[k], traj.y[k]))
                      .epsilon(1e-14));
    }

    // Same start -> bitwise identical marginals and zero semimetric.
    const auto same = simulate_coupled(x0, x0, cfg, kappa);
    for (size_t k = 0; k < same.steps.size(); ++k) {
        CHECK((same.x[k] - same.y[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(same.rho[k] == 0.0);
    }

    // Thinning keeps exactly the requested steps.
    const auto thin = simulate_coupled(x0, y0, cfg, kappa, {0, 7, 33});
    REQUIRE(thin.steps == std::vector<long>{0, 7, 33});
    CHECK((thin.x[1] - traj.x[7]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(thin.distance[2] == traj.distance[33]);
    CHECK_THROWS_AS(simulate_coupled(x0, y0, cfg, kappa, {999}),
                    std::invalid_argument);
}

TEST_CASE("coupled run is bit-reproducible and replica streams differ") {
    const DriftSpec drift = example_drift(1);
    const KappaFn kappa = KappaFn::build(*drift.certificate);
    ChainConfig cfg{drift, 0.05, 2.0, 30, 1234, 1};
    Vec x0(1), y0(1);
    x0 << 0.5;
    y0 << -0.25;

    const auto a = simulate_coupled(x0, y0, cfg, kappa);
    const auto b = simulate_coupled(x0, y0, cfg, kappa);
    for (size_t k = 0; k < a.steps.size(); ++k) {
        CHECK((a.x[k] - b.x[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.y[k] - b.y[k]).cwiseAbs().maxCoeff() == 0.0);
    }
    const auto other = simulate_coupled(x0, y0, cfg, kappa, {}, 1);
    CHECK((other.x.back() - a.x.back()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("coupled perturbed-linear pair decays inside the certified envelope") {
    DriftSpec drift = DriftSpec::perturbed_linear(1, 1.0, 0.2, 1.0);
    drift.certificate = certify(drift, "numeric");
    REQUIRE(drift.certificate->contraction > 0.0);
    const KappaFn kappa = KappaFn::build(*drift.certificate);
    const double h = rate_h(drift.certificate->contraction, kappa.a());

    const long steps = 100;
    ChainConfig cfg{drift, 0.05, 1.0, steps, 2718, 1};
    Vec x0(1), y0(1);
    x0 << 2.0;
    y0 << -1.0;

    Welford ratio;
    for (int r = 0; r < 1000; ++r) {
        const auto traj = simulate_coupled(x0, y0, cfg, kappa, {0, steps}, r);
        REQUIRE_FALSE(traj.diverged);
        ratio.add(traj.distance.back() / traj.distance.front());
    }
    const double envelope = std::pow(1.0 - h * cfg.delta, static_cast<double>(steps));
    CHECK(ratio.mean + 3.0 * ratio.se() <= envelope);
    CHECK(ratio.mean > 0.0);
}

TEST_CASE("divergence is flagged and truncates the record") {
    DriftSpec exploding = DriftSpec::custom(1, [](const Vec& v) {
        return Vec((1000.0 * v.array()).matrix());
    });
    const KappaFn kappa = KappaFn::build(example_cert(1));
    ChainConfig cfg{exploding, 1.0, 1.0, 10, 7, 1};
    Vec x0(1), y0(1);
    x0 << 1e9;
    y0 << 1e9 + 1.0;

    const auto traj = simulate_coupled(x0, y0, cfg, kappa);
    CHECK(traj.diverged);
    CHECK(traj.divergence_step == 1);
    CHECK(traj.steps == std::vector<long>{0});
}

TEST_CASE("ensemble moments match the gaussian recursion") {
    const DriftSpec drift = example_drift(2);
    const long k = 20;
    const int replicas = 20000;
    ChainConfig cfg{drift, 0.1, 0.5, k, 99, replicas};

    Vec x0(2);
    x0 << 3.0, -2.0;
    const auto measures = ensemble(dirac_sampler(x0), cfg, {k});
    REQUIRE(measures.size() == 1);
    const auto& m = measures.front();
    CHECK(m.step == k);
    CHECK(m.n() == replicas);
    CHECK(m.diverged_excluded == 0);

    // Closed form: mean (1-c delta)^k x0, variance 2 delta T sum_{j<k}
    // (1-c delta)^{2j} per coordinate.
    const double decay = std::pow(0.9, static_cast<double>(k));
    double var = 0.0;
    for (long j = 0; j < k; ++j) var += std::pow(0.81, static_cast<double>(j));
    var *= 2.0 * cfg.delta * cfg.temperature;

    const double tol = 4.0 / std::sqrt(static_cast<double>(replicas));
    for (int c = 0; c < 2; ++c) {
        Welford w;
        for (long r = 0; r < m.n(); ++r) w.add(m.points(r, c));
        CHECK(std::fabs(w.mean - decay * x0[c]) <= tol * std::fabs(decay * x0[c]));
        CHECK(std::fabs(w.variance() - var) <= tol * var);
    }
}

TEST_CASE("ensemble edge cases") {
    const DriftSpec drift = example_drift(1);
    Vec x0(1);
    x0 << 0.75;

    // steps = 0 returns the raw initial samples.
    ChainConfig none{drift, 0.1, 1.0, 0, 5, 6};
    const auto sampler = gaussian_sampler(5, x0, 2.0);
    const auto init = ensemble(sampler, none, {0});
    REQUIRE(init.size() == 1);
    CHECK(init.front().n() == 6);
    for (int r = 0; r < 6; ++r)
        CHECK(init.front().points(r, 0) == sampler(r)[0]);

    // replicas = 1 gives a singleton cloud.
    ChainConfig solo{drift, 0.1, 1.0, 3, 5, 1};
    const auto one = ensemble(dirac_sampler(x0), solo);
    REQUIRE(one.size() == 1);
    CHECK(one.front().n() == 1);
    CHECK(one.front().step == 3);

    ChainConfig bad = solo;
    bad.delta = 0.0;
    CHECK_THROWS_AS(ensemble(dirac_sampler(x0), bad), std::invalid_argument);
}

TEST_CASE("ensemble excludes diverged replicas per snapshot") {
    DriftSpec exploding = DriftSpec::custom(1, [](const Vec& v) {
        return Vec((1000.0 * v.array()).matrix());
    });
    ChainConfig cfg{exploding, 1.0, 1e-6, 2, 3, 8};
    const InitialSampler split = [](int r) {
        Vec v(1);
        v << (r < 3 ? 1e9 : 1e-3);
        return v;
    };
    const auto ms = ensemble(split, cfg, {0, 2});
    REQUIRE(ms.size() == 2);
    CHECK(ms[0].n() == 8); // everyone starts finite
    CHECK(ms[0].diverged_excluded == 0);
    CHECK(ms[1].n() == 5); // the three hot starts blow past the threshold
    CHECK(ms[1].diverged_excluded == 3);

    const InitialSampler all_hot = [](int) {
        Vec v(1);
        v << 1e9;
        return v;
    };
    CHECK_THROWS_AS(ensemble(all_hot, cfg, {2}), std::runtime_error);
}

TEST_CASE("ensemble bits do not depend on the thread count") {
    const DriftSpec drift = example_drift(2);
    ChainConfig cfg{drift, 0.1, 1.0, 5, 31337, 64};
    Vec x0(2);
    x0 << 1.0, -1.0;
    const auto sampler = gaussian_sampler(31337, x0, 0.5);

    const unsigned before = max_threads();
    set_max_threads(1);
    const auto serial = ensemble(sampler, cfg, {5});
    set_max_threads(8);
    const auto parallel = ensemble(sampler, cfg, {5});
    set_max_threads(before);

    REQUIRE(serial.front().n() == parallel.front().n());
    CHECK((serial.front().points - parallel.front().points).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("particle coupling basics") {
    const DriftSpec conf = example_drift(2);
    const KappaFn kappa = KappaFn::build(*conf.certificate);
    ParticleDriftSpec pspec(conf);
    pspec.particles = 1;
    pspec.dim = 2;

    // One non-interacting particle reproduces the single-chain coupling.
    ChainConfig pcfg{pspec, 0.1, 1.0, 25, 64, 1};
    ChainConfig scfg{conf, 0.1, 1.0, 25, 64, 1};
    Mat X0(1, 2), Y0(1, 2);
    X0 << 1.0, 2.0;
    Y0 << -1.0, 0.0;
    const auto ptraj = simulate_particles_coupled(X0, Y0, pcfg, kappa);
    const auto straj = simulate_coupled(X0.row(0).transpose(),
                                        Y0.row(0).transpose(), scfg, kappa);
    REQUIRE(ptraj.steps.size() == straj.steps.size());
    CHECK(ptraj.particles == 1);
    for (size_t k = 0; k < ptraj.steps.size(); ++k) {
        CHECK((ptraj.x[k] - straj.x[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(ptraj.rho[k] == straj.rho[k]);
    }

    // Equal starts keep the summed semimetric at exactly zero.
    pspec.particles = 3;
    ParticleDriftSpec trio = pspec;
    ChainConfig tcfg{trio, 0.1, 1.0, 10, 64, 1};
    Mat Z0(3, 2);
    Z0 << 0.0, 0.5, -1.0, 2.0, 3.0, -0.25;
    const auto same = simulate_particles_coupled(Z0, Z0, tcfg, kappa);
    for (double r : same.rho) CHECK(r == 0.0);

    Mat badY(2, 2);
    CHECK_THROWS_AS(simulate_particles_coupled(Z0, badY, tcfg, kappa),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_particles_coupled(Z0, Z0, scfg, kappa),
                    std::invalid_argument); // config holds a single-chain drift
}

TEST_CASE("mean-field pair semimetric beats the predicted net envelope") {
    const DriftSpec conf = example_drift(1);
    const KappaFn kappa = KappaFn::build(*conf.certificate);
    PayoffSpec payoff;
    payoff.fn = [](const Vec& u, const Vec& v) {
        Vec out(u.size());
        for (int i = 0; i < u.size(); ++i) out[i] = 0.01 * std::sin(u[i] - v[i]);
        return out;
    };
    payoff.sup_norm = 0.01;
    payoff.lipschitz = 0.01;
    const ParticleDriftSpec pspec = build_mean_field_game(payoff, 2, conf);

    const double delta = 0.05, T = 20000.0;
    const auto consts = particle_constants(pspec, kappa, delta, T);
    REQUIRE(consts.particle.has_value());
    const double net = consts.particle->net_rate_ratio;
    REQUIRE(net > 0.0); // contraction is actually predicted at these parameters

    const long steps = 40;
    ChainConfig cfg{pspec, delta, T, steps, 515, 1};
    Mat X0(4, 1), Y0(4, 1);
    X0 << 2.0, 1.5, -1.0, -0.5;
    Y0 << 3.0, 2.5, 0.0, 0.5;

    Welford ratio;
    for (int r = 0; r < 1000; ++r) {
        const auto traj = simulate_particles_coupled(X0, Y0, cfg, kappa, {0, steps}, r);
        REQUIRE_FALSE(traj.diverged);
        ratio.add(traj.rho.back() / traj.rho.front());
    }
    const double envelope = std::pow(1.0 - net * delta, static_cast<double>(steps));
    CHECK(ratio.mean + 3.0 * ratio.se() <= envelope);
    CHECK(ratio.mean > 0.0);
}

TEST_CASE("csv dumps") {
    const DriftSpec drift = example_drift(2);
    const KappaFn kappa = KappaFn::build(*drift.certificate);
    ChainConfig cfg{drift, 0.1, 1.0, 3, 11, 1};
    Vec x0(2), y0(2);
    x0 << 1.0, 2.0;
    y0 << 0.0, -1.0;
    const auto traj = simulate_coupled(x0, y0, cfg, kappa);

    std::ostringstream os;
    write_trajectory_csv(os, traj);
    const std::string text = os.str();
    CHECK(text.rfind("step,x0,x1,y0,y1,distance,rho\n", 0) == 0);
    long lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 5); // header + 4 recorded steps

    const auto ms = ensemble(dirac_sampler(x0), cfg, {0, 3});
    std::ostringstream ms_os;
    write_measures_csv(ms_os, ms);
    const std::string ms_text = ms_os.str();
    CHECK(ms_text.rfind("step,row,c0,c1\n", 0) == 0);
    CHECK(std::count(ms_text.begin(), ms_text.end(), '\n') == 3);
}

TEST_CASE("binary frame round trip") {
    Mat points(4, 3);
    points << 1.0, -0.0, 1e-300, 3.141592653589793, -2.5e17, 0.1, 7.0, -8.125,
        9.0, 1e12, -1e-12, 0.0;

    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    write_wclb_frame(buf, points);
    const Mat back = read_wclb_frame(buf);
    REQUIRE(back.rows() == 4);
    REQUIRE(back.cols() == 3);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) CHECK(back(r, c) == points(r, c));

    // Corrupted magic.
    std::stringstream bad(std::ios::in | std::ios::out | std::ios::binary);
    write_wclb_frame(bad, points);
    std::string raw = bad.str();
    raw[0] = 'X';
    std::istringstream badin(raw, std::ios::binary);
    CHECK_THROWS_AS(read_wclb_frame(badin), std::runtime_error);

    // Unsupported version.
    raw = bad.str();
    raw[4] = 9;
    std::istringstream verin(raw, std::ios::binary);
    CHECK_THROWS_AS(read_wclb_frame(verin), std::runtime_error);

    // Truncated payload.
    raw = bad.str();
    raw.resize(raw.size() - 5);
    std::istringstream truncin(raw, std::ios::binary);
    CHECK_THROWS_AS(read_wclb_frame(truncin), std::runtime_error);
}

TEST_CASE("csv matrix round trip") {
    Mat points(3, 2);
    points << 1.0, -0.5, 1e-300, 3.141592653589793, -2.5e17, 0.125;

    std::ostringstream os;
    write_matrix_csv(os, points, {"c0", "c1"});
    std::istringstream is(os.str());
    const Mat back = read_matrix_csv(is);
    REQUIRE(back.rows() == 3);
    REQUIRE(back.cols() == 2);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) CHECK(back(r, c) == points(r, c));

    SUBCASE("headerless input is accepted") {
        std::istringstream plain("1.5,2\n-3,4e2\n");
        const Mat m = read_matrix_csv(plain);
        REQUIRE(m.rows() == 2);
        CHECK(m(1, 1) == 400.0);
    }
    SUBCASE("ragged and non-numeric rows are rejected") {
        std::istringstream ragged("a,b\n1,2\n3\n");
        CHECK_THROWS_AS((void)read_matrix_csv(ragged), std::runtime_error);
        std::istringstream words("a,b\n1,oops\n");
        CHECK_THROWS_AS((void)read_matrix_csv(words), std::runtime_error);
        std::istringstream empty("h1,h2\n");
        CHECK_THROWS_AS((void)read_matrix_csv(empty), std::runtime_error);
    }
}
