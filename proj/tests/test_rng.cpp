#include <doctest.h>

#include <cmath>
#include <vector>

#include "wclb/rng.hpp"

using wclb::NoiseField;
using wclb::Philox4x64;
using wclb::Stream;

// Known-answer vectors generated with numpy.random.Philox (10 rounds, 4x64).
// numpy increments counter word 0 before emitting a block, so its first two
// output blocks sit at counters (1,0,0,0) and (2,0,0,0).
TEST_CASE("philox known answers") {
    {
        auto out = Philox4x64::block({1, 0, 0, 0}, {0, 0});
        CHECK(out[0] == 0x02f4ba6408e4d89bull);
        CHECK(out[1] == 0x3dd62b0b9ca8c5b2ull);
        CHECK(out[2] == 0x1c8667a55d902e79ull);
        CHECK(out[3] == 0x907d7a052fd5b4dcull);
    }
    {
        auto out = Philox4x64::block({2, 0, 0, 0}, {0, 0});
        CHECK(out[0] == 0x809bf322883987c3ull);
        CHECK(out[1] == 0x471128b9e807f7ddull);
        CHECK(out[2] == 0xf250ba0dbec065b7ull);
        CHECK(out[3] == 0xfc6ed66767a457bcull);
    }
    {
        auto out = Philox4x64::block({1, 0, 0, 0},
                                     {0x9e3779b97f4a7c15ull, 0xbb67ae8584caa73bull});
        CHECK(out[0] == 0xfa033c62a6049001ull);
        CHECK(out[1] == 0x003beb58330ab297ull);
        CHECK(out[2] == 0xd45d9d1ed2e72102ull);
        CHECK(out[3] == 0xba38a9f383a1e7e2ull);
    }
    {
        auto out = Philox4x64::block(
            {0xdeadbef0ull, 0xfaceb00cull, 0x12345678ull, 0x90abcdefull},
            {0x0102030405060708ull, 0x0ull});
        CHECK(out[0] == 0x02f8dfc5069b9d11ull);
        CHECK(out[1] == 0xd5c664adda2854e1ull);
        CHECK(out[2] == 0x700d1258c8e5e80full);
        CHECK(out[3] == 0xd8b419a224acb13full);
    }
}

TEST_CASE("uniform mapping stays inside the open unit interval") {
    CHECK(wclb::u64_to_unit(0) == doctest::Approx(0x1.0p-54).epsilon(1e-15));
    CHECK(wclb::u64_to_unit(~0ull) < 1.0);
    CHECK(wclb::u64_to_unit(~0ull) > 0.9999999999999997);
    CHECK(wclb::u64_to_unit(1ull << 11) > wclb::u64_to_unit(0));
}

// Reference values from scipy.special.ndtri.
TEST_CASE("inverse normal cdf matches reference table") {
    const std::vector<std::pair<double, double>> table = {
        {1e-300, -37.047096299361201},
        {1e-16, -8.2220822161304348},
        {1e-10, -6.3613409024040557},
        {0.0002, -3.5400837992061445},
        {0.1, -1.2815515655446004},
        {0.2500001, -0.67448943550960716},
        {0.75, 0.67448975019608171},
        {0.975, 1.959963984540054},
        {1.0 - 1e-10, 6.3613408896974217},
    };
    for (auto [p, x] : table)
        CHECK(wclb::inverse_normal_cdf(p) == doctest::Approx(x).epsilon(2e-15));
    CHECK(wclb::inverse_normal_cdf(0.5) == 0.0);
}

// Reference values from scipy.stats.norm.cdf.
TEST_CASE("normal cdf matches reference table") {
    CHECK(wclb::normal_cdf(-8.0) == doctest::Approx(6.2209605742717841235e-16).epsilon(1e-13));
    CHECK(wclb::normal_cdf(-1.0) == doctest::Approx(0.15865525393145705141).epsilon(1e-14));
    CHECK(wclb::normal_cdf(0.5) == doctest::Approx(0.69146246127401310364).epsilon(1e-14));
    CHECK(wclb::normal_cdf(2.0) == doctest::Approx(0.9772498680518207928).epsilon(1e-14));
    CHECK(wclb::normal_cdf(6.5) == doctest::Approx(0.99999999995983999416).epsilon(1e-14));
    CHECK(wclb::normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("round trip cdf of inverse cdf") {
    for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9}) {
        const double x = wclb::inverse_normal_cdf(p);
        CHECK(wclb::normal_cdf(x) == doctest::Approx(p).epsilon(1e-11));
    }
}

TEST_CASE("noise field is addressed, deterministic, and stream separated") {
    NoiseField f(1234, Stream::ChainNoise);
    NoiseField g(1234, Stream::ChainNoise);
    NoiseField other_stream(1234, Stream::InitialLaw);
    NoiseField other_seed(1235, Stream::ChainNoise);

    CHECK(f.normal(3, 17, 2, 1) == g.normal(3, 17, 2, 1));
    CHECK(f.normal(3, 17, 2, 1) != f.normal(3, 17, 2, 0));
    CHECK(f.normal(3, 17, 2, 1) != f.normal(3, 18, 2, 1));
    CHECK(f.normal(3, 17, 2, 1) != f.normal(4, 17, 2, 1));
    CHECK(f.normal(3, 17, 2, 1) != other_stream.normal(3, 17, 2, 1));
    CHECK(f.normal(3, 17, 2, 1) != other_seed.normal(3, 17, 2, 1));
}

TEST_CASE("normal field moments") {
    NoiseField f(42, Stream::Scratch);
    const std::size_t n = 1 << 16;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = f.normal(i, 0, 0, 0);
        s1 += z;
        s2 += z * z;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);  // ~5 standard errors
    CHECK(std::fabs(var - 1.0) < 0.03);
}
