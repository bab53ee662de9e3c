#pragma once
// Counter-based random numbers.
//
// Generator: Philox-4x64 with 10 rounds, bit-compatible with the reference
// implementation shipped in numpy.random (key-at-a-time Weyl schedule).
// Being counter-based, every draw is addressed, not streamed: the normal
// increment used by a chain step is a pure function of
//   (seed, stream, replica, step, particle, coordinate)
// so simulations are reproducible under any scheduling of the work.
//
// Uniforms use the top 53 bits; normals are produced by inverting the
// standard normal CDF (Wichura's PPND16 rational approximation, accurate to
// ~1e-16 in the central region), so a given uniform always maps to the same
// normal -- no rejection loops, no per-thread state.

#include <array>
#include <cstdint>

namespace wclb {

struct Philox4x64 {
    // One 10-round block: 256-bit counter, 128-bit key -> 256 bits out.
    static std::array<std::uint64_t, 4> block(std::array<std::uint64_t, 4> ctr,
                                              std::array<std::uint64_t, 2> key);
};

// Map a 64-bit word to (0,1) from its top 53 bits: (x >> 11) * 2^-53, with
// the single all-zero word sent to 2^-54.  Never returns 0 or 1.
double u64_to_unit(std::uint64_t x);

// Inverse standard normal CDF; |relative error| < 2e-15 over (1e-300, 1-1e-16).
double inverse_normal_cdf(double p);

// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

// Distinct key streams for unrelated purposes within one run.  Keeping these
// centralised guarantees no accidental counter collisions between, say, the
// chain driving noise and the draws used to sample an initial law.
enum class Stream : std::uint64_t {
    ChainNoise = 0,
    InitialLaw = 1,
    Certification = 2,
    PairGrid = 3,
    Pilot = 4,
    Scratch = 5,
};

// Addressed Gaussian/uniform field over (replica, step, particle, coordinate).
class NoiseField {
public:
    NoiseField(std::uint64_t seed, Stream stream)
        : key_{seed, static_cast<std::uint64_t>(stream)} {}

    double uniform(std::uint64_t replica, std::uint64_t step,
                   std::uint64_t particle, std::uint64_t coord) const {
        return u64_to_unit(word(replica, step, particle, coord));
    }
    double normal(std::uint64_t replica, std::uint64_t step,
                  std::uint64_t particle, std::uint64_t coord) const {
        return inverse_normal_cdf(uniform(replica, step, particle, coord));
    }
    std::uint64_t word(std::uint64_t replica, std::uint64_t step,
                       std::uint64_t particle, std::uint64_t coord) const {
        return Philox4x64::block({replica, step, particle, coord}, key_)[0];
    }

private:
    std::array<std::uint64_t, 2> key_;
};

} // namespace wclb
