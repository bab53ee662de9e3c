#pragma once
// Drift fields for single chains and particle systems, plus certification of
// the two structural assumptions the contraction machinery needs:
//   (A1) |b(x) - b(y)| <= L_b |x - y|
//   (A2) <x-y, b(x)-b(y)> <= K|x-y|^2 everywhere, and <= -c|x-y|^2 whenever
//        |x| >= R or |y| >= R.
// Certificates are either closed-form (linear drift) or sampled numerically
// with a safety factor; numeric certificates are explicitly non-rigorous and
// carry method = "numeric".

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace wclb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Smooth bump: 1 on [0, 1/2], exp(1 - 1/(1 - (2r-1)^2)) on (1/2, 1), 0 beyond.
double bump(double r);
// One-sided derivative of the bump (0 outside (1/2, 1)).
double bump_derivative(double r);

struct CertificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AssumptionCertificate {
    double lipschitz = 0.0;    // L_b
    double radius = 0.0;       // R
    double contraction = 0.0;  // c
    double expansion = 0.0;    // K
    int dim = 1;               // state dimension the constants were certified in
    std::string method;        // "analytic" | "numeric"
    double safety_factor = 1.0;
    std::optional<double> hessian_lipschitz; // C, only for C^1 drifts

    nlohmann::json to_json() const;
    static AssumptionCertificate from_json(const nlohmann::json& j);
};

enum class DriftKind { Linear, PerturbedLinear, Custom };

class DriftSpec {
public:
    static DriftSpec linear(int d, double rate);
    static DriftSpec perturbed_linear(int d, double rate, double bump_amp,
                                      double bump_radius);
    static DriftSpec custom(int d, std::function<Vec(const Vec&)> fn,
                            std::string label = "custom");

    DriftKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double rate() const { return rate_; }
    double bump_amp() const { return bump_amp_; }
    double bump_radius() const { return bump_radius_; }
    const std::string& label() const { return label_; }

    Vec operator()(const Vec& x) const;

    // Built-in kinds are radial multiplier fields b(x) = psi(|x|) x.
    bool is_radial() const { return kind_ != DriftKind::Custom; }
    double radial_multiplier(double r) const;

    // sup_{|y| <= r} |b(y)|.  Exact for linear; dense 1-d maximisation for
    // perturbed-linear; direction-sampled and inflated by 5% for custom kinds
    // (flag reported through sup_norm_is_estimate).
    double sup_norm_on_ball(double r) const;
    bool sup_norm_is_estimate() const { return kind_ == DriftKind::Custom; }

    std::optional<AssumptionCertificate> certificate;

    nlohmann::json to_json() const;
    static DriftSpec from_json(const nlohmann::json& j);

private:
    DriftSpec() = default;
    DriftKind kind_ = DriftKind::Linear;
    int dim_ = 1;
    double rate_ = 1.0, bump_amp_ = 0.0, bump_radius_ = 1.0;
    std::function<Vec(const Vec&)> fn_;
    std::string label_;
};

struct CertifyOptions {
    long pair_samples = 200000;   // random pair budget
    double box = 0.0;             // half-width of sampling box; 0 = auto (>= 3R)
    int radial_grid = 48;         // radii per candidate in the outside regime
    double safety = 1.1;          // inflates K, L_b; deflates c
    std::vector<double> radius_candidates; // empty = automatic sweep
    std::uint64_t seed = 2024;
};

// Constants such that (A1)-(A2) hold on every tested pair.  mode "analytic"
// is available for the linear kind only; everything else is sampled.
// Throws CertificationError when no candidate radius admits c > 0.
AssumptionCertificate certify(const DriftSpec& spec, const std::string& mode,
                              const CertifyOptions& opts = {});

// The (R, c) trade-off behind certify's choice, for parameter scans.
struct RadiusScanRow {
    double radius;
    double contraction_raw; // before safety deflation; <= 0 marks failure
    bool admissible;
};
std::vector<RadiusScanRow> certify_scan(const DriftSpec& spec,
                                        const CertifyOptions& opts = {});

// ---------------------------------------------------------------------------
// Particle systems: X^{(i)} steps by F(X^{(i)}) + G_i(X).

struct PayoffSpec {
    // l : R^d x R^d -> R^d, bounded by sup_norm and Lipschitz in each
    // argument with constant lipschitz.
    std::function<Vec(const Vec&, const Vec&)> fn;
    double sup_norm = -1.0;
    double lipschitz = -1.0;
};

class ParticleDriftSpec {
public:
    explicit ParticleDriftSpec(DriftSpec conf) : confinement(std::move(conf)) {}

    DriftSpec confinement; // F
    int particles = 0;     // N (total)
    int dim = 1;

    // G_i; rows of the state matrix are particles.
    std::function<Vec(int, const Mat&)> interaction;
    std::string interaction_kind = "none"; // "mean-field-game"|"custom"|"none"
    int block = 0;                          // mean-field-game block size

    // Certified interaction constants.
    double interaction_lipschitz = 0.0;  // L_G: |G(x)-G(y)| <= L_G|x-y|
    double interaction_weighted = 0.0;   // C_G: sum_j |dx_j||G_j(x)-G_j(y)| <= C_G|x-y|^2
    double interaction_bound = 0.0;      // M_G: |G_i(x)| <= M_G(1+|x_i|^p)
    double growth_power = 1.0;           // p

    Vec drift_of(int i, const Mat& state) const;
};

// Two opposing blocks of size block_N; the first block is pushed by
// -(1/N) sum_j l(own, opposing_j), the second by +(1/N) sum_j l(opposing_j, own).
// Constants: M_G = sup|l|, p = 1, L_G = C_G = 2 Lip(l).
ParticleDriftSpec build_mean_field_game(const PayoffSpec& payoff, int block_N,
                                        const DriftSpec& confinement);

} // namespace wclb
