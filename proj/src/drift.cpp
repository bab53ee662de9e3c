#include "wclb/drift.hpp"

#include <algorithm>
#include <cmath>

#include "wclb/parallel.hpp"
#include "wclb/rng.hpp"

namespace wclb {

double bump(double r) {
    if (r <= 0.5) return 1.0;
    if (r >= 1.0) return 0.0;
    const double u = 2.0 * r - 1.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double bump_derivative(double r) {
    if (r <= 0.5 || r >= 1.0) return 0.0;
    const double u = 2.0 * r - 1.0;
    const double w = 1.0 - u * u;
    return bump(r) * (-4.0 * u / (w * w));
}

nlohmann::json AssumptionCertificate::to_json() const {
    nlohmann::json j{{"L_b", lipschitz},      {"R", radius},
                     {"c", contraction},      {"K", expansion},
                     {"d", dim},              {"method", method},
                     {"safety_factor", safety_factor}};
    if (hessian_lipschitz) j["hessian_lipschitz_C"] = *hessian_lipschitz;
    return j;
}

AssumptionCertificate AssumptionCertificate::from_json(const nlohmann::json& j) {
    AssumptionCertificate c;
    c.lipschitz = j.at("L_b").get<double>();
    c.radius = j.at("R").get<double>();
    c.contraction = j.at("c").get<double>();
    c.expansion = j.at("K").get<double>();
    c.dim = j.at("d").get<int>();
    c.method = j.at("method").get<std::string>();
    c.safety_factor = j.at("safety_factor").get<double>();
    if (j.contains("hessian_lipschitz_C"))
        c.hessian_lipschitz = j.at("hessian_lipschitz_C").get<double>();
    return c;
}

DriftSpec DriftSpec::linear(int d, double rate) {
    if (d < 1 || rate <= 0.0) throw std::invalid_argument("linear drift: d >= 1, rate > 0");
    DriftSpec s;
    s.kind_ = DriftKind::Linear;
    s.dim_ = d;
    s.rate_ = rate;
    s.label_ = "linear";
    return s;
}

DriftSpec DriftSpec::perturbed_linear(int d, double rate, double bump_amp,
                                      double bump_radius) {
    if (d < 1 || rate <= 0.0 || bump_amp < 0.0 || bump_radius <= 0.0)
        throw std::invalid_argument("perturbed-linear drift: bad parameters");
    DriftSpec s;
    s.kind_ = DriftKind::PerturbedLinear;
    s.dim_ = d;
    s.rate_ = rate;
    s.bump_amp_ = bump_amp;
    s.bump_radius_ = bump_radius;
    s.label_ = "perturbed-linear";
    return s;
}

DriftSpec DriftSpec::custom(int d, std::function<Vec(const Vec&)> fn,
                            std::string label) {
    if (d < 1 || !fn) throw std::invalid_argument("custom drift: d >= 1 and callable");
    DriftSpec s;
    s.kind_ = DriftKind::Custom;
    s.dim_ = d;
    s.fn_ = std::move(fn);
    s.label_ = std::move(label);
    return s;
}

Vec DriftSpec::operator()(const Vec& x) const {
    if (x.size() != dim_) throw std::invalid_argument("drift: dimension mismatch");
    switch (kind_) {
        case DriftKind::Linear:
            return -rate_ * x;
        case DriftKind::PerturbedLinear:
            return (-rate_ + bump_amp_ * bump(x.norm() / bump_radius_)) * x;
        case DriftKind::Custom: {
            Vec v = fn_(x);
            if (v.size() != dim_) throw std::invalid_argument("drift: callable returned wrong dimension");
            return v;
        }
    }
    throw std::logic_error("drift: unknown kind");
}

double DriftSpec::radial_multiplier(double r) const {
    switch (kind_) {
        case DriftKind::Linear:
            return -rate_;
        case DriftKind::PerturbedLinear:
            return -rate_ + bump_amp_ * bump(r / bump_radius_);
        case DriftKind::Custom:
            break;
    }
    throw std::logic_error("radial_multiplier: custom drifts are not radial");
}

double DriftSpec::sup_norm_on_ball(double r) const {
    if (r < 0.0) throw std::invalid_argument("sup_norm_on_ball: r >= 0");
    switch (kind_) {
        case DriftKind::Linear:
            return rate_ * r;
        case DriftKind::PerturbedLinear: {
            // 1-d dense maximisation of |psi(s)| s with local refinement.
            auto val = [&](double s) { return std::fabs(radial_multiplier(s)) * s; };
            const int n = 20000;
            double best = 0.0, best_s = 0.0;
            for (int i = 0; i <= n; ++i) {
                const double s = r * i / n;
                const double v = val(s);
                if (v > best) { best = v; best_s = s; }
            }
            double lo = std::max(0.0, best_s - r / n), hi = std::min(r, best_s + r / n);
            for (int it = 0; it < 80; ++it) {
                const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
                if (val(m1) < val(m2)) lo = m1; else hi = m2;
            }
            return std::max(best, val(0.5 * (lo + hi)));
        }
        case DriftKind::Custom:
            break;
    }
    // Direction/radius sampling, inflated by 5%; non-rigorous by nature.
    NoiseField nf(7, Stream::Scratch);
    double best = 0.0;
    const int dirs = 2048, shells = 32;
    for (int j = 0; j < dirs; ++j) {
        Vec u(dim_);
        for (int k = 0; k < dim_; ++k) u[k] = nf.normal(j, 0, 0, k);
        const double nu = u.norm();
        if (nu < 1e-12) continue;
        u /= nu;
        for (int s = 1; s <= shells; ++s)
            best = std::max(best, ((*this)(u * (r * s / shells))).norm());
    }
    return 1.05 * best;
}

nlohmann::json DriftSpec::to_json() const {
    nlohmann::json j;
    j["d"] = dim_;
    switch (kind_) {
        case DriftKind::Linear:
            j["kind"] = "linear";
            j["params"] = {{"c0", rate_}};
            break;
        case DriftKind::PerturbedLinear:
            j["kind"] = "perturbed-linear";
            j["params"] = {{"c0", rate_}, {"beta", bump_amp_}, {"R0", bump_radius_}};
            break;
        case DriftKind::Custom:
            j["kind"] = "custom-callable";
            j["params"] = {{"label", label_}};
            break;
    }
    if (certificate) j["certificate"] = certificate->to_json();
    return j;
}

DriftSpec DriftSpec::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const int d = j.at("d").get<int>();
    DriftSpec s = [&] {
        if (kind == "linear") return linear(d, j.at("params").at("c0").get<double>());
        if (kind == "perturbed-linear")
            return perturbed_linear(d, j.at("params").at("c0").get<double>(),
                                    j.at("params").at("beta").get<double>(),
                                    j.at("params").at("R0").get<double>());
        if (kind == "custom-callable")
            throw std::invalid_argument("drift: custom callables cannot be deserialised");
        throw std::invalid_argument("drift: unknown kind '" + kind + "'");
    }();
    if (j.contains("certificate"))
        s.certificate = AssumptionCertificate::from_json(j.at("certificate"));
    return s;
}

// ---------------------------------------------------------------------------
// Numeric certification.

namespace {

struct PairSample {
    double q;   // <x-y, b(x)-b(y)> / |x-y|^2
    double nx;  // |x|
    double ny;  // |y|
};

struct SampledField {
    double lip_raw = 0.0;
    double expansion_raw = -1e300;
    std::vector<PairSample> pairs;
};

Vec draw_in_box(const NoiseField& nf, std::uint64_t i, std::uint64_t slot, int d,
                double box) {
    Vec x(d);
    for (int k = 0; k < d; ++k) x[k] = box * (2.0 * nf.uniform(i, slot, 0, k) - 1.0);
    return x;
}

Vec draw_direction(const NoiseField& nf, std::uint64_t i, std::uint64_t slot, int d) {
    Vec u(d);
    double n = 0.0;
    for (int bump_idx = 0; n < 1e-12 && bump_idx < 4; ++bump_idx) {
        for (int k = 0; k < d; ++k) u[k] = nf.normal(i, slot, bump_idx, k);
        n = u.norm();
    }
    return u / n;
}

SampledField sample_pairs(const DriftSpec& spec, const CertifyOptions& opts,
                          double box) {
    const int d = spec.dim();
    const long n = std::max<long>(opts.pair_samples, 1000);
    SampledField out;
    out.pairs.resize(static_cast<std::size_t>(n));
    std::vector<double> lip(static_cast<std::size_t>(n), 0.0);
    NoiseField nf(opts.seed, Stream::Certification);

    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Vec x, y;
        switch (i % 4) {
            case 0:
            case 1:
                x = draw_in_box(nf, i, 0, d, box);
                y = draw_in_box(nf, i, 1, d, box);
                break;
            case 2: { // short-range probe of the directional derivative
                x = draw_in_box(nf, i, 0, d, box);
                const double eps =
                    box * std::pow(10.0, -6.0 * nf.uniform(i, 2, 0, 0));
                y = x + eps * draw_direction(nf, i, 3, d);
                break;
            }
            default: { // radial shells
                x = draw_direction(nf, i, 3, d) * (box * nf.uniform(i, 2, 0, 1));
                y = draw_direction(nf, i, 4, d) * (box * nf.uniform(i, 2, 0, 2));
                break;
            }
        }
        const Vec delta = x - y;
        const double d2 = delta.squaredNorm();
        if (d2 < 1e-24) {
            out.pairs[i] = {-1e300, x.norm(), y.norm()};
            return;
        }
        const Vec db = spec(x) - spec(y);
        out.pairs[i] = {delta.dot(db) / d2, x.norm(), y.norm()};
        lip[i] = db.norm() / std::sqrt(d2);
    });

    for (std::size_t i = 0; i < out.pairs.size(); ++i) { // sequential reduce
        out.lip_raw = std::max(out.lip_raw, lip[i]);
        out.expansion_raw = std::max(out.expansion_raw, out.pairs[i].q);
    }

    // Deterministic short-pair sweep along radial and tangential directions.
    // Random pairs alone easily miss the directional-derivative sup when the
    // drift's features live on a scale much smaller than the box.
    const double scale =
        spec.kind() == DriftKind::PerturbedLinear ? spec.bump_radius() : 1.0;
    const double h = 1e-6 * box;
    std::vector<Vec> dirs;
    {
        Vec e1 = Vec::Zero(d);
        e1[0] = 1.0;
        dirs.push_back(e1);
        for (int j = 1; j < 6 && d > 1; ++j) dirs.push_back(draw_direction(nf, j, 11, d));
    }
    auto probe = [&](const Vec& x, const Vec& y) {
        const Vec delta = x - y;
        const double dist2 = delta.squaredNorm();
        if (dist2 < 1e-30) return;
        const Vec db = spec(x) - spec(y);
        const double q = delta.dot(db) / dist2;
        out.lip_raw = std::max(out.lip_raw, db.norm() / std::sqrt(dist2));
        out.expansion_raw = std::max(out.expansion_raw, q);
        out.pairs.push_back({q, x.norm(), y.norm()});
    };
    const int nr = 3000;
    for (int g = 0; g < 2; ++g) {
        const double top = g == 0 ? box : std::min(box, 6.0 * scale);
        for (int i = 0; i <= nr; ++i) {
            const double r = top * i / nr;
            for (const Vec& u : dirs) {
                probe(r * u, (r + h) * u);
                if (d > 1) {
                    Vec w = dirs[(&u - dirs.data() + 1) % dirs.size()];
                    w -= w.dot(u) * u;
                    const double nw = w.norm();
                    if (nw > 1e-9) probe(r * u, r * u + h * (w / nw));
                }
            }
        }
    }
    return out;
}

// Deterministic structured pairs with at least one point outside radius R.
double outside_regime_max_q(const DriftSpec& spec, double R, double box,
                            int radial_grid, std::uint64_t seed) {
    const int d = spec.dim();
    NoiseField nf(seed + 1, Stream::Certification);
    std::vector<Vec> dirs;
    for (int j = 0; j < 12; ++j) dirs.push_back(draw_direction(nf, 1000 + j, 9, d));
    Vec e1 = Vec::Zero(d);
    e1[0] = 1.0;
    dirs.push_back(e1);
    dirs.push_back(-e1);

    const int m = std::max(radial_grid, 8);
    double worst = -1e300;
    auto consider = [&](const Vec& x, const Vec& y) {
        const Vec delta = x - y;
        const double d2 = delta.squaredNorm();
        if (d2 < 1e-24) return;
        worst = std::max(worst, delta.dot(spec(x) - spec(y)) / d2);
    };
    for (int a = 0; a < m; ++a) {
        // outer radii cluster near R where the constraint binds hardest
        const double t = static_cast<double>(a) / (m - 1);
        const double r_out = R + (box - R) * std::pow(t, 1.5);
        for (int b = 0; b < 2 * m; ++b) {
            // fine grid over the inner ball, coarse continuation to the box
            const double r_in = b < m ? R * b / (m - 1)
                                      : R + (box - R) * (b - m + 1) / m;
            for (std::size_t u = 0; u < dirs.size(); u += 3)
                for (std::size_t v = 0; v < dirs.size(); v += 4)
                    consider(dirs[u] * r_out, dirs[v] * r_in);
        }
        // short pairs straddling the shell
        for (std::size_t u = 0; u + 1 < dirs.size(); ++u) {
            consider(dirs[u] * r_out, dirs[u] * (r_out * (1.0 + 1e-5)));
            consider(dirs[u] * r_out, dirs[u + 1] * r_out);
        }
    }
    return worst;
}

std::vector<double> default_candidates(const DriftSpec& spec) {
    const double scale =
        spec.kind() == DriftKind::PerturbedLinear ? spec.bump_radius() : 1.0;
    std::vector<double> cands;
    for (double f : {1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0})
        cands.push_back(scale * f);
    return cands;
}

std::optional<double> hessian_lipschitz_estimate(const DriftSpec& spec,
                                                 const CertifyOptions& opts,
                                                 double box) {
    if (spec.kind() == DriftKind::Linear) return 0.0;
    if (spec.kind() == DriftKind::Custom) return std::nullopt;
    // Radial multiplier field: Db(x) = psi(r) I + (psi'(r)/r) x x^T with
    // psi(r) = -c0 + beta g(r/R0).
    const int d = spec.dim();
    auto jac = [&](const Vec& x) {
        const double r = x.norm();
        const double psi = spec.radial_multiplier(r);
        Mat J = psi * Mat::Identity(d, d);
        if (r > 1e-12) {
            const double dpsi =
                spec.bump_amp() * bump_derivative(r / spec.bump_radius()) / spec.bump_radius();
            J += (dpsi / r) * (x * x.transpose());
        }
        return J;
    };
    NoiseField nf(opts.seed + 2, Stream::Certification);
    double best = 0.0;
    const long n = std::min<long>(opts.pair_samples, 20000);
    for (long i = 0; i < n; ++i) {
        Vec x = draw_in_box(nf, i, 5, d, box);
        Vec y = (i % 2 == 0)
                    ? draw_in_box(nf, i, 6, d, box)
                    : Vec(x + box * std::pow(10.0, -5.0 * nf.uniform(i, 7, 0, 0)) *
                                  draw_direction(nf, i, 8, d));
        const double dist = (x - y).norm();
        if (dist < 1e-12) continue;
        Mat D = jac(x) - jac(y);
        Eigen::SelfAdjointEigenSolver<Mat> es(D);
        const double opnorm = es.eigenvalues().cwiseAbs().maxCoeff();
        best = std::max(best, opnorm / dist);
    }
    return best * opts.safety;
}

} // namespace

std::vector<RadiusScanRow> certify_scan(const DriftSpec& spec,
                                        const CertifyOptions& opts) {
    std::vector<double> cands =
        opts.radius_candidates.empty() ? default_candidates(spec) : opts.radius_candidates;
    std::sort(cands.begin(), cands.end());
    double box = opts.box > 0.0 ? opts.box : 3.0 * cands.back();
    // the sampling box must dominate every candidate: B >= 3R
    std::erase_if(cands, [&](double R) { return 3.0 * R > box + 1e-12; });
    if (cands.empty())
        throw std::invalid_argument("certify: no radius candidate fits the box (need box >= 3R)");

    const SampledField field = sample_pairs(spec, opts, box);
    std::vector<RadiusScanRow> rows;
    for (double R : cands) {
        double worst = outside_regime_max_q(spec, R, box, opts.radial_grid, opts.seed);
        for (const auto& p : field.pairs)
            if (p.nx >= R || p.ny >= R) worst = std::max(worst, p.q);
        rows.push_back({R, -worst, worst < 0.0});
    }
    return rows;
}

AssumptionCertificate certify(const DriftSpec& spec, const std::string& mode,
                              const CertifyOptions& opts) {
    if (mode == "analytic") {
        if (spec.kind() != DriftKind::Linear)
            throw std::invalid_argument(
                "certify: analytic constants are available for the linear kind only");
        AssumptionCertificate cert;
        cert.lipschitz = spec.rate();
        cert.radius = 1.0;          // any radius works; smallest convention
        cert.contraction = spec.rate();
        cert.expansion = spec.rate(); // any positive bound works; convention c0
        cert.dim = spec.dim();
        cert.method = "analytic";
        cert.safety_factor = 1.0;
        cert.hessian_lipschitz = 0.0;
        return cert;
    }
    if (mode != "numeric") throw std::invalid_argument("certify: mode is 'analytic' or 'numeric'");

    std::vector<double> cands =
        opts.radius_candidates.empty() ? default_candidates(spec) : opts.radius_candidates;
    std::sort(cands.begin(), cands.end());
    double box = opts.box > 0.0 ? opts.box : 3.0 * cands.back();
    std::erase_if(cands, [&](double R) { return 3.0 * R > box + 1e-12; });
    if (cands.empty())
        throw std::invalid_argument("certify: no radius candidate fits the box (need box >= 3R)");

    const SampledField field = sample_pairs(spec, opts, box);

    double best_quality = 1e300;
    double best_R = 0.0, best_c = 0.0;
    for (double R : cands) {
        double worst = outside_regime_max_q(spec, R, box, opts.radial_grid, opts.seed);
        for (const auto& p : field.pairs)
            if (p.nx >= R || p.ny >= R) worst = std::max(worst, p.q);
        if (worst >= 0.0) continue;
        const double c_cert = -worst / opts.safety;
        const double quality = R / c_cert; // favours small R and strong contraction
        if (quality < best_quality) {
            best_quality = quality;
            best_R = R;
            best_c = c_cert;
        }
    }
    if (best_R == 0.0)
        throw CertificationError(
            "assumptions not certifiable: no tested radius gives a positive "
            "contraction rate outside the ball");

    AssumptionCertificate cert;
    cert.method = "numeric";
    cert.safety_factor = opts.safety;
    cert.dim = spec.dim();
    cert.radius = best_R;
    cert.contraction = best_c;
    cert.lipschitz = field.lip_raw * opts.safety;
    cert.expansion =
        field.expansion_raw > 0.0 ? field.expansion_raw * opts.safety : 1e-8;
    cert.hessian_lipschitz = hessian_lipschitz_estimate(spec, opts, box);
    return cert;
}

// ---------------------------------------------------------------------------
// Particle systems.

Vec ParticleDriftSpec::drift_of(int i, const Mat& state) const {
    if (state.rows() != particles || state.cols() != dim)
        throw std::invalid_argument("particle drift: state shape mismatch");
    if (i < 0 || i >= particles) throw std::invalid_argument("particle drift: index");
    Vec v = confinement(state.row(i).transpose());
    if (interaction) v += interaction(i, state);
    return v;
}

ParticleDriftSpec build_mean_field_game(const PayoffSpec& payoff, int block_N,
                                        const DriftSpec& confinement) {
    if (!payoff.fn || payoff.sup_norm < 0.0 || payoff.lipschitz < 0.0)
        throw std::invalid_argument(
            "mean-field game: payoff needs a callable plus sup and Lipschitz bounds");
    if (block_N < 1) throw std::invalid_argument("mean-field game: block size >= 1");
    if (!confinement.certificate)
        throw std::invalid_argument("mean-field game: confinement must be certified");

    ParticleDriftSpec spec(confinement);
    spec.dim = confinement.dim();
    spec.block = block_N;
    spec.particles = 2 * block_N;
    spec.interaction_kind = "mean-field-game";
    spec.interaction_bound = payoff.sup_norm; // M_G, with p = 1
    spec.growth_power = 1.0;
    spec.interaction_lipschitz = 2.0 * payoff.lipschitz;
    spec.interaction_weighted = 2.0 * payoff.lipschitz;

    auto fn = payoff.fn;
    const int N = block_N;
    spec.interaction = [fn, N](int i, const Mat& state) {
        const int d = static_cast<int>(state.cols());
        Vec acc = Vec::Zero(d);
        if (i < N) {
            for (int j = N; j < 2 * N; ++j)
                acc -= fn(state.row(i).transpose(), state.row(j).transpose());
        } else {
            for (int j = 0; j < N; ++j)
                acc += fn(state.row(j).transpose(), state.row(i).transpose());
        }
        return Vec(acc / N);
    };
    return spec;
}

} // namespace wclb
