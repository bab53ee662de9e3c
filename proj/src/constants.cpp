#include "wclb/constants.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wclb/report.hpp"

namespace wclb {

namespace {

// Non-finite values survive JSON round trips as strings.
nlohmann::json num_json(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double num_from_json(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::invalid_argument("constants json: bad numeric field: " + s);
}

} // namespace

double poincare_constant(double c_lp, double m_bar, double w_bar) {
    if (!(c_lp > 0.0)) throw std::invalid_argument("poincare_constant: C_LP must be positive");
    if (!(m_bar >= 1.0)) throw std::invalid_argument("poincare_constant: M must be >= 1");
    if (!(w_bar > 0.0) || w_bar > 1.0)
        throw std::invalid_argument("poincare_constant: contraction rate out of (0,1]");
    // 1 - (1 - w)^2 == w (2 - w), cancellation-free for tiny w.
    return c_lp * m_bar * m_bar / (w_bar * (2.0 - w_bar));
}

nlohmann::json ParticleConstants::to_json() const {
    return nlohmann::json{{"delta1", num_json(delta1)},
                          {"delta2", num_json(delta2)},
                          {"delta3", num_json(delta3)},
                          {"delta4", num_json(delta4)},
                          {"delta0", num_json(delta0)},
                          {"T1", num_json(T1)},
                          {"T2", num_json(T2)},
                          {"T3", num_json(T3)},
                          {"T0", num_json(T0)},
                          {"R_tilde", num_json(r_tilde)},
                          {"h_tilde_displayed", num_json(h_tilde_displayed)},
                          {"h_tilde_ratio", num_json(h_tilde_ratio)},
                          {"net_rate_displayed", num_json(net_rate_displayed)},
                          {"net_rate_ratio", num_json(net_rate_ratio)},
                          {"sufficient_condition", sufficient_condition},
                          {"admissible", admissible}};
}

ParticleConstants ParticleConstants::from_json(const nlohmann::json& j) {
    ParticleConstants p;
    p.delta1 = num_from_json(j.at("delta1"));
    p.delta2 = num_from_json(j.at("delta2"));
    p.delta3 = num_from_json(j.at("delta3"));
    p.delta4 = num_from_json(j.at("delta4"));
    p.delta0 = num_from_json(j.at("delta0"));
    p.T1 = num_from_json(j.at("T1"));
    p.T2 = num_from_json(j.at("T2"));
    p.T3 = num_from_json(j.at("T3"));
    p.T0 = num_from_json(j.at("T0"));
    p.r_tilde = num_from_json(j.at("R_tilde"));
    p.h_tilde_displayed = num_from_json(j.at("h_tilde_displayed"));
    p.h_tilde_ratio = num_from_json(j.at("h_tilde_ratio"));
    p.net_rate_displayed = num_from_json(j.at("net_rate_displayed"));
    p.net_rate_ratio = num_from_json(j.at("net_rate_ratio"));
    p.sufficient_condition = j.at("sufficient_condition").get<bool>();
    p.admissible = j.at("admissible").get<bool>();
    return p;
}

nlohmann::json ConstantsReport::to_json() const {
    nlohmann::json j{{"delta", delta},
                     {"T", temperature},
                     {"certificate", certificate.to_json()},
                     {"kappa", kappa_params},
                     {"delta1", num_json(delta1)},
                     {"delta2", num_json(delta2)},
                     {"delta3", num_json(delta3)},
                     {"delta4", num_json(delta4)},
                     {"delta0", num_json(delta0)},
                     {"T1", num_json(T1)},
                     {"T2", num_json(T2)},
                     {"T3", num_json(T3)},
                     {"T0", num_json(T0)},
                     {"R_bar", num_json(r_bar)},
                     {"h", num_json(rate)},
                     {"M", num_json(prefactor)},
                     {"C_P", num_json(poincare)},
                     {"kappa_sup", num_json(kappa_sup)},
                     {"kappa_grad_sup", num_json(kappa_grad_sup)},
                     {"kappa_sup_simplified_display", num_json(kappa_sup_simplified_display)},
                     {"drift_sup_inner", num_json(drift_sup_inner)},
                     {"drift_sup_enlarged", num_json(drift_sup_enlarged)},
                     {"drift_sup_is_estimate", drift_sup_is_estimate},
                     {"delta_ok", delta_ok},
                     {"T_ok", temperature_ok},
                     {"admissible", admissible}};
    if (particle) j["particle"] = particle->to_json();
    return j;
}

ConstantsReport ConstantsReport::from_json(const nlohmann::json& j) {
    ConstantsReport r;
    r.delta = j.at("delta").get<double>();
    r.temperature = j.at("T").get<double>();
    r.certificate = AssumptionCertificate::from_json(j.at("certificate"));
    r.kappa_params = j.at("kappa");
    r.delta1 = num_from_json(j.at("delta1"));
    r.delta2 = num_from_json(j.at("delta2"));
    r.delta3 = num_from_json(j.at("delta3"));
    r.delta4 = num_from_json(j.at("delta4"));
    r.delta0 = num_from_json(j.at("delta0"));
    r.T1 = num_from_json(j.at("T1"));
    r.T2 = num_from_json(j.at("T2"));
    r.T3 = num_from_json(j.at("T3"));
    r.T0 = num_from_json(j.at("T0"));
    r.r_bar = num_from_json(j.at("R_bar"));
    r.rate = num_from_json(j.at("h"));
    r.prefactor = num_from_json(j.at("M"));
    r.poincare = num_from_json(j.at("C_P"));
    r.kappa_sup = num_from_json(j.at("kappa_sup"));
    r.kappa_grad_sup = num_from_json(j.at("kappa_grad_sup"));
    r.kappa_sup_simplified_display = num_from_json(j.at("kappa_sup_simplified_display"));
    r.drift_sup_inner = num_from_json(j.at("drift_sup_inner"));
    r.drift_sup_enlarged = num_from_json(j.at("drift_sup_enlarged"));
    r.drift_sup_is_estimate = j.at("drift_sup_is_estimate").get<bool>();
    r.delta_ok = j.at("delta_ok").get<bool>();
    r.temperature_ok = j.at("T_ok").get<bool>();
    r.admissible = j.at("admissible").get<bool>();
    if (j.contains("particle")) r.particle = ParticleConstants::from_json(j.at("particle"));
    return r;
}

std::string ConstantsReport::to_table() const {
    std::ostringstream os;
    os.precision(10);
    auto row = [&](const char* name, double v) {
        os << "  " << name;
        for (int i = static_cast<int>(std::string(name).size()); i < 30; ++i) os << ' ';
        os << v << '\n';
    };
    os << "inputs\n";
    row("delta", delta);
    row("T", temperature);
    row("L_b", certificate.lipschitz);
    row("R", certificate.radius);
    row("c", certificate.contraction);
    row("K", certificate.expansion);
    os << "step-size gates\n";
    row("delta1  (1/L_b)", delta1);
    row("delta2  (c/L_b^2)", delta2);
    row("delta3  (K/L_b^2)", delta3);
    row("delta4  (smoothing)", delta4);
    row("delta0  (min)", delta0);
    os << "temperature floors\n";
    row("T1  (inner-ball shift)", T1);
    row("T2  (enlarged-ball shift)", T2);
    row("T3  (2 sup kappa)", T3);
    row("T0  (max)", T0);
    os << "derived\n";
    row("R_bar", r_bar);
    row("h", rate);
    row("M", prefactor);
    row("C_P", poincare);
    row("sup kappa", kappa_sup);
    row("sup kappa (simplified display)", kappa_sup_simplified_display);
    row("sup grad kappa", kappa_grad_sup);
    row("sup |b| inner ball", drift_sup_inner);
    row("sup |b| enlarged ball", drift_sup_enlarged);
    os << "admissible: " << (admissible ? "yes" : "no") << " (delta_ok="
       << (delta_ok ? "yes" : "no") << ", T_ok=" << (temperature_ok ? "yes" : "no")
       << ")\n";
    if (particle) {
        const auto& p = *particle;
        os << "particle system\n";
        row("delta1~", p.delta1);
        row("delta2~", p.delta2);
        row("delta3~", p.delta3);
        row("delta4~", p.delta4);
        row("delta0~", p.delta0);
        row("T1~", p.T1);
        row("T2~", p.T2);
        row("T3~", p.T3);
        row("T0~", p.T0);
        row("R~", p.r_tilde);
        row("h~ (displayed form)", p.h_tilde_displayed);
        row("h~ (ratio form)", p.h_tilde_ratio);
        row("net rate (displayed)", p.net_rate_displayed);
        row("net rate (ratio)", p.net_rate_ratio);
        os << "  sufficient condition: " << (p.sufficient_condition ? "yes" : "no")
           << "; particle admissible: " << (p.admissible ? "yes" : "no") << '\n';
    }
    return os.str();
}

namespace {

void check_kappa_matches_certificate(const AssumptionCertificate& cert,
                                     const KappaFn& kappa) {
    if (kappa.dim() != cert.dim || kappa.ball_radius() != cert.radius ||
        kappa.contraction_rate() != cert.contraction ||
        kappa.expansion_rate() != cert.expansion)
        throw std::invalid_argument(
            "constants: the weight was built from different certificate constants");
}

} // namespace

ConstantsReport single_chain_constants(const AssumptionCertificate& cert,
                                       const KappaFn& kappa, double delta,
                                       double temperature,
                                       const std::function<double(double)>& sup_b,
                                       bool sup_is_estimate) {
    if (!(delta > 0.0) || !(temperature > 0.0))
        throw std::invalid_argument("constants: delta and T must be positive");
    check_kappa_matches_certificate(cert, kappa);

    ConstantsReport r;
    r.delta = delta;
    r.temperature = temperature;
    r.certificate = cert;
    r.kappa_params = kappa.to_json();
    r.kappa_sup = kappa.sup_norm();
    r.kappa_grad_sup = kappa.grad_sup_norm();
    const double K = cert.expansion, c = cert.contraction, R = cert.radius;
    r.kappa_sup_simplified_display =
        (1.0 + 84.0 * K / c) * 48.0 * K * R * R / cert.dim;

    r.delta1 = gate_delta1(cert.lipschitz);
    r.delta2 = gate_delta2(c, cert.lipschitz);
    r.delta3 = gate_delta3(K, cert.lipschitz);
    r.delta4 = gate_delta4(R, cert.dim, temperature);
    r.delta0 = std::min({r.delta1, r.delta2, r.delta3, r.delta4});

    r.rate = rate_h(c, kappa.a());
    r.prefactor = weak_prefactor(kappa.sup_norm(), temperature);
    r.poincare = poincare_constant(2.0 * delta * temperature, r.prefactor,
                                   std::min(r.rate * delta, 1.0));

    r.drift_sup_inner = sup_b(R);
    r.drift_sup_is_estimate = sup_is_estimate;
    r.T1 = gate_T1(r.kappa_grad_sup, r.drift_sup_inner, kappa.a());
    r.T3 = gate_T3(r.kappa_sup);

    r.r_bar = enlarged_radius(kappa.support_radius(), delta, sup_b(0.0), cert.lipschitz);
    if (std::isfinite(r.r_bar)) {
        r.drift_sup_enlarged = sup_b(r.r_bar);
        r.T2 = gate_T2(r.kappa_grad_sup, r.drift_sup_enlarged, kappa.L());
    } else {
        // delta L_b >= 1: the enlarged ball is undefined and so is T2.
        r.drift_sup_enlarged = std::numeric_limits<double>::infinity();
        r.T2 = std::numeric_limits<double>::infinity();
    }
    r.T0 = std::max({r.T1, r.T2, r.T3});

    r.delta_ok = delta <= r.delta0;
    r.temperature_ok = temperature >= r.T0;
    r.admissible = r.delta_ok && r.temperature_ok;
    return r;
}

ConstantsReport single_chain_constants(const DriftSpec& drift, const KappaFn& kappa,
                                       double delta, double temperature) {
    if (!drift.certificate)
        throw std::invalid_argument("constants: drift carries no certificate");
    return single_chain_constants(
        *drift.certificate, kappa, delta, temperature,
        [&](double radius) { return drift.sup_norm_on_ball(radius); },
        drift.sup_norm_is_estimate());
}

ConstantsReport particle_constants(const ParticleDriftSpec& pspec, const KappaFn& kappa,
                                   double delta, double temperature) {
    const DriftSpec& conf = pspec.confinement;
    if (!conf.certificate)
        throw std::invalid_argument("constants: confinement carries no certificate");
    if (pspec.dim != kappa.dim())
        throw std::invalid_argument("constants: particle dimension mismatch");

    ConstantsReport r = single_chain_constants(conf, kappa, delta, temperature);

    const auto& cert = *conf.certificate;
    const double L_F = cert.lipschitz, c = cert.contraction, K = cert.expansion;
    const double R = cert.radius;
    const int d = cert.dim;
    const double M_G = pspec.interaction_bound;
    const double L_G = pspec.interaction_lipschitz;
    const double C_G = pspec.interaction_weighted;
    const double p = pspec.growth_power;

    ParticleConstants pc;
    pc.delta1 = 1.0 / (L_F + M_G);
    pc.delta2 = c / (L_F * L_F);
    pc.delta3 = K / (L_F * L_F);
    {
        const double gd2 = math::gamma_fn(0.5 * d);
        const double gd2p1 = math::gamma_fn(0.5 * (d + 2));
        pc.delta4 = R * R * gd2 /
                    (temperature * (d + 2) * gd2 + 16.0 * temperature * gd2p1);
    }
    pc.delta0 = std::min({pc.delta1, pc.delta2, pc.delta3, pc.delta4});

    const double den = 1.0 - delta * L_F - delta * M_G;
    if (den <= 0.0)
        throw GateViolation("particle constants: delta (L_F + M_G) >= 1 leaves the "
                            "enlarged radius undefined");
    const double F0 = conf(Vec(Vec::Zero(d))).norm();
    pc.r_tilde =
        std::max(1.0, (kappa.support_radius() + delta * F0 + delta * M_G) / den);

    const double grad_sup = kappa.grad_sup_norm();
    pc.T1 = 2.0 * (conf.sup_norm_on_ball(R) + M_G + M_G * std::pow(R, p)) * grad_sup /
            kappa.a();
    pc.T2 = 2.0 *
            (conf.sup_norm_on_ball(pc.r_tilde) + M_G + M_G * std::pow(pc.r_tilde, p)) *
            grad_sup / kappa.L();
    pc.T3 = 2.0 * kappa.sup_norm();
    pc.T0 = std::max({pc.T1, pc.T2, pc.T3});

    const double drag = delta * L_G * L_G + 2.0 * C_G + 2.0 * delta * L_F * C_G;
    pc.h_tilde_displayed = drag * (pc.T0 + 2.0 * kappa.sup_norm());
    pc.h_tilde_ratio = drag * (1.0 + 2.0 * kappa.sup_norm() / temperature);
    pc.net_rate_displayed = r.rate - pc.h_tilde_displayed;
    pc.net_rate_ratio = r.rate - pc.h_tilde_ratio;
    pc.sufficient_condition = std::min(0.5 * c, 0.5 * L_F) >= 5.0 * C_G;
    pc.admissible = delta <= pc.delta0 && temperature >= pc.T0;

    r.particle = pc;
    return r;
}

SolveResult solve_admissible_pair(const DriftSpec& drift, const KappaFn& kappa,
                                  SolveStrategy strategy, double delta,
                                  double temperature, int max_iter) {
    SolveResult res;
    if (strategy == SolveStrategy::ValidateOnly) {
        res.report = single_chain_constants(drift, kappa, delta, temperature);
        res.delta = delta;
        res.temperature = temperature;
        res.outcome = res.report.admissible ? SolveResult::Outcome::Admissible
                                            : SolveResult::Outcome::Inadmissible;
        return res;
    }

    if (!drift.certificate)
        throw std::invalid_argument("constants: drift carries no certificate");
    const auto& cert = *drift.certificate;
    // Alternate delta <- delta0(T), T <- T0(delta).  Seeding with T = T3 and
    // updating delta first keeps delta strictly below 1/L_b, so the enlarged
    // radius stays defined throughout.
    double T = gate_T3(kappa.sup_norm());
    double dlt = gate_delta1(cert.lipschitz);
    nlohmann::json trace = nlohmann::json::array();
    for (int it = 0; it < max_iter; ++it) {
        const double new_delta =
            std::min({gate_delta1(cert.lipschitz), gate_delta2(cert.contraction, cert.lipschitz),
                      gate_delta3(cert.expansion, cert.lipschitz),
                      gate_delta4(cert.radius, cert.dim, T), (1.0 - 1e-6) / cert.lipschitz});
        const ConstantsReport rep = single_chain_constants(drift, kappa, new_delta, T);
        const double new_T = rep.T0;
        trace.push_back({{"iter", it}, {"delta", new_delta}, {"T", new_T}});
        const bool converged = std::fabs(new_delta - dlt) <= 1e-10 * dlt &&
                               std::fabs(new_T - T) <= 1e-10 * T;
        dlt = new_delta;
        T = new_T;
        res.iterations = it + 1;
        if (converged) {
            res.outcome = SolveResult::Outcome::Converged;
            ConstantsReport fin = single_chain_constants(drift, kappa, dlt, T);
            if (!fin.delta_ok) {
                // The last delta was computed against the previous T; settle on
                // delta0 at the final T (T0 only shrinks when delta does).
                dlt = fin.delta0;
                fin = single_chain_constants(drift, kappa, dlt, T);
            }
            res.delta = dlt;
            res.temperature = T;
            res.report = std::move(fin);
            res.trace = std::move(trace);
            return res;
        }
    }
    res.outcome = SolveResult::Outcome::NonConvergence;
    res.delta = dlt;
    res.temperature = T;
    res.report = single_chain_constants(drift, kappa, dlt, T);
    res.trace = std::move(trace);
    return res;
}

} // namespace wclb
