#include "wclb/report.hpp"

namespace wclb {

namespace {

const char* kind_name(Provenance::Kind k) {
    switch (k) {
        case Provenance::Kind::Formula: return "formula";
        case Provenance::Kind::Quadrature: return "quadrature";
        case Provenance::Kind::MonteCarlo: return "monte-carlo";
    }
    return "formula";
}

Provenance::Kind kind_from_name(const std::string& s) {
    if (s == "formula") return Provenance::Kind::Formula;
    if (s == "quadrature") return Provenance::Kind::Quadrature;
    if (s == "monte-carlo") return Provenance::Kind::MonteCarlo;
    throw std::invalid_argument("unknown provenance kind: " + s);
}

} // namespace

nlohmann::json Provenance::to_json() const {
    nlohmann::json j;
    j["kind"] = kind_name(kind);
    if (kind == Kind::MonteCarlo) {
        j["samples"] = samples;
        j["standard_error"] = standard_error;
    }
    return j;
}

Provenance Provenance::from_json(const nlohmann::json& j) {
    Provenance p;
    p.kind = kind_from_name(j.at("kind").get<std::string>());
    if (p.kind == Kind::MonteCarlo) {
        p.samples = j.at("samples").get<long long>();
        p.standard_error = j.at("standard_error").get<double>();
    }
    return p;
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json j;
    j["claim"] = claim;
    j["bound"] = bound;
    j["estimate"] = estimate;
    j["margin"] = margin;
    j["location"] = location;
    j["pass"] = pass;
    j["provenance"] = provenance.to_json();
    if (!details.is_null()) j["details"] = details;
    return j;
}

nlohmann::json VerificationReport::sidecar_json() const {
    nlohmann::json j;
    j["claim"] = claim;
    j["runtime_seconds"] = runtime_seconds;
    return j;
}

VerificationReport VerificationReport::from_json(const nlohmann::json& j) {
    VerificationReport r;
    r.claim = j.at("claim").get<std::string>();
    r.bound = j.at("bound").get<double>();
    r.estimate = j.at("estimate").get<double>();
    r.margin = j.at("margin").get<double>();
    r.location = j.at("location").get<std::string>();
    r.pass = j.at("pass").get<bool>();
    r.provenance = Provenance::from_json(j.at("provenance"));
    if (j.contains("details")) r.details = j.at("details");
    return r;
}

} // namespace wclb
