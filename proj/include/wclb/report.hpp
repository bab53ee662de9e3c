// Shared report types: how a numeric estimate was produced, and the outcome
// of a single inequality check.  Canonical JSON is byte-stable for a fixed
// config and seed; wall-clock data is kept out of it (sidecar only).
#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace wclb {

// Raised when a documented admissibility gate rejects the requested
// parameters.  Carries the violated inequality in human-readable form.
// CLI maps this to the "verification fail" exit code, not a usage error.
class GateViolation : public std::runtime_error {
  public:
    explicit GateViolation(const std::string& what) : std::runtime_error(what) {}
};

// Origin of a reported numeric value.
struct Provenance {
    enum class Kind { Formula, Quadrature, MonteCarlo };

    Kind kind = Kind::Formula;
    long long samples = 0;       // Monte Carlo only
    double standard_error = 0.0; // Monte Carlo only

    static Provenance formula() { return {}; }
    static Provenance quadrature() { return {Kind::Quadrature, 0, 0.0}; }
    static Provenance monte_carlo(long long n, double se) {
        return {Kind::MonteCarlo, n, se};
    }

    nlohmann::json to_json() const;
    static Provenance from_json(const nlohmann::json& j);
};

// Outcome of one inequality check `estimate <= bound + margin`.
struct VerificationReport {
    std::string claim;      // stable identifier of the inequality checked
    double bound = 0.0;     // theoretical right-hand side
    double estimate = 0.0;  // measured left-hand side (worst case over a grid)
    double margin = 0.0;    // declared allowance (e.g. 3 standard errors)
    std::string location;   // where the worst case occurred
    bool pass = false;
    Provenance provenance;        // how `estimate` was obtained
    nlohmann::json details;       // auxiliary per-check numbers and flags
    double runtime_seconds = 0.0; // excluded from canonical JSON

    // Sets pass from the defining invariant: pass <=> estimate <= bound + margin.
    void finalize() { pass = estimate <= bound + margin; }

    // Canonical, reproducible serialisation (no runtime metadata).
    nlohmann::json to_json() const;
    // Non-reproducible metadata destined for a sidecar file.
    nlohmann::json sidecar_json() const;
    static VerificationReport from_json(const nlohmann::json& j);
};

} // namespace wclb
