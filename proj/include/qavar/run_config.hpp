// Batch run configuration: a single JSON document with a strict schema.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qavar/clock_sim.hpp"
#include "qavar/errors.hpp"
#include "qavar/noise_model.hpp"
#include "qavar/optimizer.hpp"

namespace qavar {

enum class RunMode { bound, optimize, simulate, lo_avar, bound_check };

std::optional<RunMode> parse_run_mode(std::string_view name);
std::string_view to_string(RunMode mode);

enum class ProbeKind { plus, ghz, amplitudes, optimize_product, optimize_joint };

struct ProbeSpec {
    ProbeKind kind = ProbeKind::plus;
    ComplexVector amplitudes;                  ///< for ProbeKind::amplitudes
    ProbeFamily family = ProbeFamily::symmetric; ///< for optimize-product
    int n_starts = 8;
    int max_iter = 200;
};

struct SimSettings {
    ServoConfig servo;
    double T = 0.5;
    int n_steps = 10000;
    int n_runs = 100;
    bool overlapping = true;
};

struct RunConfig {
    RunMode mode = RunMode::bound;
    NoiseParams noise;
    int n_atoms = 1;
    std::vector<double> taus; ///< ascending order not required; rows follow this order
    int k_max = 4;
    ProbeSpec probe;
    SimSettings sim;
    std::uint64_t seed = 0;
    std::string output;       ///< empty: standard output
    std::size_t dimension_cap = 20000;
    double tolerance = 1e-8;
    /// bound-check: c [rad^2 s] for taus beyond k_max steps (see BoundReference).
    std::optional<double> long_term_c;
};

struct ConfigIssue {
    std::string path; ///< JSON pointer-like, e.g. "noise.gamma"
    std::string message;
};

/// Validation failure listing every offending field.
class ConfigError : public DomainError {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue> &issues() const noexcept { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

/// Parses and validates a configuration, applying defaults. Unknown keys are
/// errors. An empty document is treated as {}.
RunConfig parse_run_config(std::string_view text);

/// Canonical JSON of a resolved configuration (all defaults filled in).
std::string normalized_json(const RunConfig &config);

/// 64-bit FNV-1a of normalized_json, excluding the output path.
std::uint64_t config_hash(const RunConfig &config);

} // namespace qavar
