#include "qavar/clock_sim.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>

#include "qavar/errors.hpp"
#include "qavar/parallel.hpp"

namespace qavar {

PhaseEstimator parse_phase_estimator(std::string_view name) {
    if (name == "linear") return PhaseEstimator::linear;
    if (name == "arcsine") return PhaseEstimator::arcsine;
    throw DomainError("unknown phase estimator '" + std::string(name) + "'");
}

std::string_view to_string(PhaseEstimator estimator) {
    return estimator == PhaseEstimator::linear ? "linear" : "arcsine";
}

void ServoConfig::validate() const {
    if (!(gain > 0.0 && gain <= 1.0)) throw DomainError("servo gain must be in (0, 1]");
}

void SimConfig::validate() const {
    noise.validate();
    servo.validate();
    if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("T must be > 0");
    if (n_steps < 2) throw DomainError("n_steps must be >= 2");
}

StepPhaseSampler::StepPhaseSampler(const NoiseParams &noise, double T, Rng &rng) {
    noise.validate();
    if (!(T > 0.0)) throw DomainError("T must be > 0");
    const double a = noise.alpha, g = noise.gamma, x = g * T;
    const double one_minus_phi = -std::expm1(-x);
    phi_ = 1.0 - one_minus_phi;
    drift_gain_ = one_minus_phi / g;
    // Conditional on the OU value at the step start: Var(x_T), Var(I), Cov(x_T, I).
    const double var_x = a * one_minus_phi * (1.0 + phi_);
    const double reduced = x < 1e-3 ? x * x * x * (2.0 / 3.0 - x / 2.0 + 7.0 * x * x / 30.0)
                                    : 2.0 * x - 2.0 * one_minus_phi - one_minus_phi * one_minus_phi;
    const double var_i = a / (g * g) * reduced;
    const double cov = a / g * one_minus_phi * one_minus_phi;
    l11_ = std::sqrt(var_x);
    l21_ = l11_ > 0.0 ? cov / l11_ : 0.0;
    l22_ = std::sqrt(std::max(var_i - l21_ * l21_, 0.0));
    white_sd_ = std::sqrt(noise.beta * T);
    std::normal_distribution<double> normal;
    x_ = std::sqrt(a) * normal(rng);
}

double StepPhaseSampler::next(Rng &rng) {
    std::normal_distribution<double> normal;
    const double z1 = normal(rng), z2 = normal(rng), z3 = normal(rng);
    const double phase = drift_gain_ * x_ + l21_ * z1 + l22_ * z2 + white_sd_ * z3;
    x_ = phi_ * x_ + l11_ * z1;
    return phase;
}

namespace {

// One Ramsey cycle plus servo update; returns the measured excitation count.
struct Servo {
    const SimConfig &config;
    Rng rng;
    double correction = 0.0;

    int step(double theta, FrequencyTrace &out) {
        const double T = config.T;
        const int N = config.n_atoms;
        const double phase = theta - correction * T;
        const double p = std::clamp(0.5 * (1.0 + std::sin(phase)), 0.0, 1.0);
        const int m = std::binomial_distribution<int>(N, p)(rng);
        double estimate = 2.0 * m / N - 1.0;
        if (config.servo.estimator == PhaseEstimator::arcsine) estimate = std::asin(estimate);
        out.y.push_back(theta / T - correction);
        out.corrections.push_back(correction);
        out.outcomes.push_back(m);
        correction += config.servo.gain * estimate / T;
        return m;
    }
};

FrequencyTrace reserve_trace(double T, int n, bool with_outcomes) {
    FrequencyTrace out;
    out.T = T;
    out.y.reserve(static_cast<std::size_t>(n));
    out.corrections.reserve(static_cast<std::size_t>(n));
    if (with_outcomes) out.outcomes.reserve(static_cast<std::size_t>(n));
    return out;
}

} // namespace

FrequencyTrace simulate_clock(const SimConfig &config) {
    config.validate();
    Rng noise_rng = make_stream(config.seed, 1);
    StepPhaseSampler sampler(config.noise, config.T, noise_rng);
    Servo servo{config, make_stream(config.seed, 2)};
    FrequencyTrace out = reserve_trace(config.T, config.n_steps, true);
    for (int i = 0; i < config.n_steps; ++i) servo.step(sampler.next(noise_rng), out);
    return out;
}

FrequencyTrace simulate_clock(const SimConfig &config, const std::vector<double> &omega, double dt) {
    config.validate();
    if (!(dt > 0.0)) throw DomainError("dt must be > 0");
    const double ratio = config.T / dt;
    const auto per_step = static_cast<std::size_t>(std::llround(ratio));
    if (per_step < 1 || std::abs(ratio - static_cast<double>(per_step)) > 1e-9 * ratio) {
        throw DomainError("T must be a whole number of trace samples");
    }
    if (omega.size() < per_step * static_cast<std::size_t>(config.n_steps)) {
        throw DomainError("trace is shorter than n_steps * T");
    }
    Servo servo{config, make_stream(config.seed, 2)};
    FrequencyTrace out = reserve_trace(config.T, config.n_steps, true);
    for (int i = 0; i < config.n_steps; ++i) {
        const auto first = omega.begin() + static_cast<std::ptrdiff_t>(per_step * static_cast<std::size_t>(i));
        double theta = 0.0;
        for (auto it = first; it != first + static_cast<std::ptrdiff_t>(per_step); ++it) theta += *it;
        servo.step(theta * dt, out);
    }
    return out;
}

FrequencyTrace free_running_trace(const NoiseParams &noise, double T, int n_steps, std::uint64_t seed) {
    if (n_steps < 2) throw DomainError("n_steps must be >= 2");
    Rng rng = make_stream(seed, 1);
    StepPhaseSampler sampler(noise, T, rng);
    FrequencyTrace out = reserve_trace(T, n_steps, false);
    for (int i = 0; i < n_steps; ++i) {
        out.y.push_back(sampler.next(rng) / T);
        out.corrections.push_back(0.0);
    }
    return out;
}

AvarEstimate avar_estimate(const FrequencyTrace &trace, int k, double omega0, bool overlapping) {
    if (k < 1) throw DomainError("avar_estimate: k must be >= 1");
    if (!(omega0 > 0.0)) throw DomainError("avar_estimate: omega0 must be > 0");
    const std::size_t n = trace.y.size();
    const auto width = static_cast<std::size_t>(k);
    if (n < 2 * width) throw DomainError("avar_estimate: trace shorter than two windows");

    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + trace.y[i];
    auto block = [&](std::size_t start) { return (prefix[start + width] - prefix[start]) / k; };

    const std::size_t stride = overlapping ? 1 : width;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t s = 0; s + 2 * width <= n; s += stride) {
        const double d = block(s + width) - block(s);
        sum += d * d;
        ++pairs;
    }
    return {sum / static_cast<double>(pairs) / (2.0 * omega0 * omega0), pairs};
}

int steps_in(double tau, double T) {
    if (!(tau > 0.0) || !(T > 0.0)) throw DomainError("tau and T must be > 0");
    const double r = tau / T;
    const long k = std::lround(r);
    if (k < 1 || std::abs(r - static_cast<double>(k)) > 1e-9 * r) {
        throw DomainError("tau = " + std::to_string(tau) + " is not a whole multiple of T");
    }
    return static_cast<int>(k);
}

std::vector<EnsembleAvar> ensemble_avar(const SimConfig &config, const std::vector<double> &taus,
                                        std::uint64_t seed, const BoundCheckOptions &options) {
    config.validate();
    if (options.n_runs < 2) throw DomainError("n_runs must be >= 2");
    if (taus.empty()) throw DomainError("empty tau list");
    std::vector<int> ks;
    for (double tau : taus) {
        ks.push_back(steps_in(tau, config.T));
        if (2 * ks.back() > config.n_steps) throw DomainError("tau longer than half the run");
    }

    const auto runs = static_cast<std::size_t>(options.n_runs);
    std::vector<std::vector<AvarEstimate>> estimates(runs);
    parallel_for(runs, options.threads, [&](std::size_t r) {
        SimConfig run = config;
        run.seed = splitmix64(seed ^ splitmix64(r));
        const FrequencyTrace trace = simulate_clock(run);
        for (int k : ks) estimates[r].push_back(avar_estimate(trace, k, config.noise.omega0, options.overlapping));
    });

    std::vector<EnsembleAvar> out;
    for (std::size_t j = 0; j < taus.size(); ++j) {
        double mean = 0.0;
        for (const auto &e : estimates) mean += e[j].avar;
        mean /= static_cast<double>(runs);
        double ss = 0.0;
        for (const auto &e : estimates) ss += (e[j].avar - mean) * (e[j].avar - mean);
        EnsembleAvar row;
        row.tau = taus[j];
        row.k_steps = ks[j];
        row.avar = mean;
        row.stderr_ = std::sqrt(ss / static_cast<double>(runs - 1) / static_cast<double>(runs));
        row.n_pairs = estimates.front()[j].n_pairs;
        row.n_runs = options.n_runs;
        out.push_back(row);
    }
    return out;
}

std::vector<BoundCheckRow> bound_check(const SimConfig &config, const BoundReference &reference,
                                       const std::vector<double> &taus, std::uint64_t seed,
                                       const BoundCheckOptions &options) {
    const NoiseParams &a = config.noise, &b = reference.noise;
    if (a.alpha != b.alpha || a.beta != b.beta || a.gamma != b.gamma || a.omega0 != b.omega0) {
        throw DomainError("bound_check: simulator and bound use different noise parameters");
    }
    if (const auto *fixed = std::get_if<FixedProbe>(&reference.strategy);
        fixed && fixed->state.n_atoms() != config.n_atoms) {
        throw DomainError("bound_check: probe and simulator atom numbers differ");
    }
    const auto sims = ensemble_avar(config, taus, seed, options);
    std::vector<BoundCheckRow> rows(taus.size());
    parallel_for(taus.size(), options.threads, [&](std::size_t j) {
        BoundCheckRow &row = rows[j];
        row.tau = taus[j];
        row.k_steps = sims[j].k_steps;
        row.sim_avar = sims[j].avar;
        row.sim_stderr = sims[j].stderr_;
        row.n_pairs = sims[j].n_pairs;
        if (reference.long_term_c && row.k_steps > reference.interrogation.k_max) {
            row.extrapolated = true;
            row.sigma2_q = *reference.long_term_c / (b.omega0 * b.omega0 * row.tau);
            row.bound_T = std::numeric_limits<double>::quiet_NaN();
            row.violation = row.sim_avar + 3.0 * row.sim_stderr < row.sigma2_q;
            return;
        }
        try {
            const auto bound = optimize_interrogation(reference.noise, config.n_atoms, taus[j],
                                                      reference.strategy, reference.interrogation);
            row.sigma2_q = bound.best.sigma2_q;
            row.bound_k = bound.best.best_k;
            row.bound_T = bound.best.best_T;
            row.violation = row.sim_avar + 3.0 * row.sim_stderr < row.sigma2_q;
        } catch (const ResourceError &) {
            row.skipped = true;
            row.sigma2_q = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return rows;
}

} // namespace qavar
