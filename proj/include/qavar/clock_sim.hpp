// Ramsey clock with an integrator servo, and Allan variance estimation of its
// corrected output.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "qavar/noise_model.hpp"
#include "qavar/optimizer.hpp"
#include "qavar/random.hpp"

namespace qavar {

enum class PhaseEstimator { linear, arcsine };

PhaseEstimator parse_phase_estimator(std::string_view name);
std::string_view to_string(PhaseEstimator estimator);

struct ServoConfig {
    double gain = 0.5; ///< in (0, 1]
    PhaseEstimator estimator = PhaseEstimator::linear;

    void validate() const;
};

struct SimConfig {
    NoiseParams noise;
    int n_atoms = 1;
    double T = 0.5;    ///< step duration [s]
    int n_steps = 10000;
    ServoConfig servo;
    std::uint64_t seed = 0;

    void validate() const;
};

struct FrequencyTrace {
    double T = 0.0;
    std::vector<double> y;           ///< theta_i/T - c_i [rad/s]
    std::vector<double> corrections; ///< c_i [rad/s]
    std::vector<int> outcomes;       ///< excitations m_i (empty when free running)
};

/// Exact step-by-step sampler of the phase integrals of OU-plus-white noise,
/// stationary from the first step.
class StepPhaseSampler {
public:
    StepPhaseSampler(const NoiseParams &noise, double T, Rng &rng);

    /// Phase accumulated during the next step [rad].
    double next(Rng &rng);

private:
    double phi_;            ///< exp(-gamma T)
    double drift_gain_;     ///< (1 - phi)/gamma
    double l11_, l21_, l22_; ///< Cholesky factor of the conditional (x_T, I) covariance
    double white_sd_;
    double x_;              ///< OU state at the start of the step
};

/// Mid-fringe Ramsey interrogation of N atoms in a product state, steered by an
/// integrator: p = (1 + sin phi)/2, c <- c + gain * phi_hat / T.
FrequencyTrace simulate_clock(const SimConfig &config);

/// The same servo loop driven by a sampled frequency trace (dt spacing); T must
/// be a whole number of samples.
FrequencyTrace simulate_clock(const SimConfig &config, const std::vector<double> &omega, double dt);

/// Uncorrected step-averaged LO frequency, y_i = theta_i / T.
FrequencyTrace free_running_trace(const NoiseParams &noise, double T, int n_steps, std::uint64_t seed);

struct AvarEstimate {
    double avar = 0.0; ///< fractional, at tau = k T
    std::size_t n_pairs = 0;
};

/// Mean of (Ybar_{j+1} - Ybar_j)^2 / (2 omega0^2) over k-step block averages.
/// The overlapping form slides the window by one step.
AvarEstimate avar_estimate(const FrequencyTrace &trace, int k, double omega0, bool overlapping = true);

/// What the simulated clock is compared against.
struct BoundReference {
    NoiseParams noise;
    ProbeStrategy strategy;
    InterrogationOptions interrogation;
    /// Long-term constant c [rad^2 s]. When set, taus with more than k_max
    /// simulated steps are compared against c/(omega0^2 tau) instead of the
    /// k sweep, which can no longer reach the simulated T there.
    std::optional<double> long_term_c;
};

struct BoundCheckOptions {
    int n_runs = 100;
    bool overlapping = true;
    unsigned threads = 0; ///< 0: hardware concurrency
};



struct EnsembleAvar {
    double tau = 0.0;
    int k_steps = 0;
    double avar = 0.0;     ///< mean over runs
    double stderr_ = 0.0;  ///< standard error of that mean
    std::size_t n_pairs = 0; ///< per run
    int n_runs = 0;
};

/// AVAR of n_runs independent clocks (run r seeded from stream r of `seed`),
/// each tau a whole multiple of config.T.
std::vector<EnsembleAvar> ensemble_avar(const SimConfig &config, const std::vector<double> &taus,
                                        std::uint64_t seed, const BoundCheckOptions &options = {});

struct BoundCheckRow {
    double tau = 0.0;
    int k_steps = 0;           ///< tau / T of the simulated clock
    double sim_avar = 0.0;     ///< ensemble mean
    double sim_stderr = 0.0;
    std::size_t n_pairs = 0;   ///< per run
    double sigma2_q = 0.0;
    int bound_k = 0;
    double bound_T = 0.0;
    bool violation = false;    ///< sim_avar + 3 sim_stderr < sigma2_q
    bool skipped = false;      ///< bound exceeded the dimension cap
    bool extrapolated = false; ///< sigma2_q is c/(omega0^2 tau)
};

/// Pairs ensemble_avar with the bound minimised over k <= interrogation.k_max,
/// or with the long-term form past k_max steps when reference.long_term_c is set.
/// Bounds are evaluated per tau on options.threads workers.
std::vector<BoundCheckRow> bound_check(const SimConfig &config, const BoundReference &reference,
                                       const std::vector<double> &taus, std::uint64_t seed,
                                       const BoundCheckOptions &options = {});

/// Whole number of steps in tau, or DomainError.
int steps_in(double tau, double T);

} // namespace qavar
