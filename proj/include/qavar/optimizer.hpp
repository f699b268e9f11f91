// Probe-state and interrogation-time optimisation of the quantum Allan
// variance, and long-term stability extrapolation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "qavar/hilbert.hpp"
#include "qavar/noise_model.hpp"
#include "qavar/qavar_core.hpp"
#include "qavar/types.hpp"

namespace qavar {

/**
 * Fast bound evaluation for real joint pure states.
 *
 * Per-level phases of a probe commute with the phase noise, so the bound only
 * depends on the moduli of the amplitudes and every search below runs on real
 * vectors. The decoherence matrix M and drift matrix Q are computed once.
 */
class BoundEvaluator {
public:
    BoundEvaluator(const KernelSet &kernels, const JointSpace &space,
                   double support_tolerance = 1e-12);

    struct Evaluation {
        double sigma2_q = 0.0;
        double correction = 0.0;
        RealMatrix strategy; ///< X = i L, real antisymmetric (empty unless requested)
    };

    Evaluation evaluate(const RealVector &psi, bool want_strategy = false) const;
    double sigma2_q(const RealVector &psi) const { return evaluate(psi).sigma2_q; }

    /// Real symmetric A with cost(rho, L) = sigma2_LO + Tr(rho A) for L = -i X.
    RealMatrix cost_operator(const RealMatrix &strategy) const;

    double sigma2_lo() const noexcept { return kernels_.sigma2_lo; }
    const KernelSet &kernels() const noexcept { return kernels_; }
    const JointSpace &space() const noexcept { return space_; }

private:
    KernelSet kernels_;
    JointSpace space_;
    double support_tolerance_;
    RealMatrix decoherence_;
    RealMatrix drift_;
};

/// A_L for a Hermitian strategy L: cost_functional(rho, L) = sigma2_LO + Tr(rho A_L).
ComplexMatrix cost_operator(const ComplexMatrix &L, const KernelSet &kernels, const JointSpace &space);

/// Which per-step states a product search ranges over.
enum class ProbeFamily {
    symmetric, ///< any state of the symmetric subspace (atoms may be entangled)
    coherent,  ///< all atoms in the same single-atom state (no entanglement)
};

struct ProductSearch {
    ProbeFamily family = ProbeFamily::symmetric;
    double tolerance = 1e-7; ///< relative simplex spread
    int max_iter = 200;
    int n_starts = 8;
    std::uint64_t seed = 0;
    double support_tolerance = 1e-12;
    /// Extra starting points (per-step amplitude moduli), searched before random starts.
    std::vector<RealVector> warm_starts;
};

struct JointSearch {
    double tolerance = 1e-8;
    int max_iter = 200;
    int n_starts = 1;
    std::uint64_t seed = 0;
    double support_tolerance = 1e-12;
};

struct FixedProbe {
    SymmetricState state;
};

using ProbeStrategy = std::variant<FixedProbe, ProductSearch, JointSearch>;

struct OptimizeReport {
    ComplexVector best_state; ///< per-step amplitudes, or joint amplitudes when `joint`
    bool joint = false;
    int best_k = 0;
    double best_T = 0.0;
    double sigma2_q = std::numeric_limits<double>::quiet_NaN();
    double sigma2_lo = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
    /// Distinct local optima (per-step moduli) found by a product search.
    std::vector<RealVector> local_optima;
    /// |<best|ghz>|^2 per step, or against ghz^{(x)K} for joint states.
    double ghz_overlap = std::numeric_limits<double>::quiet_NaN();
};

/// Amplitude moduli from search coordinates (angles) for a family.
RealVector family_amplitudes(ProbeFamily family, int n_atoms, const Eigen::VectorXd &angles);

OptimizeReport optimize_product_state(const NoiseParams &noise, int n_atoms, int k, double T,
                                      const ProductSearch &search);

/// Alternates the optimal strategy for the current state with the ground state
/// of the strategy's cost operator. Every half-step minimises the same
/// functional, so `history` never increases.
OptimizeReport optimize_joint_state(const NoiseParams &noise, int n_atoms, int k, double T,
                                    const JointSearch &search);

OptimizeReport evaluate_fixed_probe(const NoiseParams &noise, const SymmetricState &state, int k,
                                    double T, double support_tolerance = 1e-12);

struct InterrogationOptions {
    int k_max = 4;
    std::size_t dimension_cap = 20000;
    /// Product searches at k reuse the local optima found at k-1 as starts.
    bool continuation = true;
    /// Above this joint dimension a continued product search skips random
    /// restarts and starts only from the best optimum found at k-1.
    std::size_t restart_dim_limit = 1000;
};

struct KSample {
    int k = 0;
    double T = 0.0;
    double sigma2_q = 0.0;
};

struct InterrogationReport {
    OptimizeReport best;
    std::vector<KSample> per_k;
};

/// Smallest k in 1..k_max whose joint dimension exceeds the cap, if any.
std::optional<int> first_k_over_cap(int n_atoms, int k_max, std::size_t dimension_cap);

/// Runs the probe strategy for T = tau/k, k = 1..k_max, and keeps the smallest
/// bound (ties go to the smaller k). Throws ResourceError naming the first k
/// whose dimension exceeds the cap.
InterrogationReport optimize_interrogation(const NoiseParams &noise, int n_atoms, double tau,
                                           const ProbeStrategy &strategy,
                                           const InterrogationOptions &options = {});

struct PlateauOptions {
    int points = 5;
    double flatness = 0.05; ///< (max - min)/mean of c(tau) over the window
};

struct LongTermFit {
    double c = std::numeric_limits<double>::quiet_NaN(); ///< rad^2 s, at the largest usable tau
    double spread = std::numeric_limits<double>::quiet_NaN();
    bool conclusive = false;
    std::vector<double> window_tau;
    std::vector<double> window_c;
};

struct BoundPoint {
    double tau = 0.0;
    double sigma2_q = 0.0;
    /// The k sweep chose k = k_max, so a larger k might still lower the bound.
    bool capped = false;
};

/// c(tau) = sigma2_q omega0^2 tau over the largest-tau window of points that
/// are not capped. c is read at the window's largest tau and `conclusive` says
/// whether the window is flat. Needs >= 3 uncapped points.
LongTermFit extrapolate_long_term(std::vector<BoundPoint> points, double omega0,
                                  const PlateauOptions &options = {});

} // namespace qavar
