// Gaussian local-oscillator noise: Ornstein-Uhlenbeck plus white frequency
// noise, its phase-integral kernels, and exact samplers.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "qavar/types.hpp"

namespace qavar {

/**
 * Parameters of the LO frequency-noise model
 *
 *   R(t) = <w(t) w(0)> = alpha * exp(-gamma |t|) + beta * delta(t)
 *
 * alpha [(rad/s)^2], beta [(rad/s)^2 s], gamma [1/s], omega0 [rad/s].
 */
struct NoiseParams {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 1.0;
    double omega0 = 1.0;

    /// Throws DomainError unless alpha >= 0, beta >= 0, gamma > 0, omega0 > 0.
    void validate() const;

    /// alpha = 2, beta = 0.4, gamma = 0.5, omega0 = 3.25e15 rad/s.
    static NoiseParams laser_example();
};

/// Smooth part of the autocorrelation, alpha * exp(-gamma t). The delta part
/// is never sampled on a grid; kernels add it analytically.
double autocorrelation(const NoiseParams &params, double t);

/// Covariance of the phase integrals over two length-T blocks whose start
/// times differ by lag*T.
double block_covariance(const NoiseParams &params, double T, int lag);

/// K x K covariance of the step phases theta_i = int_{(i-1)T}^{iT} w dt.
RealMatrix block_kernel(const NoiseParams &params, double T, int K);

/// Cov(theta_i, w) for i = 1..2k-1, where w = (Phi_2 - Phi_1)/tau is the
/// difference of the window-averaged frequencies and tau = k*T.
RealVector cross_kernel(const NoiseParams &params, double T, int k);

/// Fractional Allan variance of the free-running LO at averaging time tau.
double free_lo_avar(const NoiseParams &params, double tau);

/// Kernels for a given step length T and window size k.
struct KernelSet {
    double T = 0.0;
    int k = 0;
    int K = 0;          ///< number of interrogation steps, 2k - 1
    RealMatrix G;       ///< step-phase covariance [rad^2]
    RealVector H;       ///< Cov(theta_i, w) [rad^2/s]
    double sigma2_lo = 0.0;
    double w_var = 0.0; ///< Var(w) = 2 omega0^2 sigma2_lo [(rad/s)^2]
    double omega0 = 1.0;

    double tau() const noexcept { return k * T; }

    /// (K+1) x (K+1) joint covariance of (theta_1..theta_K, w).
    RealMatrix bordered() const;
};

KernelSet make_kernels(const NoiseParams &params, double T, int k);

/// Exact sampler of the zero-mean Gaussian vector (theta_1..theta_K, w).
class JointSampler {
public:
    /// Throws NumericalError when the bordered covariance has an eigenvalue
    /// below -1e-10 (relative to its scale).
    explicit JointSampler(const KernelSet &kernels);

    int size() const noexcept { return static_cast<int>(factor_.rows()); }

    /// Writes one draw into out (size K+1) using the supplied standard normals.
    template <typename Derived, typename Out>
    void transform(const Eigen::MatrixBase<Derived> &normals, Out &&out) const {
        out.noalias() = factor_ * normals;
    }

    const RealMatrix &factor() const noexcept { return factor_; }

private:
    RealMatrix factor_;
};

/// n_samples draws of (theta_1..theta_K, w) as columns of a (K+1) x n matrix.
RealMatrix sample_joint(const NoiseParams &params, double T, int k, std::size_t n_samples,
                        std::uint64_t seed);

enum class TraceKind { white, flicker, random_walk, ou };

TraceKind parse_trace_kind(std::string_view name);
std::string_view to_string(TraceKind kind);

/**
 * Sampled LO frequency trace w_LO [rad/s] on a grid of spacing dt.
 *
 * - white: samples are dt-averages of white noise, variance beta/dt.
 * - ou: exact AR(1) update with decay exp(-gamma dt), stationary start N(0, alpha).
 * - random_walk: starts at zero, increments N(0, beta dt).
 * - flicker: 1/f frequency noise synthesised in the frequency domain and scaled
 *   so that its non-overlapping Allan deviation at 1 s equals flicker_adev.
 *   Requires n*dt >= 2 s.
 */
RealVector gen_trace(TraceKind kind, const NoiseParams &params, double dt, std::size_t n,
                     std::uint64_t seed, double flicker_adev = 0.0);

} // namespace qavar
