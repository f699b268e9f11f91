#include "qavar/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "qavar/errors.hpp"
#include "qavar/random.hpp"

namespace qavar {

namespace {

// x - 1 + exp(-x), accurate for small x.
double ramp_remainder(double x) {
    if (x < 1e-3) {
        return x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)));
    }
    return x + std::expm1(-x);
}

void require_positive(double value, const char *name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw DomainError(std::string(name) + " must be > 0");
    }
}

} // namespace

void NoiseParams::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("beta must be >= 0");
    require_positive(gamma, "gamma");
    require_positive(omega0, "omega0");
}

NoiseParams NoiseParams::laser_example() { return {2.0, 0.4, 0.5, 3.25e15}; }

double autocorrelation(const NoiseParams &params, double t) {
    if (!(t >= 0.0)) throw DomainError("autocorrelation: t must be >= 0");
    return params.alpha * std::exp(-params.gamma * t);
}

double block_covariance(const NoiseParams &params, double T, int lag) {
    require_positive(T, "T");
    const double g = params.gamma;
    const double a_over_g2 = params.alpha / (g * g);
    const int m = std::abs(lag);
    if (m == 0) {
        return 2.0 * a_over_g2 * ramp_remainder(g * T) + params.beta * T;
    }
    const double edge = -std::expm1(-g * T);
    return a_over_g2 * std::exp(-g * (m - 1) * T) * edge * edge;
}

RealMatrix block_kernel(const NoiseParams &params, double T, int K) {
    require_positive(T, "T");
    if (K < 1) throw DomainError("block_kernel: K must be >= 1");
    RealVector by_lag(K);
    for (int m = 0; m < K; ++m) by_lag(m) = block_covariance(params, T, m);
    RealMatrix G(K, K);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) G(i, j) = by_lag(std::abs(i - j));
    return G;
}

RealVector cross_kernel(const NoiseParams &params, double T, int k) {
    require_positive(T, "T");
    if (k < 1) throw DomainError("cross_kernel: k must be >= 1");
    const int K = 2 * k - 1;
    const double tau = k * T;
    RealVector by_lag(2 * k);
    for (int m = 0; m < 2 * k; ++m) by_lag(m) = block_covariance(params, T, m);

    // w*tau = sum_j s_j theta_j over the 2k blocks of both windows, s = (-1..-1, +1..+1).
    RealVector H(K);
    for (int i = 0; i < K; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 2 * k; ++j) {
            const double s = j < k ? -1.0 : 1.0;
            acc += s * by_lag(std::abs(i - j));
        }
        H(i) = acc / tau;
    }
    return H;
}

double free_lo_avar(const NoiseParams &params, double tau) {
    require_positive(tau, "tau");
    const double window_var = block_covariance(params, tau, 0);
    const double adjacent_cov = block_covariance(params, tau, 1);
    const double diff_var = std::max(0.0, 2.0 * window_var - 2.0 * adjacent_cov);
    return diff_var / (2.0 * params.omega0 * params.omega0 * tau * tau);
}

RealMatrix KernelSet::bordered() const {
    RealMatrix B(K + 1, K + 1);
    B.topLeftCorner(K, K) = G;
    B.topRightCorner(K, 1) = H;
    B.bottomLeftCorner(1, K) = H.transpose();
    B(K, K) = w_var;
    return B;
}

KernelSet make_kernels(const NoiseParams &params, double T, int k) {
    params.validate();
    require_positive(T, "T");
    if (k < 1) throw DomainError("make_kernels: k must be >= 1");
    KernelSet ks;
    ks.T = T;
    ks.k = k;
    ks.K = 2 * k - 1;
    ks.G = block_kernel(params, T, ks.K);
    ks.H = cross_kernel(params, T, k);
    ks.sigma2_lo = free_lo_avar(params, k * T);
    ks.w_var = 2.0 * params.omega0 * params.omega0 * ks.sigma2_lo;
    ks.omega0 = params.omega0;
    return ks;
}

JointSampler::JointSampler(const KernelSet &kernels) {
    const RealMatrix cov = kernels.bordered();
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(cov);
    if (es.info() != Eigen::Success) {
        throw NumericalError("JointSampler: eigendecomposition failed");
    }
    const RealVector &lambda = es.eigenvalues();
    const double scale = std::max(1.0, std::abs(lambda.maxCoeff()));
    if (lambda.minCoeff() < -1e-10 * scale) {
        throw NumericalError("JointSampler: bordered covariance is not positive semidefinite");
    }
    factor_ = es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

RealMatrix sample_joint(const NoiseParams &params, double T, int k, std::size_t n_samples,
                        std::uint64_t seed) {
    if (n_samples < 1) throw DomainError("sample_joint: n_samples must be >= 1");
    const JointSampler sampler(make_kernels(params, T, k));
    const int dim = sampler.size();
    Rng rng = make_stream(seed);
    std::normal_distribution<double> normal;
    RealMatrix out(dim, static_cast<Eigen::Index>(n_samples));
    RealVector z(dim);
    for (Eigen::Index s = 0; s < out.cols(); ++s) {
        for (int d = 0; d < dim; ++d) z(d) = normal(rng);
        sampler.transform(z, out.col(s));
    }
    return out;
}

TraceKind parse_trace_kind(std::string_view name) {
    if (name == "white") return TraceKind::white;
    if (name == "flicker") return TraceKind::flicker;
    if (name == "random_walk" || name == "random-walk") return TraceKind::random_walk;
    if (name == "ou") return TraceKind::ou;
    throw DomainError("unknown trace kind '" + std::string(name) + "'");
}

std::string_view to_string(TraceKind kind) {
    switch (kind) {
    case TraceKind::white: return "white";
    case TraceKind::flicker: return "flicker";
    case TraceKind::random_walk: return "random_walk";
    case TraceKind::ou: return "ou";
    }
    return "unknown";
}

namespace {

RealVector flicker_trace(const NoiseParams &params, double dt, std::size_t n, Rng &rng,
                         double flicker_adev) {
    const std::size_t per_second = std::max<std::size_t>(1, std::llround(1.0 / dt));
    if (n < 2 * per_second) {
        throw DomainError("gen_trace: flicker normalisation needs at least 2 s of samples");
    }
    RealVector out = RealVector::Zero(static_cast<Eigen::Index>(n));
    if (flicker_adev == 0.0) return out;

    std::normal_distribution<double> normal;
    std::vector<Complex> spectrum(n, Complex(0.0, 0.0));
    for (std::size_t f = 1; 2 * f <= n; ++f) {
        const double shape = 1.0 / std::sqrt(static_cast<double>(f));
        Complex v(normal(rng), normal(rng));
        if (2 * f == n) v = Complex(v.real() * std::sqrt(2.0), 0.0);
        spectrum[f] = shape * v;
        spectrum[n - f] = std::conj(spectrum[f]);
    }
    std::vector<Complex> signal;
    Eigen::FFT<double> fft;
    fft.inv(signal, spectrum);
    for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = signal[i].real();

    // Non-overlapping Allan variance at 1 s of the unnormalised trace.
    const std::size_t blocks = n / per_second;
    double acc = 0.0;
    double prev = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const double mean = out.segment(static_cast<Eigen::Index>(b * per_second),
                                        static_cast<Eigen::Index>(per_second))
                                .mean();
        if (b > 0) acc += (mean - prev) * (mean - prev);
        prev = mean;
    }
    const double avar = acc / static_cast<double>(blocks - 1) /
                        (2.0 * params.omega0 * params.omega0);
    if (avar > 0.0) out *= flicker_adev / std::sqrt(avar);
    return out;
}

} // namespace

RealVector gen_trace(TraceKind kind, const NoiseParams &params, double dt, std::size_t n,
                     std::uint64_t seed, double flicker_adev) {
    params.validate();
    require_positive(dt, "dt");
    if (n < 1) throw DomainError("gen_trace: n must be >= 1");
    if (flicker_adev < 0.0) throw DomainError("gen_trace: flicker_adev must be >= 0");

    Rng rng = make_stream(seed);
    std::normal_distribution<double> normal;
    const auto len = static_cast<Eigen::Index>(n);
    RealVector out(len);

    switch (kind) {
    case TraceKind::white: {
        const double sd = std::sqrt(params.beta / dt);
        for (Eigen::Index i = 0; i < len; ++i) out(i) = sd * normal(rng);
        break;
    }
    case TraceKind::ou: {
        const double decay = std::exp(-params.gamma * dt);
        const double innovation = std::sqrt(params.alpha * -std::expm1(-2.0 * params.gamma * dt));
        double x = std::sqrt(params.alpha) * normal(rng);
        for (Eigen::Index i = 0; i < len; ++i) {
            out(i) = x;
            x = decay * x + innovation * normal(rng);
        }
        break;
    }
    case TraceKind::random_walk: {
        const double step = std::sqrt(params.beta * dt);
        double x = 0.0;
        for (Eigen::Index i = 0; i < len; ++i) {
            out(i) = x;
            x += step * normal(rng);
        }
        break;
    }
    case TraceKind::flicker:
        out = flicker_trace(params, dt, n, rng, flicker_adev);
        break;
    }
    return out;
}

} // namespace qavar
