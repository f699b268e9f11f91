// The quantum Allan variance: noise-averaged joint state, its derivative
// with respect to the window frequency difference, the SLD solve and the
// resulting bound, plus a Monte-Carlo estimator of the averaged operators.
//
// Matrix convention: rho(a, b) = <a|rho|b> in the joint multi-index basis.
// A step phase theta_i acts as exp(-i n_i theta_i), so the averaged operators
// are entrywise
//
//   rho_bar(a, b)   = rho_in(a, b) * exp(-1/2 (a-b)^T G (a-b))
//   rho_prime(a, b) = -i * rho_bar(a, b) * H.(a-b)
//
// The library works with the real-antisymmetric form D = i * rho_prime (and
// correspondingly X = i * L) so that real probe states stay in real arithmetic.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>

#include "qavar/hilbert.hpp"
#include "qavar/noise_model.hpp"
#include "qavar/types.hpp"

namespace qavar {

/// Independent per-step probe: the joint input is rho0^{(x)K}.
struct ProductInput {
    ComplexMatrix rho0;
};

/// Arbitrary joint input on the (N+1)^K-dimensional space.
struct JointInput {
    ComplexMatrix rho;
};

struct Scenario {
    NoiseParams noise;
    int n_atoms = 1;
    int k = 1;      ///< steps per averaging window
    double T = 1.0; ///< step duration [s]
    std::variant<ProductInput, JointInput> input;

    int steps() const noexcept { return 2 * k - 1; }
    double tau() const noexcept { return k * T; }
    JointSpace space() const { return {n_atoms, steps()}; }

    /// Checks noise parameters, k >= 1, T > 0 and input dimensions.
    void validate() const;

    /// The joint input density rho_in.
    ComplexMatrix input_density() const;
    KernelSet kernels() const { return make_kernels(noise, T, k); }

    static Scenario product(const NoiseParams &noise, const SymmetricState &state, int k, double T);
    static Scenario joint(const NoiseParams &noise, int n_atoms, const ComplexMatrix &rho, int k,
                          double T);
};

struct QavarOptions {
    /// Eigenpairs with lambda_r + lambda_s <= support_tolerance * lambda_max are dropped.
    double support_tolerance = 1e-12;
    bool compute_strategy = false;
};

struct QavarResult {
    double sigma2_lo = 0.0;
    double correction = 0.0;
    double sigma2_q = 0.0;
    std::optional<ComplexMatrix> L; ///< optimal strategy operator [rad/s]
    double support_cutoff = 0.0;   ///< absolute lambda_r + lambda_s threshold used
    std::size_t dropped_pairs = 0;
};

/// Per-basis-state quantities entering the cumulant formulas.
class PhaseTable {
public:
    PhaseTable(const KernelSet &kernels, const JointSpace &space);

    Eigen::Index dim() const noexcept { return drift_.size(); }

    /// 1/2 (a-b)^T G (a-b)
    double decay_exponent(Eigen::Index a, Eigen::Index b) const noexcept {
        return 0.5 * (quad_(a) + quad_(b)) - counts_.col(a).dot(weighted_.col(b));
    }

    /// H.(a-b)
    double drift(Eigen::Index a, Eigen::Index b) const noexcept { return drift_(a) - drift_(b); }

    /// M(a, b) = exp(-decay_exponent(a, b)); real symmetric, unit diagonal.
    RealMatrix decoherence_matrix() const;
    /// Q(a, b) = drift(a, b); real antisymmetric.
    RealMatrix drift_matrix() const;

    /// Excitation counts n(a) as columns (K x dim).
    const RealMatrix &counts() const noexcept { return counts_; }

private:
    RealMatrix counts_;
    RealMatrix weighted_; // G n(a)
    RealVector quad_;     // n(a)^T G n(a)
    RealVector drift_;    // H . n(a)
};

template <typename Scalar>
Matrix<Scalar> build_rho_bar(const Matrix<Scalar> &rho_in, const PhaseTable &table);

/// D = i * rho_prime, given rho_bar. Antisymmetric (anti-Hermitian), zero diagonal.
template <typename Scalar>
Matrix<Scalar> rho_prime_antisym(const Matrix<Scalar> &rho_bar, const PhaseTable &table);

ComplexMatrix build_rho_bar(const Scenario &scenario, const KernelSet &kernels);
ComplexMatrix build_rho_prime(const Scenario &scenario, const KernelSet &kernels);

template <typename Scalar>
struct SldSolution {
    Eigensystem<Scalar> eig;           ///< of rho_bar
    Matrix<Scalar> rhs_eigenbasis;     ///< V^H rhs V
    Matrix<Scalar> solution_eigenbasis;
    double weighted_sum = 0.0;         ///< sum_rs |rhs_rs|^2 / (lambda_r + lambda_s)
    double cutoff = 0.0;
    std::size_t dropped_pairs = 0;

    /// Solution in the original basis.
    Matrix<Scalar> solution() const {
        return eig.vectors * solution_eigenbasis * eig.vectors.adjoint();
    }
};

/// Solves rhs = 1/2 (rho_bar X + X rho_bar) on the support of rho_bar. The
/// equation is linear, so passing D = i rho_prime yields X = i L.
template <typename Scalar>
SldSolution<Scalar> solve_sld_system(const Matrix<Scalar> &rho_bar, const Matrix<Scalar> &rhs,
                                     double support_tolerance = 1e-12);

/// L with rho_prime = 1/2 (rho_bar L + L rho_bar); kernel components are zero.
ComplexMatrix solve_sld(const ComplexMatrix &rho_bar, const ComplexMatrix &rho_prime,
                        double support_tolerance = 1e-12);

/// ||P (rhs - 1/2(rho_bar X + X rho_bar)) P||_F / ||rhs||_F, where P projects
/// onto the eigenvectors of rho_bar above the solve's cutoff (0 when rhs = 0).
template <typename Scalar>
double sld_relative_residual(const Matrix<Scalar> &rho_bar, const Matrix<Scalar> &rhs,
                             const SldSolution<Scalar> &solution);

/// Bound for a joint input density (real or complex).
template <typename Scalar>
QavarResult qavar_for_density(const Matrix<Scalar> &rho_in, const KernelSet &kernels,
                              const JointSpace &space, const QavarOptions &options = {});

QavarResult qavar(const Scenario &scenario, const QavarOptions &options = {});

/// sigma2_LO - Tr(L rho_prime)/omega0^2 + Tr(L^2 rho_bar)/(2 omega0^2).
double cost_functional(const ComplexMatrix &rho_in, const ComplexMatrix &L, const Scenario &scenario);

struct McEstimate {
    ComplexMatrix rho_bar;
    ComplexMatrix rho_prime;
    RealMatrix rho_bar_se_re, rho_bar_se_im;
    RealMatrix rho_prime_se_re, rho_prime_se_im;
    std::size_t n_samples = 0;
};

/// Sample averages of D(theta) rho_in D(theta)^H and w D(theta) rho_in D(theta)^H
/// with exact joint draws of (theta, w). Samples are split into fixed chunks
/// with their own streams, so the result does not depend on `threads`.
McEstimate mc_oracle(const Scenario &scenario, std::size_t n_samples, std::uint64_t seed,
                     int threads = 1);

} // namespace qavar
