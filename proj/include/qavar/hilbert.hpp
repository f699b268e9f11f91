// Symmetric-subspace states of N two-level atoms, multi-index bookkeeping over
// K interrogation steps, and the Hermitian eigensolver used by the bound.
//
// Basis convention: |n> is the symmetric state with n excitations, and the
// joint basis |n_1 ... n_K> is ordered with n_1 as the most significant digit
// in base N+1, i.e. the order produced by nested Kronecker products.
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "qavar/types.hpp"

namespace qavar {

/// Joint space of K interrogation steps, each an (N+1)-level symmetric subspace.
struct JointSpace {
    int n_atoms = 1;
    int steps = 1;

    int levels() const noexcept { return n_atoms + 1; }
    /// (N+1)^K; throws DomainError when it does not fit in an Eigen::Index.
    std::size_t dim() const;
};

std::size_t joint_dim(int n_atoms, int steps);

/// Base-(N+1) positional code of (n_1..n_K), n_1 most significant.
std::size_t to_linear(std::span<const int> entries, int n_atoms);
std::vector<int> from_linear(std::size_t index, int n_atoms, int steps);

/// Pure state on the (N+1)-dimensional symmetric subspace.
class SymmetricState {
public:
    /// Requires sum |a_n|^2 = 1 within 1e-12.
    static SymmetricState from_amplitudes(const ComplexVector &amplitudes);
    /// Rescales a nonzero vector to unit norm.
    static SymmetricState normalized(const ComplexVector &amplitudes);

    int n_atoms() const noexcept { return static_cast<int>(amplitudes_.size()) - 1; }
    const ComplexVector &amplitudes() const noexcept { return amplitudes_; }
    ComplexMatrix density() const { return amplitudes_ * amplitudes_.adjoint(); }

private:
    explicit SymmetricState(ComplexVector a) : amplitudes_(std::move(a)) {}
    ComplexVector amplitudes_;
};

/// (|0> + |N>)/sqrt(2); for N = 2 this is the Bell state (|00> + |11>)/sqrt(2).
SymmetricState ghz_step_state(int n_atoms);

/// All N atoms in the same single-atom state cos(theta/2)|g> + e^{i phi} sin(theta/2)|e>.
SymmetricState coherent_spin_state(int n_atoms, double theta, double phi = 0.0);

/// Excitation-number eigenstate |n>.
SymmetricState number_state(int n_atoms, int n);

/// K-fold tensor power of a per-step density.
template <typename Scalar>
Matrix<Scalar> product_density(const Matrix<Scalar> &rho0, int K);

ComplexMatrix product_density(const SymmetricState &state, int K);

/// K-fold tensor power of a per-step pure state.
template <typename Scalar>
Vector<Scalar> product_state(const Vector<Scalar> &psi, int K);

/// Reduced density of one step (0-based) obtained by tracing out the others.
template <typename Scalar>
Matrix<Scalar> reduced_step_density(const Matrix<Scalar> &rho, const JointSpace &space, int step);

/// Throws DomainError unless rho is Hermitian (1e-12), trace one (1e-10) and
/// has no eigenvalue below -1e-10.
template <typename Scalar>
void validate_density(const Matrix<Scalar> &rho);

template <typename Scalar>
struct Eigensystem {
    RealVector values;      ///< ascending
    Matrix<Scalar> vectors; ///< orthonormal columns
};

/// Eigendecomposition of (A + A^H)/2. Throws NumericalError on failure.
template <typename Scalar>
Eigensystem<Scalar> eigh(const Matrix<Scalar> &A);

/// True when eigh and lowest_eigenpair run on LAPACK (built with it and the
/// BLAS passed a one-time accuracy check); otherwise Eigen is used.
bool lapack_eigensolver_active();

/// Smallest eigenvalue of (A + A^H)/2 and a unit eigenvector for it.
template <typename Scalar>
std::pair<double, Vector<Scalar>> lowest_eigenpair(const Matrix<Scalar> &A);

} // namespace qavar
