#include "qavar/hilbert.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "qavar/errors.hpp"

#ifdef QAVAR_HAVE_LAPACKE
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>
#endif

namespace qavar {

std::size_t joint_dim(int n_atoms, int steps) {
    if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
    if (steps < 1) throw DomainError("steps must be >= 1");
    const auto limit = static_cast<std::size_t>(std::numeric_limits<Eigen::Index>::max());
    std::size_t dim = 1;
    for (int i = 0; i < steps; ++i) {
        if (dim > limit / static_cast<std::size_t>(n_atoms + 1)) {
            throw DomainError("joint dimension overflows");
        }
        dim *= static_cast<std::size_t>(n_atoms + 1);
    }
    return dim;
}

std::size_t JointSpace::dim() const { return joint_dim(n_atoms, steps); }

std::size_t to_linear(std::span<const int> entries, int n_atoms) {
    std::size_t index = 0;
    for (int n : entries) {
        if (n < 0 || n > n_atoms) {
            throw DomainError("multi-index entry " + std::to_string(n) + " outside 0.." +
                              std::to_string(n_atoms));
        }
        index = index * static_cast<std::size_t>(n_atoms + 1) + static_cast<std::size_t>(n);
    }
    return index;
}

std::vector<int> from_linear(std::size_t index, int n_atoms, int steps) {
    if (index >= joint_dim(n_atoms, steps)) throw DomainError("linear index out of range");
    std::vector<int> entries(static_cast<std::size_t>(steps));
    const auto base = static_cast<std::size_t>(n_atoms + 1);
    for (int i = steps - 1; i >= 0; --i) {
        entries[static_cast<std::size_t>(i)] = static_cast<int>(index % base);
        index /= base;
    }
    return entries;
}

SymmetricState SymmetricState::from_amplitudes(const ComplexVector &amplitudes) {
    if (amplitudes.size() < 2) throw DomainError("symmetric state needs N+1 >= 2 amplitudes");
    if (std::abs(amplitudes.squaredNorm() - 1.0) > 1e-12) {
        throw DomainError("symmetric state amplitudes are not normalised");
    }
    return SymmetricState(amplitudes);
}

SymmetricState SymmetricState::normalized(const ComplexVector &amplitudes) {
    if (amplitudes.size() < 2) throw DomainError("symmetric state needs N+1 >= 2 amplitudes");
    const double norm = amplitudes.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DomainError("state vector has zero norm");
    return SymmetricState(amplitudes / norm);
}

SymmetricState ghz_step_state(int n_atoms) {
    if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
    ComplexVector a = ComplexVector::Zero(n_atoms + 1);
    a(0) = a(n_atoms) = 1.0 / std::sqrt(2.0);
    return SymmetricState::normalized(a);
}

SymmetricState coherent_spin_state(int n_atoms, double theta, double phi) {
    if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
    ComplexVector a(n_atoms + 1);
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    for (int n = 0; n <= n_atoms; ++n) {
        const double binom = std::exp(std::lgamma(n_atoms + 1.0) - std::lgamma(n + 1.0) -
                                      std::lgamma(n_atoms - n + 1.0));
        a(n) = std::sqrt(binom) * std::pow(c, n_atoms - n) * std::pow(s, n) *
               std::polar(1.0, n * phi);
    }
    return SymmetricState::normalized(a);
}

SymmetricState number_state(int n_atoms, int n) {
    if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
    if (n < 0 || n > n_atoms) throw DomainError("excitation number out of range");
    ComplexVector a = ComplexVector::Zero(n_atoms + 1);
    a(n) = 1.0;
    return SymmetricState::normalized(a);
}

template <typename Scalar>
Matrix<Scalar> product_density(const Matrix<Scalar> &rho0, int K) {
    if (K < 1) throw DomainError("product_density: K must be >= 1");
    validate_density(rho0);
    Matrix<Scalar> out = rho0;
    for (int i = 1; i < K; ++i) {
        Matrix<Scalar> next(out.rows() * rho0.rows(), out.cols() * rho0.cols());
        for (Eigen::Index r = 0; r < out.rows(); ++r)
            for (Eigen::Index c = 0; c < out.cols(); ++c)
                next.block(r * rho0.rows(), c * rho0.cols(), rho0.rows(), rho0.cols()) =
                    out(r, c) * rho0;
        out.swap(next);
    }
    return out;
}

ComplexMatrix product_density(const SymmetricState &state, int K) {
    return product_density<Complex>(state.density(), K);
}

template <typename Scalar>
Vector<Scalar> product_state(const Vector<Scalar> &psi, int K) {
    if (K < 1) throw DomainError("product_state: K must be >= 1");
    Vector<Scalar> out = psi;
    for (int i = 1; i < K; ++i) {
        Vector<Scalar> next(out.size() * psi.size());
        for (Eigen::Index r = 0; r < out.size(); ++r)
            next.segment(r * psi.size(), psi.size()) = out(r) * psi;
        out.swap(next);
    }
    return out;
}

template <typename Scalar>
Matrix<Scalar> reduced_step_density(const Matrix<Scalar> &rho, const JointSpace &space, int step) {
    const auto dim = static_cast<Eigen::Index>(space.dim());
    if (rho.rows() != dim || rho.cols() != dim) throw DomainError("reduced_step_density: size mismatch");
    if (step < 0 || step >= space.steps) throw DomainError("reduced_step_density: step out of range");
    const int d = space.levels();
    // index = (outer * d + n) * inner + rest
    Eigen::Index inner = 1;
    for (int i = step + 1; i < space.steps; ++i) inner *= d;
    const Eigen::Index outer = dim / (inner * d);
    Matrix<Scalar> out = Matrix<Scalar>::Zero(d, d);
    for (Eigen::Index o = 0; o < outer; ++o)
        for (Eigen::Index r = 0; r < inner; ++r)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    out(a, b) += rho((o * d + a) * inner + r, (o * d + b) * inner + r);
    return out;
}

template <typename Scalar>
void validate_density(const Matrix<Scalar> &rho) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) throw DomainError("density must be square");
    if (!rho.allFinite()) throw DomainError("density has non-finite entries");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("density is not Hermitian");
    }
    if (std::abs(std::real(rho.trace()) - 1.0) > 1e-10) throw DomainError("density trace is not 1");
    if (eigh(rho).values.minCoeff() < -1e-10) {
        throw DomainError("density is not positive semidefinite");
    }
}

namespace {

#ifdef QAVAR_HAVE_LAPACKE
lapack_int syevd(Matrix<double> &a, RealVector &w) {
    return LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(a.rows()), a.data(),
                          static_cast<lapack_int>(a.rows()), w.data());
}

lapack_int syevd(Matrix<Complex> &a, RealVector &w) {
    return LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(a.rows()), a.data(),
                          static_cast<lapack_int>(a.rows()), w.data());
}
#endif

#ifdef QAVAR_HAVE_LAPACKE
lapack_int syevr_lowest(Matrix<double> &a, double &w, RealVector &z) {
    const auto n = static_cast<lapack_int>(a.rows());
    lapack_int found = 0;
    std::vector<lapack_int> support(2);
    return LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, a.data(), n, 0.0, 0.0, 1, 1, 0.0,
                          &found, &w, z.data(), n, support.data());
}

lapack_int syevr_lowest(Matrix<Complex> &a, double &w, ComplexVector &z) {
    const auto n = static_cast<lapack_int>(a.rows());
    lapack_int found = 0;
    std::vector<lapack_int> support(2);
    return LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, a.data(), n, 0.0, 0.0, 1, 1, 0.0,
                          &found, &w, z.data(), n, support.data());
}
#endif

} // namespace

namespace {

template <typename Scalar>
Eigensystem<Scalar> eigen_eigh(Matrix<Scalar> symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetric);
    if (es.info() != Eigen::Success) throw NumericalError("eigh: eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

#ifdef QAVAR_HAVE_LAPACKE
// Some BLAS builds pick broken kernels on some CPUs; check a mid-sized
// problem once and fall back to Eigen if the residual is off.
bool check_lapack() {
    const lapack_int n = 300;
    Matrix<double> A(n, n);
    Matrix<Complex> B(n, n);
    for (lapack_int j = 0; j < n; ++j) {
        for (lapack_int i = 0; i < n; ++i) {
            A(i, j) = std::sin(0.37 * (i + 1) * (j + 1)) + std::sin(0.37 * (j + 1) * (i + 1));
            B(i, j) = Complex(A(i, j), i == j ? 0.0 : 0.1 * (i - j));
        }
    }
    Matrix<double> V = A;
    Matrix<Complex> W = B;
    RealVector a(n), b(n);
    if (syevd(V, a) != 0 || syevd(W, b) != 0) return false;
    const double ra = (A * V - V * a.asDiagonal()).norm() / A.norm();
    const double rb = (B * W - W * b.asDiagonal()).norm() / B.norm();
    const double oa = (V.transpose() * V - Matrix<double>::Identity(n, n)).norm();
    return ra < 1e-10 && rb < 1e-10 && oa < 1e-10;
}
#endif

} // namespace

bool lapack_eigensolver_active() {
#ifdef QAVAR_HAVE_LAPACKE
    static const bool ok = check_lapack();
    return ok;
#else
    return false;
#endif
}

template <typename Scalar>
std::pair<double, Vector<Scalar>> lowest_eigenpair(const Matrix<Scalar> &A) {
    if (A.rows() != A.cols() || A.rows() == 0) throw DomainError("lowest_eigenpair: bad shape");
    if (!A.allFinite()) throw NumericalError("lowest_eigenpair: non-finite entries");
#ifdef QAVAR_HAVE_LAPACKE
    if (lapack_eigensolver_active()) {
        Matrix<Scalar> work = (A + A.adjoint()) / 2.0;
        double w = 0.0;
        Vector<Scalar> z(A.rows());
        if (syevr_lowest(work, w, z) != 0) {
            throw NumericalError("lowest_eigenpair: LAPACK eigensolver did not converge");
        }
        return {w, z};
    }
#endif
    auto es = eigh(A);
    return {es.values(0), es.vectors.col(0)};
}

template <typename Scalar>
Eigensystem<Scalar> eigh(const Matrix<Scalar> &A) {
    if (A.rows() != A.cols()) throw DomainError("eigh: matrix must be square");
    if (!A.allFinite()) throw NumericalError("eigh: non-finite entries");
    Matrix<Scalar> symmetric = (A + A.adjoint()) / 2.0;
#ifdef QAVAR_HAVE_LAPACKE
    if (lapack_eigensolver_active()) {
        Eigensystem<Scalar> out;
        out.values.resize(A.rows());
        out.vectors = std::move(symmetric);
        if (A.rows() > 0 && syevd(out.vectors, out.values) != 0) {
            throw NumericalError("eigh: LAPACK eigensolver did not converge");
        }
        return out;
    }
#endif
    return eigen_eigh(std::move(symmetric));
}

template Matrix<double> product_density(const Matrix<double> &, int);
template Matrix<Complex> product_density(const Matrix<Complex> &, int);
template Vector<double> product_state(const Vector<double> &, int);
template Vector<Complex> product_state(const Vector<Complex> &, int);
template Matrix<double> reduced_step_density(const Matrix<double> &, const JointSpace &, int);
template Matrix<Complex> reduced_step_density(const Matrix<Complex> &, const JointSpace &, int);
template void validate_density(const Matrix<double> &);
template void validate_density(const Matrix<Complex> &);
template Eigensystem<double> eigh(const Matrix<double> &);
template Eigensystem<Complex> eigh(const Matrix<Complex> &);
template std::pair<double, Vector<double>> lowest_eigenpair(const Matrix<double> &);
template std::pair<double, Vector<Complex>> lowest_eigenpair(const Matrix<Complex> &);

} // namespace qavar
