#include "qavar/qavar_core.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <vector>

#include "qavar/errors.hpp"
#include "qavar/random.hpp"

namespace qavar {

void Scenario::validate() const {
    noise.validate();
    if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
    if (k < 1) throw DomainError("k must be >= 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("T must be > 0");
    const auto levels = static_cast<Eigen::Index>(n_atoms + 1);
    if (const auto *p = std::get_if<ProductInput>(&input)) {
        if (p->rho0.rows() != levels || p->rho0.cols() != levels) {
            throw DomainError("product input must be (N+1)x(N+1)");
        }
        validate_density(p->rho0);
    } else {
        const auto &rho = std::get<JointInput>(input).rho;
        const auto dim = static_cast<Eigen::Index>(space().dim());
        if (rho.rows() != dim || rho.cols() != dim) {
            throw DomainError("joint input must be (N+1)^(2k-1) square");
        }
        validate_density(rho);
    }
}

ComplexMatrix Scenario::input_density() const {
    if (const auto *p = std::get_if<ProductInput>(&input)) {
        return product_density<Complex>(p->rho0, steps());
    }
    return std::get<JointInput>(input).rho;
}

Scenario Scenario::product(const NoiseParams &noise, const SymmetricState &state, int k, double T) {
    return Scenario{noise, state.n_atoms(), k, T, ProductInput{state.density()}};
}

Scenario Scenario::joint(const NoiseParams &noise, int n_atoms, const ComplexMatrix &rho, int k,
                         double T) {
    return Scenario{noise, n_atoms, k, T, JointInput{rho}};
}

PhaseTable::PhaseTable(const KernelSet &kernels, const JointSpace &space) {
    if (kernels.K != space.steps) throw DomainError("PhaseTable: kernel K does not match steps");
    const auto dim = static_cast<Eigen::Index>(space.dim());
    const int K = space.steps;
    const int d = space.levels();
    counts_.resize(K, dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
        Eigen::Index rest = a;
        for (int i = K - 1; i >= 0; --i) {
            counts_(i, a) = static_cast<double>(rest % d);
            rest /= d;
        }
    }
    weighted_ = kernels.G * counts_;
    quad_ = counts_.cwiseProduct(weighted_).colwise().sum().transpose();
    drift_ = counts_.transpose() * kernels.H;
}

RealMatrix PhaseTable::decoherence_matrix() const {
    RealMatrix exponent = counts_.transpose() * weighted_;
    exponent.colwise() -= 0.5 * quad_;
    exponent.rowwise() -= 0.5 * quad_.transpose();
    return exponent.cwiseMin(0.0).array().exp().matrix();
}

RealMatrix PhaseTable::drift_matrix() const {
    const Eigen::Index n = dim();
    return drift_.replicate(1, n) - drift_.transpose().replicate(n, 1);
}

template <typename Scalar>
Matrix<Scalar> build_rho_bar(const Matrix<Scalar> &rho_in, const PhaseTable &table) {
    const Eigen::Index dim = table.dim();
    if (rho_in.rows() != dim || rho_in.cols() != dim) throw DomainError("build_rho_bar: size mismatch");
    Matrix<Scalar> out = rho_in;
    for (Eigen::Index b = 0; b < dim; ++b) {
        for (Eigen::Index a = 0; a < dim; ++a) {
            if (a == b || out(a, b) == Scalar(0)) continue;
            out(a, b) *= std::exp(-std::max(0.0, table.decay_exponent(a, b)));
        }
    }
    return out;
}

template <typename Scalar>
Matrix<Scalar> rho_prime_antisym(const Matrix<Scalar> &rho_bar, const PhaseTable &table) {
    const Eigen::Index dim = table.dim();
    if (rho_bar.rows() != dim || rho_bar.cols() != dim) {
        throw DomainError("rho_prime_antisym: size mismatch");
    }
    Matrix<Scalar> out(dim, dim);
    for (Eigen::Index b = 0; b < dim; ++b)
        for (Eigen::Index a = 0; a < dim; ++a) out(a, b) = rho_bar(a, b) * table.drift(a, b);
    return out;
}

ComplexMatrix build_rho_bar(const Scenario &scenario, const KernelSet &kernels) {
    scenario.validate();
    const PhaseTable table(kernels, scenario.space());
    return build_rho_bar<Complex>(scenario.input_density(), table);
}

ComplexMatrix build_rho_prime(const Scenario &scenario, const KernelSet &kernels) {
    scenario.validate();
    const PhaseTable table(kernels, scenario.space());
    const ComplexMatrix rho_bar = build_rho_bar<Complex>(scenario.input_density(), table);
    return Complex(0.0, -1.0) * rho_prime_antisym<Complex>(rho_bar, table);
}

template <typename Scalar>
SldSolution<Scalar> solve_sld_system(const Matrix<Scalar> &rho_bar, const Matrix<Scalar> &rhs,
                                     double support_tolerance) {
    if (rho_bar.rows() != rhs.rows() || rho_bar.cols() != rhs.cols()) {
        throw DomainError("solve_sld: size mismatch");
    }
    if (!(support_tolerance >= 0.0)) throw DomainError("support tolerance must be >= 0");
    SldSolution<Scalar> out;
    out.eig = eigh(rho_bar);
    const RealVector &lambda = out.eig.values;
    const auto &V = out.eig.vectors;
    out.rhs_eigenbasis = V.adjoint() * rhs * V;
    out.cutoff = support_tolerance * std::max(0.0, lambda.maxCoeff());

    const Eigen::Index n = lambda.size();
    out.solution_eigenbasis.resize(n, n);
    double sum = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const double den = lambda(r) + lambda(s);
            const Scalar v = out.rhs_eigenbasis(r, s);
            if (den > out.cutoff) {
                out.solution_eigenbasis(r, s) = 2.0 * v / den;
                sum += std::norm(v) / den;
            } else {
                out.solution_eigenbasis(r, s) = Scalar(0);
                ++out.dropped_pairs;
            }
        }
    }
    out.weighted_sum = sum;
    return out;
}

ComplexMatrix solve_sld(const ComplexMatrix &rho_bar, const ComplexMatrix &rho_prime,
                        double support_tolerance) {
    return solve_sld_system<Complex>(rho_bar, rho_prime, support_tolerance).solution();
}

template <typename Scalar>
double sld_relative_residual(const Matrix<Scalar> &rho_bar, const Matrix<Scalar> &rhs,
                             const SldSolution<Scalar> &solution) {
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return 0.0;
    const Matrix<Scalar> X = solution.solution();
    const Matrix<Scalar> residual = rhs - 0.5 * (rho_bar * X + X * rho_bar);
    std::vector<Eigen::Index> support;
    for (Eigen::Index r = 0; r < solution.eig.values.size(); ++r)
        if (solution.eig.values(r) > solution.cutoff) support.push_back(r);
    Matrix<Scalar> basis(rho_bar.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j)
        basis.col(static_cast<Eigen::Index>(j)) = solution.eig.vectors.col(support[j]);
    return (basis.adjoint() * residual * basis).norm() / rhs_norm;
}

template <typename Scalar>
QavarResult qavar_for_density(const Matrix<Scalar> &rho_in, const KernelSet &kernels,
                              const JointSpace &space, const QavarOptions &options) {
    const PhaseTable table(kernels, space);
    const Matrix<Scalar> rho_bar = build_rho_bar(rho_in, table);
    const Matrix<Scalar> D = rho_prime_antisym(rho_bar, table);
    const auto sol = solve_sld_system(rho_bar, D, options.support_tolerance);

    QavarResult out;
    const double w2 = kernels.omega0 * kernels.omega0;
    out.sigma2_lo = kernels.sigma2_lo;
    out.correction = sol.weighted_sum / w2;
    out.sigma2_q = out.sigma2_lo - out.correction;
    out.support_cutoff = sol.cutoff;
    out.dropped_pairs = sol.dropped_pairs;
    if (options.compute_strategy) {
        // X = i L
        out.L = Complex(0.0, -1.0) * sol.solution().template cast<Complex>();
    }
    return out;
}

QavarResult qavar(const Scenario &scenario, const QavarOptions &options) {
    scenario.validate();
    const KernelSet kernels = scenario.kernels();
    const ComplexMatrix rho_in = scenario.input_density();
    if (rho_in.imag().cwiseAbs().maxCoeff() == 0.0) {
        return qavar_for_density<double>(rho_in.real(), kernels, scenario.space(), options);
    }
    return qavar_for_density<Complex>(rho_in, kernels, scenario.space(), options);
}

namespace {

// Tr(A B) without forming the product.
Complex trace_of_product(const ComplexMatrix &A, const ComplexMatrix &B) {
    return A.transpose().cwiseProduct(B).sum();
}

} // namespace

double cost_functional(const ComplexMatrix &rho_in, const ComplexMatrix &L, const Scenario &scenario) {
    scenario.validate();
    const KernelSet kernels = scenario.kernels();
    const PhaseTable table(kernels, scenario.space());
    if (L.rows() != table.dim() || L.cols() != table.dim()) {
        throw DomainError("cost_functional: L has the wrong dimension");
    }
    const ComplexMatrix rho_bar = build_rho_bar<Complex>(rho_in, table);
    const ComplexMatrix rho_prime = Complex(0.0, -1.0) * rho_prime_antisym<Complex>(rho_bar, table);
    const double w2 = kernels.omega0 * kernels.omega0;
    const ComplexMatrix L2 = L * L;
    return kernels.sigma2_lo - trace_of_product(L, rho_prime).real() / w2 +
           trace_of_product(L2, rho_bar).real() / (2.0 * w2);
}

namespace {

constexpr std::size_t kMcChunk = 1 << 15;

struct McSums {
    ComplexMatrix bar, prime;
    RealMatrix bar_re2, bar_im2, prime_re2, prime_im2;

    explicit McSums(Eigen::Index n)
        : bar(ComplexMatrix::Zero(n, n)), prime(ComplexMatrix::Zero(n, n)),
          bar_re2(RealMatrix::Zero(n, n)), bar_im2(RealMatrix::Zero(n, n)),
          prime_re2(RealMatrix::Zero(n, n)), prime_im2(RealMatrix::Zero(n, n)) {}

    void merge(const McSums &o) {
        bar += o.bar;
        prime += o.prime;
        bar_re2 += o.bar_re2;
        bar_im2 += o.bar_im2;
        prime_re2 += o.prime_re2;
        prime_im2 += o.prime_im2;
    }
};

McSums mc_chunk(const ComplexMatrix &rho_in, const RealMatrix &counts, const JointSampler &sampler,
                std::size_t n, std::uint64_t seed, std::uint64_t chunk) {
    const Eigen::Index dim = rho_in.rows();
    const int K = static_cast<int>(counts.rows());
    McSums sums(dim);
    Rng rng = make_stream(seed, chunk);
    std::normal_distribution<double> normal;
    RealVector z(K + 1), draw(K + 1);
    ComplexVector u(dim);
    for (std::size_t s = 0; s < n; ++s) {
        for (int i = 0; i <= K; ++i) z(i) = normal(rng);
        sampler.transform(z, draw);
        const double w = draw(K);
        const RealVector phase = counts.transpose() * draw.head(K);
        for (Eigen::Index a = 0; a < dim; ++a) u(a) = std::polar(1.0, -phase(a));
        for (Eigen::Index b = 0; b < dim; ++b) {
            const Complex ub = std::conj(u(b));
            for (Eigen::Index a = 0; a < dim; ++a) {
                const Complex f = u(a) * ub * rho_in(a, b);
                const Complex g = w * f;
                sums.bar(a, b) += f;
                sums.prime(a, b) += g;
                sums.bar_re2(a, b) += f.real() * f.real();
                sums.bar_im2(a, b) += f.imag() * f.imag();
                sums.prime_re2(a, b) += g.real() * g.real();
                sums.prime_im2(a, b) += g.imag() * g.imag();
            }
        }
    }
    return sums;
}

RealMatrix standard_error(const RealMatrix &sum_sq, const RealMatrix &mean, double n) {
    const RealMatrix var = (sum_sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0) * (n / (n - 1.0));
    return (var / n).cwiseSqrt();
}

} // namespace

McEstimate mc_oracle(const Scenario &scenario, std::size_t n_samples, std::uint64_t seed,
                     int threads) {
    scenario.validate();
    if (n_samples < 2) throw DomainError("mc_oracle: n_samples must be >= 2");
    const KernelSet kernels = scenario.kernels();
    const JointSampler sampler(kernels);
    const PhaseTable table(kernels, scenario.space());
    const ComplexMatrix rho_in = scenario.input_density();
    const Eigen::Index dim = rho_in.rows();

    const std::size_t n_chunks = (n_samples + kMcChunk - 1) / kMcChunk;
    std::vector<McSums> partial(n_chunks, McSums(0));
    auto run_chunk = [&](std::size_t c) {
        const std::size_t begin = c * kMcChunk;
        const std::size_t n = std::min(kMcChunk, n_samples - begin);
        partial[c] = mc_chunk(rho_in, table.counts(), sampler, n, seed, c);
    };
    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, n_chunks);
    if (workers == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::future<void>> jobs;
        for (std::size_t w = 0; w < workers; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t c = w; c < n_chunks; c += workers) run_chunk(c);
            }));
        }
        for (auto &j : jobs) j.get();
    }

    McSums total(dim);
    for (const auto &p : partial) total.merge(p);
    const double n = static_cast<double>(n_samples);
    McEstimate out;
    out.n_samples = n_samples;
    out.rho_bar = total.bar / n;
    out.rho_prime = total.prime / n;
    out.rho_bar_se_re = standard_error(total.bar_re2, out.rho_bar.real(), n);
    out.rho_bar_se_im = standard_error(total.bar_im2, out.rho_bar.imag(), n);
    out.rho_prime_se_re = standard_error(total.prime_re2, out.rho_prime.real(), n);
    out.rho_prime_se_im = standard_error(total.prime_im2, out.rho_prime.imag(), n);
    return out;
}

template Matrix<double> build_rho_bar(const Matrix<double> &, const PhaseTable &);
template Matrix<Complex> build_rho_bar(const Matrix<Complex> &, const PhaseTable &);
template Matrix<double> rho_prime_antisym(const Matrix<double> &, const PhaseTable &);
template Matrix<Complex> rho_prime_antisym(const Matrix<Complex> &, const PhaseTable &);
template SldSolution<double> solve_sld_system(const Matrix<double> &, const Matrix<double> &, double);
template SldSolution<Complex> solve_sld_system(const Matrix<Complex> &, const Matrix<Complex> &, double);
template double sld_relative_residual(const Matrix<double> &, const Matrix<double> &,
                                      const SldSolution<double> &);
template double sld_relative_residual(const Matrix<Complex> &, const Matrix<Complex> &,
                                      const SldSolution<Complex> &);
template QavarResult qavar_for_density(const Matrix<double> &, const KernelSet &, const JointSpace &,
                                       const QavarOptions &);
template QavarResult qavar_for_density(const Matrix<Complex> &, const KernelSet &, const JointSpace &,
                                       const QavarOptions &);

} // namespace qavar
