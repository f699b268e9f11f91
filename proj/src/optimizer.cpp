#include "qavar/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qavar/errors.hpp"
#include "qavar/nelder_mead.hpp"
#include "qavar/random.hpp"

namespace qavar {

BoundEvaluator::BoundEvaluator(const KernelSet &kernels, const JointSpace &space,
                               double support_tolerance)
    : kernels_(kernels), space_(space), support_tolerance_(support_tolerance) {
    const PhaseTable table(kernels, space);
    decoherence_ = table.decoherence_matrix();
    drift_ = table.drift_matrix();
}

BoundEvaluator::Evaluation BoundEvaluator::evaluate(const RealVector &psi, bool want_strategy) const {
    if (psi.size() != decoherence_.rows()) throw DomainError("BoundEvaluator: state has wrong size");
    const RealVector unit = psi / psi.norm();
    const RealMatrix rho_bar = (unit * unit.transpose()).cwiseProduct(decoherence_);
    const RealMatrix D = rho_bar.cwiseProduct(drift_);
    const auto sol = solve_sld_system<double>(rho_bar, D, support_tolerance_);
    Evaluation out;
    out.correction = sol.weighted_sum / (kernels_.omega0 * kernels_.omega0);
    out.sigma2_q = kernels_.sigma2_lo - out.correction;
    if (want_strategy) out.strategy = sol.solution();
    return out;
}

RealMatrix BoundEvaluator::cost_operator(const RealMatrix &strategy) const {
    if (strategy.rows() != decoherence_.rows() || strategy.cols() != decoherence_.cols()) {
        throw DomainError("cost_operator: strategy has wrong size");
    }
    const double w2 = kernels_.omega0 * kernels_.omega0;
    RealMatrix square = strategy * strategy;
    RealMatrix A = (-0.5 / w2) * square - strategy.cwiseProduct(drift_) / w2;
    A = A.cwiseProduct(decoherence_);
    return (A + A.transpose()) / 2.0;
}

ComplexMatrix cost_operator(const ComplexMatrix &L, const KernelSet &kernels, const JointSpace &space) {
    const PhaseTable table(kernels, space);
    if (L.rows() != table.dim() || L.cols() != table.dim()) {
        throw DomainError("cost_operator: L has the wrong dimension");
    }
    const double w2 = kernels.omega0 * kernels.omega0;
    const ComplexMatrix X = Complex(0.0, 1.0) * L;
    const RealMatrix M = table.decoherence_matrix();
    const RealMatrix Q = table.drift_matrix();
    ComplexMatrix A = (-0.5 / w2) * (X * X) - X.cwiseProduct(Q.cast<Complex>()) / w2;
    A = A.cwiseProduct(M.cast<Complex>());
    return (A + A.adjoint()) / 2.0;
}

namespace {

int family_dimension(ProbeFamily family, int n_atoms) {
    return family == ProbeFamily::coherent ? 1 : n_atoms;
}

// Inverse of family_amplitudes for nonnegative unit moduli.
Eigen::VectorXd family_angles(ProbeFamily family, int n_atoms, const RealVector &moduli) {
    RealVector a = moduli.cwiseAbs();
    a /= a.norm();
    if (family == ProbeFamily::coherent) {
        Eigen::VectorXd x(1);
        x(0) = 2.0 * std::acos(std::clamp(std::pow(a(0), 1.0 / n_atoms), 0.0, 1.0));
        return x;
    }
    Eigen::VectorXd x(n_atoms);
    for (int i = 0; i < n_atoms; ++i) x(i) = std::atan2(a.tail(n_atoms - i).norm(), a(i));
    return x;
}

Eigen::VectorXd random_angles(ProbeFamily family, int n_atoms, Rng &rng) {
    std::normal_distribution<double> normal;
    if (family == ProbeFamily::coherent) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::VectorXd x(1);
        x(0) = std::acos(u(rng));
        return x;
    }
    RealVector moduli(n_atoms + 1);
    for (int n = 0; n <= n_atoms; ++n) moduli(n) = std::abs(Complex(normal(rng), normal(rng)));
    return family_angles(family, n_atoms, moduli);
}

// Overlap maximised over per-level phases.
double gauge_overlap(const ComplexVector &a, const ComplexVector &b) {
    const double s = a.cwiseAbs().dot(b.cwiseAbs());
    return s * s;
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) { return splitmix64(seed ^ splitmix64(salt)); }

} // namespace

RealVector family_amplitudes(ProbeFamily family, int n_atoms, const Eigen::VectorXd &angles) {
    if (angles.size() != family_dimension(family, n_atoms)) {
        throw DomainError("family_amplitudes: wrong number of angles");
    }
    RealVector a(n_atoms + 1);
    if (family == ProbeFamily::coherent) {
        const double c = std::abs(std::cos(angles(0) / 2.0));
        const double s = std::abs(std::sin(angles(0) / 2.0));
        for (int n = 0; n <= n_atoms; ++n) {
            const double binom = std::exp(std::lgamma(n_atoms + 1.0) - std::lgamma(n + 1.0) -
                                          std::lgamma(n_atoms - n + 1.0));
            a(n) = std::sqrt(binom) * std::pow(c, n_atoms - n) * std::pow(s, n);
        }
    } else {
        double tail = 1.0;
        for (int i = 0; i < n_atoms; ++i) {
            a(i) = tail * std::abs(std::cos(angles(i)));
            tail *= std::abs(std::sin(angles(i)));
        }
        a(n_atoms) = tail;
    }
    return a / a.norm();
}

OptimizeReport optimize_product_state(const NoiseParams &noise, int n_atoms, int k, double T,
                                      const ProductSearch &search) {
    if (search.n_starts < 0) throw DomainError("n_starts must be >= 0");
    if (search.n_starts == 0 && search.warm_starts.empty()) {
        throw DomainError("product search needs at least one start");
    }
    const KernelSet kernels = make_kernels(noise, T, k);
    const JointSpace space{n_atoms, 2 * k - 1};
    const BoundEvaluator evaluator(kernels, space, search.support_tolerance);
    const double w2 = noise.omega0 * noise.omega0;

    auto objective = [&](const Eigen::VectorXd &x) {
        const RealVector psi0 = family_amplitudes(search.family, n_atoms, x);
        return evaluator.sigma2_q(product_state<double>(psi0, space.steps)) * w2;
    };

    std::vector<std::pair<Eigen::VectorXd, double>> starts;
    for (const auto &w : search.warm_starts) {
        if (w.size() != n_atoms + 1) throw DomainError("warm start has wrong size");
        starts.emplace_back(family_angles(search.family, n_atoms, w), 0.1);
    }
    Rng rng = make_stream(search.seed, 0x70726f64ULL);
    for (int s = 0; s < search.n_starts; ++s) {
        starts.emplace_back(random_angles(search.family, n_atoms, rng), 0.3);
    }

    OptimizeReport report;
    report.best_k = k;
    report.best_T = T;
    report.sigma2_lo = kernels.sigma2_lo;
    std::vector<std::pair<RealVector, double>> optima;
    SimplexResult best;
    for (const auto &[x0, step] : starts) {
        SimplexOptions opt;
        opt.initial_step = step;
        opt.f_tolerance = search.tolerance;
        opt.x_tolerance = std::max(1e-6, std::sqrt(search.tolerance));
        opt.max_iter = search.max_iter;
        SimplexResult r = nelder_mead(objective, x0, opt);
        const RealVector moduli = family_amplitudes(search.family, n_atoms, r.x);
        const bool seen = std::any_of(optima.begin(), optima.end(), [&](const auto &o) {
            return (o.first - moduli).norm() < 1e-3;
        });
        if (!seen) optima.emplace_back(moduli, r.value);
        if (r.value < best.value) best = std::move(r);
    }
    std::sort(optima.begin(), optima.end(), [](const auto &a, const auto &b) { return a.second < b.second; });
    for (auto &o : optima) report.local_optima.push_back(o.first);

    const RealVector psi0 = family_amplitudes(search.family, n_atoms, best.x);
    report.best_state = psi0.cast<Complex>();
    report.sigma2_q = best.value / w2;
    report.iterations = best.iterations;
    report.converged = best.converged;
    for (double h : best.history) report.history.push_back(h / w2);
    report.ghz_overlap = gauge_overlap(report.best_state, ghz_step_state(n_atoms).amplitudes());
    return report;
}

OptimizeReport optimize_joint_state(const NoiseParams &noise, int n_atoms, int k, double T,
                                    const JointSearch &search) {
    if (search.n_starts < 1) throw DomainError("n_starts must be >= 1");
    if (search.max_iter < 1) throw DomainError("max_iter must be >= 1");
    const KernelSet kernels = make_kernels(noise, T, k);
    const JointSpace space{n_atoms, 2 * k - 1};
    const auto dim = static_cast<Eigen::Index>(space.dim());
    const BoundEvaluator evaluator(kernels, space, search.support_tolerance);

    auto settled = [&](const std::vector<double> &h) {
        if (h.size() < 3) return false;
        auto small = [&](double now, double before) {
            return std::abs(now - before) <= search.tolerance * std::abs(before);
        };
        const std::size_t n = h.size();
        return small(h[n - 1], h[n - 2]) && small(h[n - 2], h[n - 3]);
    };

    OptimizeReport report;
    report.joint = true;
    report.best_k = k;
    report.best_T = T;
    report.sigma2_lo = kernels.sigma2_lo;
    for (int s = 0; s < search.n_starts; ++s) {
        Rng rng = make_stream(search.seed, static_cast<std::uint64_t>(s));
        std::normal_distribution<double> normal;
        RealVector psi(dim);
        for (Eigen::Index i = 0; i < dim; ++i) psi(i) = normal(rng);
        psi.normalize();

        std::vector<double> history;
        RealVector best_psi = psi;
        double best_value = std::numeric_limits<double>::infinity();
        bool converged = false;
        int iterations = 0;
        while (iterations < search.max_iter) {
            const auto eval = evaluator.evaluate(psi, true);
            history.push_back(eval.sigma2_q);
            ++iterations;
            if (eval.sigma2_q < best_value) {
                best_value = eval.sigma2_q;
                best_psi = psi;
            }
            if (settled(history)) {
                converged = true;
                break;
            }
            psi = lowest_eigenpair<double>(evaluator.cost_operator(eval.strategy)).second;
            psi.normalize();
        }
        if (best_value < report.sigma2_q || std::isnan(report.sigma2_q)) {
            report.sigma2_q = best_value;
            report.best_state = best_psi.cast<Complex>();
            report.history = std::move(history);
            report.iterations = iterations;
            report.converged = converged;
        }
    }
    const ComplexVector ghz = product_state<Complex>(ghz_step_state(n_atoms).amplitudes(), space.steps);
    report.ghz_overlap = gauge_overlap(report.best_state, ghz);
    return report;
}

OptimizeReport evaluate_fixed_probe(const NoiseParams &noise, const SymmetricState &state, int k,
                                    double T, double support_tolerance) {
    const Scenario scenario = Scenario::product(noise, state, k, T);
    QavarOptions opt;
    opt.support_tolerance = support_tolerance;
    const QavarResult r = qavar(scenario, opt);
    OptimizeReport report;
    report.best_state = state.amplitudes();
    report.best_k = k;
    report.best_T = T;
    report.sigma2_q = r.sigma2_q;
    report.sigma2_lo = r.sigma2_lo;
    report.converged = true;
    report.history = {r.sigma2_q};
    report.ghz_overlap = gauge_overlap(state.amplitudes(), ghz_step_state(state.n_atoms()).amplitudes());
    return report;
}

std::optional<int> first_k_over_cap(int n_atoms, int k_max, std::size_t dimension_cap) {
    for (int k = 1; k <= k_max; ++k) {
        std::size_t dim = 0;
        try {
            dim = joint_dim(n_atoms, 2 * k - 1);
        } catch (const DomainError &) {
            return k;
        }
        if (dim > dimension_cap) return k;
    }
    return std::nullopt;
}

InterrogationReport optimize_interrogation(const NoiseParams &noise, int n_atoms, double tau,
                                           const ProbeStrategy &strategy,
                                           const InterrogationOptions &options) {
    noise.validate();
    if (!(tau > 0.0)) throw DomainError("tau must be > 0");
    if (options.k_max < 1) throw DomainError("k_max must be >= 1");
    if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
    if (const auto bad = first_k_over_cap(n_atoms, options.k_max, options.dimension_cap)) {
        throw ResourceError("k = " + std::to_string(*bad) + " needs joint dimension (N+1)^" +
                                std::to_string(2 * *bad - 1) + " above the cap of " +
                                std::to_string(options.dimension_cap),
                            *bad);
    }

    InterrogationReport out;
    std::vector<RealVector> carried;
    for (int k = 1; k <= options.k_max; ++k) {
        const double T = tau / k;
        OptimizeReport r;
        if (const auto *fixed = std::get_if<FixedProbe>(&strategy)) {
            r = evaluate_fixed_probe(noise, fixed->state, k, T);
        } else if (const auto *product = std::get_if<ProductSearch>(&strategy)) {
            ProductSearch search = *product;
            search.seed = sub_seed(product->seed, static_cast<std::uint64_t>(k));
            if (options.continuation && !carried.empty()) {
                // Large problems restart only from the best optimum of the previous k.
                const bool large = joint_dim(n_atoms, 2 * k - 1) > options.restart_dim_limit;
                search.warm_starts.insert(search.warm_starts.end(), carried.begin(),
                                          large ? carried.begin() + 1 : carried.end());
                if (large) search.n_starts = 0;
            }
            r = optimize_product_state(noise, n_atoms, k, T, search);
            carried = r.local_optima;
        } else {
            JointSearch search = std::get<JointSearch>(strategy);
            search.seed = sub_seed(search.seed, static_cast<std::uint64_t>(k));
            r = optimize_joint_state(noise, n_atoms, k, T, search);
        }
        out.per_k.push_back({k, T, r.sigma2_q});
        if (k == 1 || r.sigma2_q < out.best.sigma2_q) out.best = std::move(r);
    }
    return out;
}

LongTermFit extrapolate_long_term(std::vector<BoundPoint> points, double omega0,
                                  const PlateauOptions &options) {
    if (!(omega0 > 0.0)) throw DomainError("omega0 must be > 0");
    if (options.points < 3) throw DomainError("plateau window must hold at least 3 points");
    for (const auto &p : points) {
        if (!(p.tau > 0.0)) throw DomainError("extrapolate_long_term: tau must be > 0");
    }
    std::erase_if(points, [](const BoundPoint &p) { return p.capped; });
    if (points.size() < 3) throw DomainError("extrapolate_long_term: need at least 3 uncapped points");
    std::sort(points.begin(), points.end(), [](const auto &a, const auto &b) { return a.tau < b.tau; });
    const std::size_t m = std::min(points.size(), static_cast<std::size_t>(options.points));
    LongTermFit fit;
    for (std::size_t i = points.size() - m; i < points.size(); ++i) {
        fit.window_tau.push_back(points[i].tau);
        fit.window_c.push_back(points[i].sigma2_q * omega0 * omega0 * points[i].tau);
    }
    const auto [lo, hi] = std::minmax_element(fit.window_c.begin(), fit.window_c.end());
    const double mean = std::accumulate(fit.window_c.begin(), fit.window_c.end(), 0.0) / static_cast<double>(m);
    fit.c = fit.window_c.back();
    fit.spread = mean != 0.0 ? (*hi - *lo) / std::abs(mean) : (*hi == *lo ? 0.0 : INFINITY);
    fit.conclusive = fit.spread <= options.flatness;
    return fit;
}

} // namespace qavar
