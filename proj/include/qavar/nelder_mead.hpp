// Derivative-free simplex minimisation (Nelder-Mead) on R^n.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace qavar {

struct SimplexOptions {
    double initial_step = 0.3;
    double f_tolerance = 1e-8;  ///< relative spread of simplex values
    double x_tolerance = 1e-7;  ///< largest vertex distance from the best vertex
    int max_iter = 200;
};

struct SimplexResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> history; ///< best value after each iteration
};

template <typename Objective>
SimplexResult nelder_mead(Objective &&f, const Eigen::VectorXd &x0, const SimplexOptions &opt = {}) {
    const Eigen::Index n = x0.size();
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> vals(static_cast<std::size_t>(n + 1));
    SimplexResult out;
    auto eval = [&](const Eigen::VectorXd &x) {
        ++out.evaluations;
        return f(x);
    };
    for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += opt.initial_step;
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(pts.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<Eigen::VectorXd> p2;
        std::vector<double> v2;
        for (auto i : order) {
            p2.push_back(pts[i]);
            v2.push_back(vals[i]);
        }
        pts.swap(p2);
        vals.swap(v2);
    };

    sort_simplex();
    for (out.iterations = 0; out.iterations < opt.max_iter;) {
        const double spread = vals.back() - vals.front();
        double diameter = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            diameter = std::max(diameter, (pts[i] - pts[0]).lpNorm<Eigen::Infinity>());
        const double scale = std::max(std::abs(vals.front()), std::numeric_limits<double>::min());
        if (spread <= opt.f_tolerance * scale && diameter <= opt.x_tolerance) {
            out.converged = true;
            break;
        }
        if (spread == 0.0 && diameter <= opt.x_tolerance) {
            out.converged = true;
            break;
        }
        ++out.iterations;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
        centroid /= static_cast<double>(n);
        const Eigen::VectorXd &worst = pts.back();

        const Eigen::VectorXd xr = centroid + (centroid - worst);
        const double fr = eval(xr);
        if (fr < vals.front()) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst);
            const double fe = eval(xe);
            if (fe < fr) {
                pts.back() = xe;
                vals.back() = fe;
            } else {
                pts.back() = xr;
                vals.back() = fr;
            }
        } else if (fr < vals[vals.size() - 2]) {
            pts.back() = xr;
            vals.back() = fr;
        } else {
            const bool outside = fr < vals.back();
            const Eigen::VectorXd xc =
                outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                        : Eigen::VectorXd(centroid + 0.5 * (worst - centroid));
            const double fc = eval(xc);
            if (fc < (outside ? fr : vals.back())) {
                pts.back() = xc;
                vals.back() = fc;
            } else {
                for (std::size_t i = 1; i < pts.size(); ++i) {
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
                    vals[i] = eval(pts[i]);
                }
            }
        }
        sort_simplex();
        out.history.push_back(vals.front());
    }
    out.x = pts.front();
    out.value = vals.front();
    return out;
}

} // namespace qavar
