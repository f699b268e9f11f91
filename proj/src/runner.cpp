#include "qavar/runner.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "qavar/parallel.hpp"

namespace qavar {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

ProbeStrategy strategy_for(const RunConfig &c) {
    const ProbeSpec &p = c.probe;
    switch (p.kind) {
    case ProbeKind::plus:
        return FixedProbe{coherent_spin_state(c.n_atoms, M_PI / 2.0)};
    case ProbeKind::ghz:
        return FixedProbe{ghz_step_state(c.n_atoms)};
    case ProbeKind::amplitudes:
        return FixedProbe{SymmetricState::normalized(p.amplitudes)};
    case ProbeKind::optimize_product: {
        ProductSearch s;
        s.family = p.family;
        s.tolerance = c.tolerance;
        s.max_iter = p.max_iter;
        s.n_starts = p.n_starts;
        s.seed = c.seed;
        return s;
    }
    case ProbeKind::optimize_joint: {
        JointSearch s;
        s.tolerance = c.tolerance;
        s.max_iter = p.max_iter;
        s.n_starts = p.n_starts;
        s.seed = c.seed;
        return s;
    }
    }
    throw DomainError("unknown probe kind");
}

InterrogationOptions interrogation_for(const RunConfig &c) {
    InterrogationOptions o;
    o.k_max = c.k_max;
    o.dimension_cap = c.dimension_cap;
    return o;
}

// RFC 4180 row; fields never contain commas or quotes except joined lists.
class Csv {
public:
    std::ostringstream out;

    void row(std::initializer_list<std::string> fields) {
        bool first = true;
        for (const auto &f : fields) {
            if (!first) out << ',';
            first = false;
            const bool quote = f.find_first_of(",\"\n") != std::string::npos;
            if (quote) {
                out << '"';
                for (char ch : f) out << (ch == '"' ? "\"\"" : std::string(1, ch));
                out << '"';
            } else {
                out << f;
            }
        }
        out << "\r\n";
    }
};

std::string joined(const ComplexVector &v, bool imaginary) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        s += format_number(imaginary ? v(i).imag() : v(i).real());
    }
    return s;
}

struct BoundRow {
    bool skipped = false;
    std::string note;
    double sigma2_lo = 0.0;
    OptimizeReport report;
};

} // namespace

RunOutcome run(const RunConfig &c, unsigned threads) {
    c.noise.validate();
    RunOutcome outcome;
    Csv csv;
    csv.out << "# qavar " << kVersion << "\r\n";
    csv.out << "# config_hash fnv1a64:" << hex64(config_hash(c)) << "\r\n";
    csv.out << "# seed " << c.seed << "\r\n";
    csv.out << "# mode " << to_string(c.mode) << "\r\n";
    const std::string seed = std::to_string(c.seed);
    const double w0 = c.noise.omega0;
    std::size_t skipped = 0;

    switch (c.mode) {
    case RunMode::lo_avar: {
        csv.row({"tau", "k", "T", "seed", "sigma2_lo"});
        for (double tau : c.taus) {
            const double s = free_lo_avar(c.noise, tau);
            csv.row({format_number(tau), "1", format_number(tau), seed, format_number(s)});
            outcome.summary.push_back("tau=" + format_number(tau) + " sigma2_lo=" + format_number(s));
        }
        break;
    }
    case RunMode::bound:
    case RunMode::optimize: {
        const bool detail = c.mode == RunMode::optimize;
        const ProbeStrategy strategy = strategy_for(c);
        const InterrogationOptions opts = interrogation_for(c);
        std::vector<BoundRow> rows(c.taus.size());
        parallel_for(c.taus.size(), threads, [&](std::size_t i) {
            rows[i].sigma2_lo = free_lo_avar(c.noise, c.taus[i]);
            try {
                rows[i].report = optimize_interrogation(c.noise, c.n_atoms, c.taus[i], strategy, opts).best;
            } catch (const ResourceError &e) {
                rows[i].skipped = true;
                rows[i].note = "skipped: k=" + std::to_string(e.offending_k()) + " exceeds dimension cap";
            }
        });
        if (detail) {
            csv.row({"tau", "k_opt", "T_opt", "seed", "sigma2_lo", "sigma2_q", "c_running", "iterations",
                     "converged", "ghz_overlap", "joint", "amplitudes_re", "amplitudes_im", "status"});
        } else {
            csv.row({"tau", "k_opt", "T_opt", "seed", "sigma2_lo", "sigma2_q", "c_running", "status"});
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double tau = c.taus[i];
            const BoundRow &r = rows[i];
            const OptimizeReport &rep = r.report;
            if (r.skipped) ++skipped;
            const std::string k = r.skipped ? "" : std::to_string(rep.best_k);
            const std::string T = r.skipped ? "" : format_number(rep.best_T);
            const double s = r.skipped ? std::nan("") : rep.sigma2_q;
            const std::string status = r.skipped ? r.note : "ok";
            const std::string cval = format_number(s * w0 * w0 * tau);
            if (detail) {
                csv.row({format_number(tau), k, T, seed, format_number(r.sigma2_lo), format_number(s), cval,
                         r.skipped ? "" : std::to_string(rep.iterations),
                         r.skipped ? "" : (rep.converged ? "true" : "false"), format_number(rep.ghz_overlap),
                         rep.joint ? "true" : "false", joined(rep.best_state, false),
                         joined(rep.best_state, true), status});
            } else {
                csv.row({format_number(tau), k, T, seed, format_number(r.sigma2_lo), format_number(s), cval, status});
            }
            outcome.summary.push_back("tau=" + format_number(tau) +
                                      (r.skipped ? " " + r.note
                                                 : " k=" + k + " sigma2_q=" + format_number(s) + " c=" + cval));
        }
        break;
    }
    case RunMode::simulate: {
        SimConfig sim{c.noise, c.n_atoms, c.sim.T, c.sim.n_steps, c.sim.servo, c.seed};
        BoundCheckOptions opts{c.sim.n_runs, c.sim.overlapping, threads};
        csv.row({"tau", "k", "T", "seed", "avar", "stderr", "n_pairs", "n_runs"});
        for (const auto &e : ensemble_avar(sim, c.taus, c.seed, opts)) {
            csv.row({format_number(e.tau), std::to_string(e.k_steps), format_number(c.sim.T), seed,
                     format_number(e.avar), format_number(e.stderr_), std::to_string(e.n_pairs),
                     std::to_string(e.n_runs)});
            outcome.summary.push_back("tau=" + format_number(e.tau) + " avar=" + format_number(e.avar) +
                                      " +- " + format_number(e.stderr_));
        }
        break;
    }
    case RunMode::bound_check: {
        SimConfig sim{c.noise, c.n_atoms, c.sim.T, c.sim.n_steps, c.sim.servo, c.seed};
        BoundCheckOptions opts{c.sim.n_runs, c.sim.overlapping, threads};
        const BoundReference ref{c.noise, strategy_for(c), interrogation_for(c), c.long_term_c};
        csv.row({"tau", "k", "T", "seed", "sim_avar", "sim_stderr", "n_pairs", "sigma2_q", "bound_k", "bound_T",
                 "violation", "status"});
        for (const auto &r : bound_check(sim, ref, c.taus, c.seed, opts)) {
            if (r.skipped) ++skipped;
            csv.row({format_number(r.tau), std::to_string(r.k_steps), format_number(c.sim.T), seed,
                     format_number(r.sim_avar), format_number(r.sim_stderr), std::to_string(r.n_pairs),
                     format_number(r.sigma2_q), r.skipped || r.extrapolated ? "" : std::to_string(r.bound_k),
                     r.skipped ? "" : format_number(r.bound_T), r.violation ? "true" : "false",
                     r.skipped ? "skipped: bound exceeds dimension cap" : (r.extrapolated ? "ok (c/tau)" : "ok")});
            outcome.summary.push_back("tau=" + format_number(r.tau) + " sim=" + format_number(r.sim_avar) +
                                      " +- " + format_number(r.sim_stderr) + " bound=" + format_number(r.sigma2_q) +
                                      (r.violation ? " VIOLATION" : ""));
        }
        break;
    }
    }
    outcome.csv = csv.out.str();
    if (skipped == c.taus.size() && skipped > 0) outcome.exit_code = exit_skipped;
    return outcome;
}

} // namespace qavar
