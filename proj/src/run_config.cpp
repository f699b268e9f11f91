#include "qavar/run_config.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace qavar {

using nlohmann::json;

namespace {

constexpr std::pair<RunMode, std::string_view> kModes[] = {
    {RunMode::bound, "bound"},       {RunMode::optimize, "optimize"},
    {RunMode::simulate, "simulate"}, {RunMode::lo_avar, "lo-avar"},
    {RunMode::bound_check, "bound-check"},
};

constexpr std::pair<ProbeKind, std::string_view> kProbes[] = {
    {ProbeKind::plus, "plus"},
    {ProbeKind::ghz, "ghz"},
    {ProbeKind::amplitudes, "amplitudes"},
    {ProbeKind::optimize_product, "optimize-product"},
    {ProbeKind::optimize_joint, "optimize-joint"},
};

std::string_view probe_name(ProbeKind kind) {
    for (const auto &[k, name] : kProbes) {
        if (k == kind) return name;
    }
    return "";
}

std::string join(const std::string &parent, const std::string &key) {
    return parent.empty() ? key : parent + "." + key;
}

// Collects every problem instead of stopping at the first one.
class Reader {
public:
    std::vector<ConfigIssue> issues;

    void fail(const std::string &path, const std::string &message) { issues.push_back({path, message}); }

    // Rejects keys outside `allowed`; returns false if `node` is not an object.
    bool object(const json &node, const std::string &path, std::initializer_list<std::string_view> allowed) {
        if (!node.is_object()) {
            fail(path.empty() ? "<root>" : path, "must be an object");
            return false;
        }
        for (const auto &item : node.items()) {
            bool known = false;
            for (auto a : allowed) known = known || item.key() == a;
            if (!known) fail(join(path, item.key()), "unknown key");
        }
        return true;
    }

    std::optional<double> number(const json &obj, const std::string &key, const std::string &path) {
        if (!obj.contains(key)) return std::nullopt;
        const json &v = obj.at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            fail(join(path, key), "must be a finite number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<long long> integer(const json &obj, const std::string &key, const std::string &path) {
        if (!obj.contains(key)) return std::nullopt;
        const json &v = obj.at(key);
        if (!v.is_number_integer()) {
            fail(join(path, key), "must be an integer");
            return std::nullopt;
        }
        return v.get<long long>();
    }

    std::optional<std::string> string(const json &obj, const std::string &key, const std::string &path) {
        if (!obj.contains(key)) return std::nullopt;
        const json &v = obj.at(key);
        if (!v.is_string()) {
            fail(join(path, key), "must be a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<bool> boolean(const json &obj, const std::string &key, const std::string &path) {
        if (!obj.contains(key)) return std::nullopt;
        const json &v = obj.at(key);
        if (!v.is_boolean()) {
            fail(join(path, key), "must be true or false");
            return std::nullopt;
        }
        return v.get<bool>();
    }

    void positive_int(const json &obj, const std::string &key, const std::string &path, int &out, int min) {
        if (auto v = integer(obj, key, path)) {
            if (*v < min || *v > std::numeric_limits<int>::max()) {
                fail(join(path, key), "must be >= " + std::to_string(min));
            } else {
                out = static_cast<int>(*v);
            }
        }
    }
};

void read_noise(Reader &r, const json &root, NoiseParams &noise) {
    if (!root.contains("noise")) {
        r.fail("noise", "missing");
        return;
    }
    const json &n = root.at("noise");
    if (!r.object(n, "noise", {"alpha", "beta", "gamma", "omega0"})) return;
    struct Field {
        const char *key;
        double *value;
        bool strict;
    } fields[] = {{"alpha", &noise.alpha, false},
                  {"beta", &noise.beta, false},
                  {"gamma", &noise.gamma, true},
                  {"omega0", &noise.omega0, true}};
    for (auto &f : fields) {
        auto v = r.number(n, f.key, "noise");
        if (!n.contains(f.key)) {
            r.fail(join("noise", f.key), "missing");
        } else if (v) {
            if (f.strict ? !(*v > 0.0) : !(*v >= 0.0)) {
                r.fail(join("noise", f.key), std::string(f.key) + (f.strict ? " must be > 0" : " must be >= 0"));
            } else {
                *f.value = *v;
            }
        }
    }
}

void read_taus(Reader &r, const json &root, std::vector<double> &taus) {
    if (!root.contains("tau")) {
        r.fail("tau", "missing");
        return;
    }
    const json &t = root.at("tau");
    if (t.is_array()) {
        if (t.empty()) r.fail("tau", "must not be empty");
        for (std::size_t i = 0; i < t.size(); ++i) {
            const std::string path = "tau[" + std::to_string(i) + "]";
            if (!t[i].is_number() || !(t[i].get<double>() > 0.0) || !std::isfinite(t[i].get<double>())) {
                r.fail(path, "must be a number > 0");
            } else {
                taus.push_back(t[i].get<double>());
            }
        }
        return;
    }
    if (!r.object(t, "tau", {"start", "stop", "points", "spacing"})) return;
    const auto start = r.number(t, "start", "tau");
    const auto stop = r.number(t, "stop", "tau");
    const auto points = r.integer(t, "points", "tau");
    const std::string spacing = r.string(t, "spacing", "tau").value_or("log");
    bool ok = true;
    if (!start || !(*start > 0.0)) r.fail("tau.start", "must be a number > 0"), ok = false;
    if (!stop || !(*stop > 0.0)) r.fail("tau.stop", "must be a number > 0"), ok = false;
    if (!points || *points < 1 || *points > 100000) r.fail("tau.points", "must be an integer in [1, 100000]"), ok = false;
    if (spacing != "log" && spacing != "linear") r.fail("tau.spacing", "must be \"log\" or \"linear\""), ok = false;
    if (ok && *stop < *start) r.fail("tau.stop", "must be >= tau.start"), ok = false;
    if (!ok) return;
    const auto n = static_cast<int>(*points);
    for (int i = 0; i < n; ++i) {
        const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        taus.push_back(spacing == "log" ? *start * std::pow(*stop / *start, f) : *start + (*stop - *start) * f);
    }
    if (n > 1) taus.back() = *stop;
}

void read_probe(Reader &r, const json &root, ProbeSpec &probe, int n_atoms) {
    if (!root.contains("probe")) return;
    const json &p = root.at("probe");
    if (!r.object(p, "probe", {"kind", "amplitudes", "family", "n_starts", "max_iter"})) return;
    if (auto kind = r.string(p, "kind", "probe")) {
        bool found = false;
        for (const auto &[k, name] : kProbes) {
            if (*kind == name) probe.kind = k, found = true;
        }
        if (!found) r.fail("probe.kind", "unknown probe kind '" + *kind + "'");
    } else if (!p.contains("kind")) {
        r.fail("probe.kind", "missing");
    }
    if (auto family = r.string(p, "family", "probe")) {
        if (*family == "symmetric") probe.family = ProbeFamily::symmetric;
        else if (*family == "coherent") probe.family = ProbeFamily::coherent;
        else r.fail("probe.family", "must be \"symmetric\" or \"coherent\"");
    }
    r.positive_int(p, "n_starts", "probe", probe.n_starts, 1);
    r.positive_int(p, "max_iter", "probe", probe.max_iter, 1);

    const bool wants = probe.kind == ProbeKind::amplitudes;
    if (p.contains("amplitudes") != wants) {
        r.fail("probe.amplitudes", wants ? "missing" : "only allowed with kind \"amplitudes\"");
        return;
    }
    if (!wants) return;
    const json &a = p.at("amplitudes");
    if (!a.is_array() || a.size() != static_cast<std::size_t>(n_atoms + 1)) {
        r.fail("probe.amplitudes", "must be an array of atoms + 1 entries");
        return;
    }
    probe.amplitudes.resize(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::string path = "probe.amplitudes[" + std::to_string(i) + "]";
        const json &v = a[i];
        if (v.is_number()) {
            probe.amplitudes(static_cast<Eigen::Index>(i)) = v.get<double>();
        } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
            probe.amplitudes(static_cast<Eigen::Index>(i)) = Complex(v[0].get<double>(), v[1].get<double>());
        } else {
            r.fail(path, "must be a number or a [re, im] pair");
        }
    }
    const double norm = probe.amplitudes.norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-9) r.fail("probe.amplitudes", "must have unit norm");
}

void read_servo(Reader &r, const json &root, SimSettings &sim) {
    if (!root.contains("servo")) return;
    const json &s = root.at("servo");
    if (!r.object(s, "servo", {"gain", "estimator", "T", "steps", "runs", "overlapping"})) return;
    if (auto gain = r.number(s, "gain", "servo")) {
        if (!(*gain > 0.0 && *gain <= 1.0)) r.fail("servo.gain", "must be in (0, 1]");
        else sim.servo.gain = *gain;
    }
    if (auto est = r.string(s, "estimator", "servo")) {
        if (*est == "linear") sim.servo.estimator = PhaseEstimator::linear;
        else if (*est == "arcsine") sim.servo.estimator = PhaseEstimator::arcsine;
        else r.fail("servo.estimator", "must be \"linear\" or \"arcsine\"");
    }
    if (auto T = r.number(s, "T", "servo")) {
        if (!(*T > 0.0)) r.fail("servo.T", "must be > 0");
        else sim.T = *T;
    }
    r.positive_int(s, "steps", "servo", sim.n_steps, 2);
    r.positive_int(s, "runs", "servo", sim.n_runs, 2);
    if (auto o = r.boolean(s, "overlapping", "servo")) sim.overlapping = *o;
}

} // namespace

std::optional<RunMode> parse_run_mode(std::string_view name) {
    for (const auto &[mode, text] : kModes) {
        if (name == text) return mode;
    }
    return std::nullopt;
}

std::string_view to_string(RunMode mode) {
    for (const auto &[m, text] : kModes) {
        if (m == mode) return text;
    }
    return "";
}

static std::string describe(const std::vector<ConfigIssue> &issues) {
    std::string out = "invalid configuration:";
    for (const auto &i : issues) out += "\n  " + i.path + ": " + i.message;
    return out;
}

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : DomainError(describe(issues)), issues_(std::move(issues)) {}

RunConfig parse_run_config(std::string_view text) {
    json root;
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        root = json::object();
    } else {
        try {
            root = json::parse(text);
        } catch (const json::parse_error &e) {
            throw ConfigError({{"<root>", std::string("malformed JSON: ") + e.what()}});
        }
    }
    Reader r;
    RunConfig cfg;
    if (!r.object(root, "", {"mode", "noise", "atoms", "tau", "k_max", "probe", "servo", "seed", "output",
                             "dimension_cap", "tolerance", "long_term_c"})) {
        throw ConfigError(r.issues);
    }
    if (auto mode = r.string(root, "mode", "")) {
        if (auto m = parse_run_mode(*mode)) cfg.mode = *m;
        else r.fail("mode", "unknown mode '" + *mode + "'");
    } else if (!root.contains("mode")) {
        r.fail("mode", "missing mode");
    }
    read_noise(r, root, cfg.noise);
    r.positive_int(root, "atoms", "", cfg.n_atoms, 1);
    read_taus(r, root, cfg.taus);
    r.positive_int(root, "k_max", "", cfg.k_max, 1);
    read_probe(r, root, cfg.probe, cfg.n_atoms);
    read_servo(r, root, cfg.sim);
    if (root.contains("seed")) {
        const json &s = root.at("seed");
        if (s.is_number_unsigned()) cfg.seed = s.get<std::uint64_t>();
        else r.fail("seed", "must be a non-negative integer");
    }
    if (auto out = r.string(root, "output", "")) cfg.output = *out;
    if (auto cap = r.integer(root, "dimension_cap", "")) {
        if (*cap < 1) r.fail("dimension_cap", "must be >= 1");
        else cfg.dimension_cap = static_cast<std::size_t>(*cap);
    }
    if (auto tol = r.number(root, "tolerance", "")) {
        if (!(*tol > 0.0)) r.fail("tolerance", "must be > 0");
        else cfg.tolerance = *tol;
    }
    if (auto c = r.number(root, "long_term_c", "")) {
        if (!(*c > 0.0)) r.fail("long_term_c", "must be > 0");
        else if (cfg.mode != RunMode::bound_check) r.fail("long_term_c", "only used by bound-check");
        else cfg.long_term_c = *c;
    }
    if (cfg.mode == RunMode::bound_check || cfg.mode == RunMode::simulate) {
        for (std::size_t i = 0; i < cfg.taus.size(); ++i) {
            const double k = cfg.taus[i] / cfg.sim.T;
            if (std::abs(k - std::round(k)) > 1e-9 * k || std::round(k) < 1) {
                r.fail("tau[" + std::to_string(i) + "]", "must be a whole multiple of servo.T");
            } else if (2 * std::llround(k) > cfg.sim.n_steps) {
                r.fail("tau[" + std::to_string(i) + "]", "needs at least 2 tau/T steps (servo.steps)");
            }
        }
    }
    if (!r.issues.empty()) throw ConfigError(r.issues);
    return cfg;
}

static json to_json(const RunConfig &c, bool with_output) {
    json probe = {{"kind", probe_name(c.probe.kind)},
                  {"family", c.probe.family == ProbeFamily::symmetric ? "symmetric" : "coherent"},
                  {"n_starts", c.probe.n_starts},
                  {"max_iter", c.probe.max_iter}};
    if (c.probe.kind == ProbeKind::amplitudes) {
        json a = json::array();
        for (Eigen::Index i = 0; i < c.probe.amplitudes.size(); ++i) {
            a.push_back({c.probe.amplitudes(i).real(), c.probe.amplitudes(i).imag()});
        }
        probe["amplitudes"] = a;
    }
    json out = {
        {"mode", to_string(c.mode)},
        {"noise", {{"alpha", c.noise.alpha}, {"beta", c.noise.beta}, {"gamma", c.noise.gamma}, {"omega0", c.noise.omega0}}},
        {"atoms", c.n_atoms},
        {"tau", c.taus},
        {"k_max", c.k_max},
        {"probe", probe},
        {"servo",
         {{"gain", c.sim.servo.gain},
          {"estimator", to_string(c.sim.servo.estimator)},
          {"T", c.sim.T},
          {"steps", c.sim.n_steps},
          {"runs", c.sim.n_runs},
          {"overlapping", c.sim.overlapping}}},
        {"seed", c.seed},
        {"dimension_cap", c.dimension_cap},
        {"tolerance", c.tolerance},
    };
    if (c.long_term_c) out["long_term_c"] = *c.long_term_c;
    if (with_output) out["output"] = c.output;
    return out;
}

std::string normalized_json(const RunConfig &config) { return to_json(config, true).dump(); }

std::uint64_t config_hash(const RunConfig &config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(config, false).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace qavar
