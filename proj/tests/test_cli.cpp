#include <algorithm>
#include <string>

#include "doctest.h"
#include "qavar/run_config.hpp"
#include "qavar/runner.hpp"

using namespace qavar;

namespace {

const char *kLaserNoise = R"("noise": {"alpha": 2, "beta": 0.4, "gamma": 0.5, "omega0": 3.25e15})";

std::string doc(const std::string &body) { return std::string("{") + kLaserNoise + ", " + body + "}"; }

bool has_issue(const ConfigError &e, const std::string &path, const std::string &fragment = "") {
    return std::any_of(e.issues().begin(), e.issues().end(), [&](const ConfigIssue &i) {
        return i.path == path && i.message.find(fragment) != std::string::npos;
    });
}

std::vector<std::string> lines_of(const std::string &csv) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t end = csv.find("\r\n", pos);
        out.push_back(csv.substr(pos, end - pos));
        if (end == std::string::npos) break;
        pos = end + 2;
    }
    return out;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("empty document reports a missing mode") {
    try {
        parse_run_config("");
        FAIL("expected ConfigError");
    } catch (const ConfigError &e) {
        CHECK(has_issue(e, "mode", "missing mode"));
        CHECK(has_issue(e, "noise"));
    }
}

TEST_CASE("noise and unknown keys are validated with paths") {
    try {
        parse_run_config(R"({"mode": "bound", "noise": {"alpha": 2, "beta": 0.4, "gamma": 0, "omega0": 1},
                             "tau": [1], "colour": "blue", "servo": {"gain": 2}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError &e) {
        CHECK(has_issue(e, "noise.gamma", "gamma must be > 0"));
        CHECK(has_issue(e, "colour", "unknown key"));
        CHECK(has_issue(e, "servo.gain"));
    }
    CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(doc(R"("mode": "bound", "tau": [1], "probe": {"kind": "amplitudes", "amplitudes": [1, 1]})")),
                    ConfigError);
}

TEST_CASE("the laser example resolves with defaults") {
    const RunConfig c = parse_run_config(doc(R"("mode": "bound", "tau": [0.5, 1, 2])"));
    CHECK(c.mode == RunMode::bound);
    CHECK(c.noise.alpha == 2.0);
    CHECK(c.noise.omega0 == 3.25e15);
    CHECK(c.n_atoms == 1);
    CHECK(c.k_max == 4);
    CHECK(c.sim.T == 0.5);
    CHECK(c.sim.servo.gain == 0.5);
    CHECK(c.tolerance == 1e-8);
    CHECK(c.dimension_cap == 20000);
    CHECK(c.probe.kind == ProbeKind::plus);
}

TEST_CASE("tau ranges") {
    const RunConfig log = parse_run_config(doc(R"("mode": "lo-avar", "tau": {"start": 0.1, "stop": 10, "points": 3})"));
    REQUIRE(log.taus.size() == 3);
    CHECK(log.taus[1] == doctest::Approx(1.0));
    CHECK(log.taus[2] == doctest::Approx(10.0));
    const RunConfig lin =
        parse_run_config(doc(R"("mode": "lo-avar", "tau": {"start": 1, "stop": 2, "points": 5, "spacing": "linear"})"));
    CHECK(lin.taus[1] == doctest::Approx(1.25));
    CHECK_THROWS_AS(parse_run_config(doc(R"("mode": "lo-avar", "tau": {"start": 2, "stop": 1, "points": 5})")), ConfigError);
}

TEST_CASE("simulated tau must be a whole number of steps") {
    CHECK_NOTHROW(parse_run_config(doc(R"("mode": "simulate", "tau": [1.5], "servo": {"T": 0.5})")));
    try {
        parse_run_config(doc(R"("mode": "simulate", "tau": [1, 1.2], "servo": {"T": 0.5})"));
        FAIL("expected ConfigError");
    } catch (const ConfigError &e) {
        CHECK(has_issue(e, "tau[1]"));
        CHECK_FALSE(has_issue(e, "tau[0]"));
    }
}

TEST_CASE("long-term constant belongs to bound-check") {
    const RunConfig c = parse_run_config(doc(R"("mode": "bound-check", "tau": [1, 50], "long_term_c": 0.8)"));
    REQUIRE(c.long_term_c.has_value());
    CHECK(*c.long_term_c == 0.8);
    try {
        parse_run_config(doc(R"("mode": "bound", "tau": [1], "long_term_c": 0.8)"));
        FAIL("expected ConfigError");
    } catch (const ConfigError &e) {
        CHECK(has_issue(e, "long_term_c"));
    }
}

TEST_CASE("amplitude probes accept complex pairs") {
    const RunConfig c = parse_run_config(
        doc(R"("mode": "bound", "tau": [1], "probe": {"kind": "amplitudes", "amplitudes": [0.6, [0, 0.8]]})"));
    REQUIRE(c.probe.amplitudes.size() == 2);
    CHECK(c.probe.amplitudes(1).imag() == doctest::Approx(0.8));
}

TEST_CASE("hash ignores the output path and tracks the content") {
    RunConfig a = parse_run_config(doc(R"("mode": "bound", "tau": [1])"));
    RunConfig b = a;
    b.output = "elsewhere.csv";
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 1;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(normalized_json(a).find("\"seed\"") != std::string::npos);
}

TEST_CASE("runs are byte-identical and carry k, T and seed") {
    const RunConfig c = parse_run_config(doc(R"("mode": "bound", "tau": [0.5, 2], "k_max": 3, "seed": 5)"));
    const RunOutcome a = run(c);
    const RunOutcome b = run(c, 2);
    CHECK(a.exit_code == exit_ok);
    CHECK(a.csv == b.csv);
    const auto lines = lines_of(a.csv);
    REQUIRE(lines.size() >= 7);
    CHECK(lines[0] == "# qavar 0.1.0");
    CHECK(lines[1].rfind("# config_hash fnv1a64:", 0) == 0);
    CHECK(lines[2] == "# seed 5");
    CHECK(lines[4] == "tau,k_opt,T_opt,seed,sigma2_lo,sigma2_q,c_running,status");
    CHECK(lines[6].rfind("2,", 0) == 0);
    CHECK(lines[6].find(",5,") != std::string::npos);
    CHECK(lines[6].find(",ok") != std::string::npos);
}

TEST_CASE("zero noise gives a zero bound") {
    const RunConfig c = parse_run_config(
        R"({"mode": "bound", "noise": {"alpha": 0, "beta": 0, "gamma": 1, "omega0": 1}, "tau": [1], "k_max": 1})");
    const auto lines = lines_of(run(c).csv);
    REQUIRE(lines.size() >= 6);
    CHECK(lines[5] == "1,1,1,0,0,0,0,ok");
}

TEST_CASE("every tau over the dimension cap") {
    const RunConfig c =
        parse_run_config(doc(R"("mode": "bound", "atoms": 2, "tau": [1, 2], "k_max": 4, "dimension_cap": 100)"));
    const RunOutcome r = run(c);
    CHECK(r.exit_code == exit_skipped);
    CHECK(r.csv.find("skipped") != std::string::npos);
}

TEST_CASE("number formatting") {
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(3.25e15) == "3.25e+15");
    CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
}

}
