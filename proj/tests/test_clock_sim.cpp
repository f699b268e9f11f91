#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "qavar/clock_sim.hpp"
#include "qavar/errors.hpp"

using namespace qavar;

namespace {

const NoiseParams kLaser = NoiseParams::laser_example();

double mean_of(const std::vector<double> &v, std::size_t from, std::size_t to) {
    return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
           static_cast<double>(to - from);
}

double rms(const std::vector<double> &v, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += v[i] * v[i];
    return std::sqrt(s / static_cast<double>(to - from));
}

} // namespace

TEST_SUITE("clock_sim") {

TEST_CASE("configuration checks") {
    SimConfig c;
    c.noise = kLaser;
    CHECK_NOTHROW(c.validate());
    c.servo.gain = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.servo.gain = 1.5;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c.servo.gain = 1.0;
    c.n_steps = 1;
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK(parse_phase_estimator("arcsine") == PhaseEstimator::arcsine);
    CHECK_THROWS_AS(parse_phase_estimator("atan"), DomainError);
    CHECK(steps_in(2.0, 0.5) == 4);
    CHECK_THROWS_AS(steps_in(0.7, 0.5), DomainError);
}

TEST_CASE("step sampler reproduces the block covariance") {
    const double T = 0.5;
    const int K = 3, n = 200000;
    const RealMatrix G = block_kernel(kLaser, T, K);
    Rng rng = make_stream(8);
    RealMatrix sum = RealMatrix::Zero(K, K), sum2 = RealMatrix::Zero(K, K);
    for (int s = 0; s < n; ++s) {
        StepPhaseSampler sampler(kLaser, T, rng);
        RealVector th(K);
        for (int i = 0; i < K; ++i) th(i) = sampler.next(rng);
        const RealMatrix outer = th * th.transpose();
        sum += outer;
        sum2 += outer.cwiseProduct(outer);
    }
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
            const double mean = sum(i, j) / n;
            const double se = std::sqrt((sum2(i, j) / n - mean * mean) / n);
            CHECK(std::abs(mean - G(i, j)) < 5 * se);
        }
    }
}

TEST_CASE("simulation is deterministic and well formed") {
    SimConfig c;
    c.noise = kLaser;
    c.n_atoms = 2;
    c.n_steps = 2000;
    c.seed = 42;
    const FrequencyTrace a = simulate_clock(c);
    const FrequencyTrace b = simulate_clock(c);
    CHECK(a.y == b.y);
    CHECK(a.outcomes == b.outcomes);
    CHECK(a.y.size() == 2000);
    for (int m : a.outcomes) CHECK((m >= 0 && m <= 2));
    c.seed = 43;
    CHECK(simulate_clock(c).y != a.y);
}

TEST_CASE("noiseless LO: the servo only chases projection noise") {
    SimConfig c;
    c.noise = {0.0, 0.0, 1.0, 1e15};
    c.n_steps = 100000;
    c.seed = 1;
    const FrequencyTrace t = simulate_clock(c);
    const double m = mean_of(t.y, 0, t.y.size());
    // Successive y values are correlated through the integrator; use block means.
    const std::size_t blocks = 100, len = t.y.size() / blocks;
    std::vector<double> means;
    for (std::size_t b = 0; b < blocks; ++b) means.push_back(mean_of(t.y, b * len, (b + 1) * len));
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / (blocks - 1) / blocks);
    CHECK(std::abs(m) < 5 * se);
}

TEST_CASE("Allan variance estimator arithmetic") {
    FrequencyTrace constant;
    constant.T = 1.0;
    constant.y.assign(10, 3.0);
    CHECK(avar_estimate(constant, 2, 1.0).avar == 0.0);

    FrequencyTrace alternating;
    alternating.T = 1.0;
    alternating.y = {1.5, -1.5, 1.5, -1.5};
    const AvarEstimate e = avar_estimate(alternating, 1, 2.0, false);
    CHECK(e.avar == doctest::Approx(2 * 1.5 * 1.5 / 4.0));
    CHECK(e.n_pairs == 3);
    CHECK(avar_estimate(alternating, 2, 1.0).avar == 0.0);
    CHECK(avar_estimate(alternating, 2, 1.0).n_pairs == 1);

    FrequencyTrace ramp;
    ramp.T = 1.0;
    ramp.y = {0, 1, 2, 3, 4, 5, 6, 7};
    // Means of consecutive 2-blocks differ by 2 everywhere.
    CHECK(avar_estimate(ramp, 2, 1.0).avar == doctest::Approx(2.0));
    CHECK(avar_estimate(ramp, 2, 1.0).n_pairs == 5);
    CHECK(avar_estimate(ramp, 2, 1.0, false).n_pairs == 3);
    CHECK_THROWS_AS(avar_estimate(alternating, 3, 1.0), DomainError);
}

TEST_CASE("free-running white noise follows beta/(omega0^2 tau)") {
    const NoiseParams white{0.0, 0.4, 1.0, 1e15};
    const FrequencyTrace t = free_running_trace(white, 0.1, 100000, 2);
    for (int k : {10, 30, 100}) {
        const double expected = free_lo_avar(white, k * 0.1);
        CHECK(avar_estimate(t, k, white.omega0).avar == doctest::Approx(expected).epsilon(0.1));
    }
}

TEST_CASE("overlapping and non-overlapping estimates agree") {
    const NoiseParams white{0.0, 0.4, 1.0, 1e15};
    SimConfig c;
    c.noise = white;
    c.n_steps = 20000;
    BoundCheckOptions opt;
    opt.n_runs = 40;
    opt.threads = 2;
    const auto over = ensemble_avar(c, {0.5, 2.5}, 3, opt);
    opt.overlapping = false;
    const auto plain = ensemble_avar(c, {0.5, 2.5}, 3, opt);
    for (int i = 0; i < 2; ++i) {
        const double se = std::hypot(over[i].stderr_, plain[i].stderr_);
        CHECK(std::abs(over[i].avar - plain[i].avar) < 3 * se);
    }
}

TEST_CASE("servo stays bounded at low gain") {
    for (int n_atoms : {1, 2}) {
        for (double gain : {0.05, 0.1}) {
            SimConfig c;
            c.noise = kLaser;
            c.n_atoms = n_atoms;
            c.n_steps = 100000;
            c.servo.gain = gain;
            c.seed = 11;
            const FrequencyTrace t = simulate_clock(c);
            const std::size_t half = t.corrections.size() / 2;
            CHECK(rms(t.corrections, half, 2 * half) <= 2 * rms(t.corrections, 0, half));
        }
    }
}

TEST_CASE("fringe hops at unit gain are not masked") {
    SimConfig c;
    c.noise = kLaser;
    c.n_steps = 20000;
    c.servo.gain = 1.0;
    c.seed = 11;
    const FrequencyTrace t = simulate_clock(c);
    double largest = 0.0;
    for (double x : t.corrections) largest = std::max(largest, std::abs(x));
    CHECK(largest > 2 * M_PI / c.T);
}

TEST_CASE("white noise, one atom: 1/tau at long times") {
    SimConfig c;
    c.noise = {0.0, 0.4, 1.0, 1e15};
    c.servo.gain = 0.2;
    c.n_steps = 20000;
    BoundCheckOptions opt;
    opt.n_runs = 100;
    const auto r = ensemble_avar(c, {80.0, 200.0}, 5, opt);
    const double slope = std::log(r[1].avar / r[0].avar) / std::log(2.5);
    CHECK(slope == doctest::Approx(-1.0).epsilon(0.1));

    // At unit gain the single-atom loop keeps slipping fringes: the
    // correction random-walks and the Allan variance rises instead.
    c.servo.gain = 1.0;
    const auto hop = ensemble_avar(c, {80.0, 200.0}, 5, opt);
    CHECK(std::log(hop[1].avar / hop[0].avar) / std::log(2.5) > 0.5);
}

TEST_CASE("simulation on a sampled trace") {
    SimConfig c;
    c.noise = kLaser;
    c.n_steps = 100;
    c.T = 0.5;
    const RealVector w = gen_trace(TraceKind::flicker, kLaser, 0.05, 1000, 3, 1e-15);
    const std::vector<double> omega(w.data(), w.data() + w.size());
    const FrequencyTrace t = simulate_clock(c, omega, 0.05);
    CHECK(t.y.size() == 100);
    CHECK_THROWS_AS(simulate_clock(c, omega, 0.03), DomainError);
    c.n_steps = 101;
    CHECK_THROWS_AS(simulate_clock(c, omega, 0.05), DomainError);
}

TEST_CASE("bound check on a short ensemble") {
    SimConfig c;
    c.noise = kLaser;
    c.n_atoms = 1;
    c.n_steps = 2000;
    BoundReference ref{kLaser, FixedProbe{coherent_spin_state(1, M_PI / 2)}, {}};
    ref.interrogation.k_max = 2;
    BoundCheckOptions opt;
    opt.n_runs = 20;
    const auto rows = bound_check(c, ref, {0.5, 1.0, 2.0}, 9, opt);
    REQUIRE(rows.size() == 3);
    for (const auto &r : rows) {
        CHECK_FALSE(r.violation);
        CHECK_FALSE(r.skipped);
        CHECK(r.sim_avar > r.sigma2_q);
    }
    ref.long_term_c = 1.0;
    const auto tail = bound_check(c, ref, {0.5, 5.0}, 9, opt);
    CHECK_FALSE(tail[0].extrapolated);
    CHECK(tail[0].sigma2_q == rows[0].sigma2_q);
    CHECK(tail[1].extrapolated);
    CHECK(tail[1].sigma2_q == doctest::Approx(1.0 / (kLaser.omega0 * kLaser.omega0 * 5.0)));

    BoundReference other = ref;
    other.noise.alpha = 1.0;
    CHECK_THROWS_AS(bound_check(c, other, {0.5}, 9, opt), DomainError);
}

}
