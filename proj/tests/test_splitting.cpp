#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "overflowlab/exact.hpp"
#include "overflowlab/splitting.hpp"

using namespace overflowlab;
using Catch::Approx;

namespace {

ValidatedNetwork mm1() { return validate({{0.3}, {0.7}, {{0.0}}}); }
ValidatedNetwork sym() { return validate({{0.1, 0.0}, {0.45, 0.45}, {{0.0, 1.0}, {0.0, 0.0}}}); }
ValidatedNetwork asym() { return validate({{0.1, 0.0}, {0.5, 0.4}, {{0.0, 1.0}, {0.0, 0.0}}}); }

}  // namespace

TEST_CASE("build_levels places the documented level counts") {
    auto vn = mm1();
    TargetSpec t = target_params(vn, {1});
    LevelScheme s = build_levels(vn, t, 10, 2, {0});
    CHECK(s.C == Approx(std::log(7.0 / 3.0) / std::log(2.0)).epsilon(1e-12));
    CHECK(s.C == Approx(1.222394).margin(1e-6));
    CHECK(s.L == 13);

    auto vs = sym();
    TargetSpec ts = target_params(vs, {1, 1});
    CHECK(build_levels(vs, ts, 10, 2, {0, 0}).L == 22);
    CHECK(build_levels(vs, ts, 10, 2, {3, 2}).L == 11);

    // Asymmetric tandem, total population: gamma_V = log 4, so C = 2 and
    // the index collapses to 2 * (n - population).
    auto va = asym();
    TargetSpec ta = target_params(va, {1, 1});
    LevelScheme sa = build_levels(va, ta, 10, 2, {0, 0});
    CHECK(sa.C == Approx(2.0).epsilon(1e-14));
    CHECK(sa.L == 20);
    CHECK(level_index(sa, {3, 1}) == 12);
    CHECK(level_index(sa, {0, 9}) == 2);

    try {
        build_levels(vs, ts, 4, 2, {2, 2});
        FAIL("expected AlreadyInTarget");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::AlreadyInTarget);
    }
    CHECK_THROWS_AS(build_levels(vs, ts, 10, 1, {0, 0}), Error); // r must be >= 2
}

TEST_CASE("level_index follows the potential formula and clamps on the target") {
    auto vn = mm1();
    TargetSpec t = target_params(vn, {1});
    LevelScheme s = build_levels(vn, t, 10, 2, {0});
    CHECK(level_index(s, {4}) == 8);
    CHECK(level_index(s, {0}) == 13);
    CHECK(level_index(s, {10}) == 0);
    CHECK(level_index(s, {25}) == 0);

    // Thresholds decrease strictly with the level number.
    for (int j = 0; j < s.L; ++j) CHECK(s.threshold(j) > s.threshold(j + 1));
}

TEST_CASE("single runs only produce the reachable terminal counts") {
    // M/M/1 with n = 2, r = 2: L = 3 and the only terminal counts are
    // 0, 4, 8 (death; one of two children succeeds; both succeed), each
    // success worth r^2 because the winning jump crosses two levels.
    auto vn = mm1();
    TargetSpec t = target_params(vn, {1});
    LevelScheme s = build_levels(vn, t, 2, 2, {0});
    REQUIRE(s.L == 3);

    std::set<std::uint64_t> seen;
    double sum = 0.0;
    const int m = 20000;
    double sum_sq = 0.0;
    for (int i = 0; i < m; ++i) {
        SplitMix64 rng = derive_stream(99, static_cast<std::uint64_t>(i));
        SplitOutcome o = run_splitting(vn, s, {0}, rng);
        seen.insert(o.terminal_count);
        CHECK(o.terminal_count <= 8);
        CHECK(o.estimate == Approx(o.terminal_count / 8.0));
        REQUIRE(o.per_level_survivors.size() == 4);
        CHECK(o.per_level_survivors[0] == 1);
        for (int lvl = 0; lvl < 3; ++lvl)
            CHECK(o.per_level_survivors[lvl + 1] <= 2 * o.per_level_survivors[lvl]);
        CHECK(o.per_level_survivors[3] == o.terminal_count);
        if (o.terminal_count > 0) CHECK(o.work >= 2); // needs at least two transitions
        sum += o.estimate;
        sum_sq += o.estimate * o.estimate;
    }
    CHECK(seen == std::set<std::uint64_t>{0, 4, 8});

    double mean = sum / m;
    double var = (sum_sq - m * mean * mean) / (m - 1);
    double se = std::sqrt(var / m);
    CHECK(std::abs(mean - 0.09) <= 4.0 * se);
}

TEST_CASE("runs are deterministic given the stream") {
    auto vn = sym();
    TargetSpec t = target_params(vn, {1, 1});
    LevelScheme s = build_levels(vn, t, 6, 2, {0, 0});
    SplitMix64 a = derive_stream(123, 5), b = derive_stream(123, 5);
    SplitOutcome oa = run_splitting(vn, s, {0, 0}, a);
    SplitOutcome ob = run_splitting(vn, s, {0, 0}, b);
    CHECK(oa.terminal_count == ob.terminal_count);
    CHECK(oa.work == ob.work);
    CHECK(oa.per_level_survivors == ob.per_level_survivors);
    CHECK(oa.max_live_particles == ob.max_live_particles);
}

TEST_CASE("estimator is unbiased against the exact solver") {
    auto vn = mm1();
    TargetSpec t = target_params(vn, {1});
    LevelScheme s = build_levels(vn, t, 10, 2, {0});
    ReplicationStats st = estimate(vn, s, {0}, 20000, 4242);
    double exact_p = overflow_probability(vn, 10, {1}, {0});
    CHECK(std::abs(st.mean - exact_p) <= 4.0 * st.std_error);

    // Terminal-count identity E[N_n] = r^L p via the same statistics.
    double mean_N = st.mean * level_weight(s);
    double se_N = st.std_error * level_weight(s);
    CHECK(std::abs(mean_N - level_weight(s) * exact_p) <= 4.0 * se_N);

    // Closed form 0.4/((7/3)^5 - 1) = 0.005868..., large-m spot check.
    LevelScheme s5 = build_levels(vn, t, 5, 2, {0});
    ReplicationStats st5 = estimate(vn, s5, {0}, 100000, 909);
    CHECK(std::abs(st5.mean - 0.0058681) <= 4.0 * st5.std_error);

    auto vs = sym();
    TargetSpec ts = target_params(vs, {1, 1});
    LevelScheme ss = build_levels(vs, ts, 6, 2, {0, 0});
    ReplicationStats sts = estimate(vs, ss, {0, 0}, 20000, 777);
    double exact_s = overflow_probability(vs, 6, {1, 1}, {0, 0});
    CHECK(std::abs(sts.mean - exact_s) <= 4.0 * sts.std_error);

    auto va = asym();
    TargetSpec ta = target_params(va, {1, 1});
    LevelScheme sa = build_levels(va, ta, 8, 2, {0, 0});
    ReplicationStats sta = estimate(va, sa, {0, 0}, 20000, 888);
    double exact_a = overflow_probability(va, 8, {1, 1}, {0, 0});
    CHECK(std::abs(sta.mean - exact_a) <= 4.0 * sta.std_error);

    auto v3 = validate({{0.06, 0.04, 0.0},
                        {0.35, 0.3, 0.25},
                        {{0.0, 0.5, 0.2}, {0.0, 0.0, 0.6}, {0.1, 0.0, 0.0}}});
    TargetSpec t3 = target_params(v3, {1, 1, 1});
    LevelScheme s3 = build_levels(v3, t3, 5, 2, {0, 0, 0});
    ReplicationStats st3 = estimate(v3, s3, {0, 0, 0}, 20000, 333);
    double exact_3 = overflow_probability(v3, 5, {1, 1, 1}, {0, 0, 0});
    CHECK(std::abs(st3.mean - exact_3) <= 4.0 * st3.std_error);
}

TEST_CASE("replications are identical for any worker count") {
    auto vn = sym();
    TargetSpec t = target_params(vn, {1, 1});
    LevelScheme s = build_levels(vn, t, 8, 2, {0, 0});
    auto serial = run_replications(vn, s, {0, 0}, 500, 31337, 1);
    auto parallel = run_replications(vn, s, {0, 0}, 500, 31337, 3);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].terminal_count == parallel[i].terminal_count);
        CHECK(serial[i].work == parallel[i].work);
    }
}

TEST_CASE("off-target backlog contributes no levels") {
    auto vn = asym();
    TargetSpec t = target_params(vn, {1, 0});
    // Station 2 is outside the target, so (0,4) still faces the full ladder:
    // L = ceil(C * (3 - 0)) with C = log(5)/log(2).
    LevelScheme s = build_levels(vn, t, 3, 2, {0, 4});
    CHECK(s.C == Approx(std::log(5.0) / std::log(2.0)).epsilon(1e-14));
    CHECK(s.L == 7);
    CHECK(s.weights[0] == Approx(t.gamma_V));
    CHECK(s.weights[1] == 0.0);
}

TEST_CASE("a scheme with no levels is trivially terminal") {
    // L = 0 cannot come out of build_levels (any start outside the target
    // has at least one level), but run_splitting still honors it.
    auto vn = asym();
    TargetSpec t = target_params(vn, {1, 1});
    LevelScheme s;
    s.n = 3;
    s.r = 2;
    s.target = t;
    s.weights = {t.gamma_V, t.gamma_V};
    s.log_r = std::log(2.0);
    s.C = t.gamma_V / s.log_r;
    s.L = 0;
    SplitMix64 rng(1);
    SplitOutcome o = run_splitting(vn, s, {1, 1}, rng);
    CHECK(o.terminal_count == 1);
    CHECK(o.estimate == 1.0);
    CHECK(o.work == 0);
}

TEST_CASE("the transition budget aborts runaway runs") {
    auto vn = mm1();
    TargetSpec t = target_params(vn, {1});
    LevelScheme s = build_levels(vn, t, 10, 2, {5});
    SplitMix64 rng(3);
    try {
        run_splitting(vn, s, {5}, rng, 3); // any outcome needs at least 5 transitions
        FAIL("expected RunawayRun");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::RunawayRun);
    }
}
