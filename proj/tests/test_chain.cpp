#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "overflowlab/chain.hpp"
#include "overflowlab/rng.hpp"

using namespace overflowlab;
using Catch::Approx;

namespace {

ValidatedNetwork mm1() { return validate({{0.3}, {0.7}, {{0.0}}}); }
ValidatedNetwork sym() { return validate({{0.1, 0.0}, {0.45, 0.45}, {{0.0, 1.0}, {0.0, 0.0}}}); }
ValidatedNetwork asym() { return validate({{0.1, 0.0}, {0.5, 0.4}, {{0.0, 1.0}, {0.0, 0.0}}}); }

}  // namespace

TEST_CASE("increment_table lists events in the fixed order with exact probabilities") {
    auto ev_sym = increment_table(sym());
    REQUIRE(ev_sym.size() == 3);
    CHECK(ev_sym[0].kind == IncrementEvent::Kind::Arrival);
    CHECK(ev_sym[0].to == 0);
    CHECK(ev_sym[0].probability == Approx(0.1));
    CHECK(ev_sym[1].kind == IncrementEvent::Kind::Transfer);
    CHECK(ev_sym[1].from == 0);
    CHECK(ev_sym[1].to == 1);
    CHECK(ev_sym[1].probability == Approx(0.45));
    CHECK(ev_sym[2].kind == IncrementEvent::Kind::Departure);
    CHECK(ev_sym[2].from == 1);
    CHECK(ev_sym[2].probability == Approx(0.45));

    auto ev_mm1 = increment_table(mm1());
    REQUIRE(ev_mm1.size() == 2);
    CHECK(ev_mm1[0].probability == Approx(0.3));
    CHECK(ev_mm1[1].probability == Approx(0.7));

    auto ev_asym = increment_table(asym());
    REQUIRE(ev_asym.size() == 3);
    CHECK(ev_asym[1].probability == Approx(0.5));
    CHECK(ev_asym[2].probability == Approx(0.4));

    double total = 0.0;
    for (const auto& e : ev_sym) total += e.probability;
    CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("constrain blocks service events at empty stations") {
    auto vn = sym();
    auto events = increment_table(vn);
    const auto& transfer = events[1];
    const auto& departure = events[2];

    CHECK(constrain({0, 3}, transfer) == State{0, 0});   // station 1 empty: blocked
    CHECK(constrain({0, 3}, departure) == State{0, -1}); // station 2 occupied
    CHECK(constrain({2, 0}, transfer) == State{-1, 1});
}

TEST_CASE("step applies inverse-transform sampling over the fixed event order") {
    auto vn = sym();
    EventTable table(vn);
    CHECK(step(table, {1, 0}, 0.05) == State{2, 0});
    CHECK(step(table, {1, 0}, 0.30) == State{0, 1});
    CHECK(step(table, {1, 0}, 0.99) == State{1, 0}); // blocked departure
    // Convenience overload, same result.
    CHECK(step(vn, {1, 0}, 0.30) == State{0, 1});
}

TEST_CASE("kernel_row merges blocked events into the self-loop and sums to 1") {
    auto vn = sym();
    auto row = kernel_row(vn, {0, 3});
    REQUIRE(row.size() == 3);
    std::map<State, double> m(row.begin(), row.end());
    CHECK(m[State{1, 3}] == Approx(0.1));
    CHECK(m[State{0, 3}] == Approx(0.45));
    CHECK(m[State{0, 2}] == Approx(0.45));

    auto row0 = kernel_row(mm1(), {0});
    std::map<State, double> m0(row0.begin(), row0.end());
    CHECK(m0[State{1}] == Approx(0.3));
    CHECK(m0[State{0}] == Approx(0.7));

    auto row2 = kernel_row(vn, {2, 1});
    std::map<State, double> m2(row2.begin(), row2.end());
    CHECK(m2[State{3, 1}] == Approx(0.1));
    CHECK(m2[State{1, 2}] == Approx(0.45));
    CHECK(m2[State{2, 0}] == Approx(0.45));

    // Row sums and successor displacements over a box.
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; b <= 4; ++b) {
            double total = 0.0;
            for (const auto& [y, p] : kernel_row(vn, {a, b})) {
                total += p;
                int moved = std::abs(y[0] - a) + std::abs(y[1] - b);
                CHECK(moved <= 2); // an element of the increment set or zero
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
}

TEST_CASE("step frequencies agree with kernel_row probabilities") {
    auto vn = sym();
    EventTable table(vn);
    const State x{1, 0};
    std::map<State, int> counts;
    const int draws = 100000;
    SplitMix64 rng(2024);
    for (int i = 0; i < draws; ++i) ++counts[step(table, x, rng.u01())];

    for (const auto& [y, p] : kernel_row(vn, x)) {
        double freq = counts[y] / static_cast<double>(draws);
        double se = std::sqrt(p * (1.0 - p) / draws);
        CHECK(std::abs(freq - p) <= 4.0 * se);
    }
}

TEST_CASE("log_mgf vanishes at zero and matches the hand-computed tilts") {
    auto vn = sym();
    CHECK(log_mgf(vn, {2, 3}, {0.0, 0.0}) == Approx(0.0).margin(1e-15));

    double th = std::log(4.5);
    CHECK(log_mgf(vn, {2, 3}, {th, th}) == Approx(0.0).margin(1e-12));
    CHECK(log_mgf(vn, {5, 0}, {th, th}) == Approx(std::log(1.35)).epsilon(1e-12));
}

TEST_CASE("subsolution residual is zero on interior states, undefined on the boundary") {
    struct Case {
        ValidatedNetwork vn;
        std::vector<int> v;
    };
    for (auto& [vn, v] : {Case{mm1(), {1}}, Case{sym(), {1, 1}}, Case{asym(), {1, 1}}}) {
        TargetSpec t = target_params(vn, v);
        SplitMix64 rng(7);
        for (int trial = 0; trial < 100; ++trial) {
            State x(vn.d());
            for (auto& c : x) c = 1 + static_cast<int>(rng.u01() * 30.0);
            CHECK(std::abs(subsolution_residual(vn, t, x)) <= 1e-12);
        }
    }

    auto vn = sym();
    TargetSpec t = target_params(vn, {1, 1});
    CHECK(std::abs(subsolution_residual(vn, t, {1, 1})) <= 1e-12);
    try {
        subsolution_residual(vn, t, {5, 0});
        FAIL("expected BoundaryState");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::BoundaryState);
    }
}
