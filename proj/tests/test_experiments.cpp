#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "overflowlab/exact.hpp"
#include "overflowlab/experiments.hpp"

using namespace overflowlab;
using Catch::Approx;

namespace {

ValidatedNetwork mm1() { return validate({{0.3}, {0.7}, {{0.0}}}); }
ValidatedNetwork asym() { return validate({{0.1, 0.0}, {0.5, 0.4}, {{0.0, 1.0}, {0.0, 0.0}}}); }

}  // namespace

TEST_CASE("naive Monte Carlo agrees with the exact solver") {
    auto vn = mm1();
    ReplicationStats s = naive_mc(vn, 2, {1}, {0}, 100000, 2024);
    CHECK(std::abs(s.mean - 0.09) <= 4.0 * s.std_error);
    // Bernoulli(p): cv^2 = (1 - p) / p, about 10.1 here.
    CHECK(s.cv2 == Approx((1.0 - 0.09) / 0.09).epsilon(0.15));
    CHECK(s.mean_work >= 1.0);
}

TEST_CASE("naive Monte Carlo from a target state is the constant one") {
    auto vn = mm1();
    ReplicationStats s = naive_mc(vn, 3, {1}, {5}, 100, 1);
    CHECK(s.mean == 1.0);
    CHECK(s.variance == 0.0);
    CHECK(s.mean_work == 0.0);
}

TEST_CASE("naive Monte Carlo replications are thread-invariant") {
    auto vn = mm1();
    ReplicationStats a = naive_mc(vn, 4, {1}, {0}, 4000, 555, 1);
    ReplicationStats b = naive_mc(vn, 4, {1}, {0}, 4000, 555, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
    CHECK(a.mean_work == b.mean_work);
}

TEST_CASE("fit_exponent recovers exact power laws") {
    FitResult f = fit_exponent({{1.0, 2.0}, {2.0, 16.0}, {4.0, 128.0}});
    CHECK(f.slope == Approx(3.0).epsilon(1e-12));
    CHECK(f.intercept == Approx(std::log(2.0)).margin(1e-12));
    CHECK(f.r_squared == Approx(1.0).margin(1e-12));

    FitResult c = fit_exponent({{1.0, 5.0}, {10.0, 5.0}, {100.0, 5.0}});
    CHECK(c.slope == Approx(0.0).margin(1e-12));
    CHECK(c.r_squared == 1.0); // zero residual around a flat line

    try {
        fit_exponent({{1.0, 0.0}, {2.0, 1.0}});
        FAIL("expected NonPositiveValue");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonPositiveValue);
    }
    CHECK_THROWS_AS(fit_exponent({{1.0, 1.0}}), Error); // need two points
}

TEST_CASE("replication_plan sizes runs from the target precision") {
    CHECK(replication_plan(2.0, 0.01, 0.1) == 200000);
    CHECK(replication_plan(0.5, 0.05, 0.2) == 1000);
    CHECK(replication_plan(2.0, 0.1, 1.0) == 200);
    CHECK(replication_plan(1e-9, 1.0, 1.0) == 1);

    auto code_of = [](auto fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::ParseError;
    };
    CHECK(code_of([] { replication_plan(1.0, 0.0, 0.1); }) == Errc::BadArgument);
    CHECK(code_of([] { replication_plan(1.0, 0.1, 1.5); }) == Errc::BadArgument);
    CHECK(code_of([] { replication_plan(0.0, 0.1, 0.1); }) == Errc::BadArgument);
}

TEST_CASE("scaling_study fills rows, fits and a reproducible CSV") {
    auto vn = asym();
    TargetSpec t = target_params(vn, {1, 1});
    std::vector<int> ns{4, 6, 8, 10};
    ScalingReport rep = scaling_study(vn, t, {0, 0}, ns, 2, 2000, 97531);

    REQUIRE(rep.rows.size() == 4);
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const ScalingRow& row = rep.rows[i];
        CHECK(row.n == ns[i]);
        CHECK(std::isfinite(row.exact));
        double exact = overflow_probability(vn, ns[i], {1, 1}, {0, 0});
        CHECK(row.exact == Approx(exact).epsilon(1e-9));
        // Loose sanity: the estimate is within 6 standard errors of truth.
        double se = row.estimate * std::sqrt(row.cv2 / static_cast<double>(rep.m));
        CHECK(std::abs(row.estimate - exact) <= 6.0 * se + 1e-300);
        CHECK(row.mean_work > 0.0);
        CHECK(row.mean_Nn > 0.0);
    }
    CHECK(std::isfinite(rep.fit_mean_Nn.slope));
    CHECK(std::isfinite(rep.fit_mean_work.slope));
    CHECK(std::isfinite(rep.fit_cv2.slope));
    CHECK(std::isfinite(rep.fit_wncv2.slope));
    CHECK(rep.target_cv2 == 1.0);       // asym has a single bottleneck
    CHECK(rep.target_mean_work == 2.0); // beta_V = 1 for the full-population target

    std::ostringstream csv_a, csv_b;
    write_scaling_csv(rep, csv_a);
    ScalingReport again = scaling_study(vn, t, {0, 0}, ns, 2, 2000, 97531);
    write_scaling_csv(again, csv_b);
    CHECK(csv_a.str() == csv_b.str());

    ScalingReport threaded = scaling_study(vn, t, {0, 0}, ns, 2, 2000, 97531, 3);
    std::ostringstream csv_c;
    write_scaling_csv(threaded, csv_c);
    CHECK(csv_a.str() == csv_c.str());

    // Shape of the emitted table.
    std::istringstream in(csv_a.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "n,estimate,exact,cv2,mean_Nn,mean_work");
    int data_rows = 0, fit_rows = 0;
    while (std::getline(in, line)) {
        if (line.rfind("# fit", 0) == 0)
            ++fit_rows;
        else if (!line.empty() && line[0] != '#')
            ++data_rows;
    }
    CHECK(data_rows == 4);
    CHECK(fit_rows == 5); // column header comment plus four fitted series
}

TEST_CASE("format_g9 prints round-trippable decimals") {
    CHECK(format_g9(0.09) == "0.09");
    CHECK(format_g9(1.0) == "1");
    CHECK(format_g9(8.3644e-05).substr(0, 6) == "8.3644");
}
