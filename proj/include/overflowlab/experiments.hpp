#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "overflowlab/errors.hpp"
#include "overflowlab/exact.hpp"
#include "overflowlab/network.hpp"
#include "overflowlab/rng.hpp"
#include "overflowlab/splitting.hpp"
#include "overflowlab/stats.hpp"

namespace overflowlab {

// Crude Monte Carlo baseline: m Bernoulli trials of the raw chain run from
// x0 until the target or the empty state, with the same origin convention
// as the splitting estimator.
inline ReplicationStats naive_mc(const ValidatedNetwork& vn, int n, const std::vector<int>& v,
                                 const State& x0, std::size_t m, std::uint64_t master_seed,
                                 unsigned threads = 1) {
    require(m >= 2, Errc::BadArgument, "need at least two replications");
    require(v.size() == vn.d() && x0.size() == vn.d(), Errc::BadArgument,
            "target and state lengths must equal d");
    require(n >= 1, Errc::BadArgument, "overflow level must be >= 1");

    int vc0 = 0;
    long long tot0 = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        require(x0[i] >= 0, Errc::BadArgument, "states are non-negative");
        vc0 += v[i] * x0[i];
        tot0 += x0[i];
    }
    if (vc0 >= n) {
        // Already in the target: every trial succeeds with no work.
        std::vector<double> ones(m, 1.0), zeros(m, 0.0);
        return summarize(ones, zeros);
    }

    detail::PreparedChain prep(vn, vn.potential_weights, v);
    std::vector<double> values(m), works(m);

    auto one_trial = [&](SplitMix64& rng, double& value, double& work_out) {
        State x = x0;
        int vc = vc0;
        long long tot = tot0;
        std::uint64_t work = 0;
        for (;;) {
            require(work < detail::kDefaultWorkCap, Errc::RunawayRun,
                    "Monte Carlo trial exceeded the transition budget");
            ++work;
            std::size_t k = prep.pick(rng.u01());
            int need = prep.need[k];
            if (!(need >= 0 && x[static_cast<std::size_t>(need)] == 0)) {
                if (prep.dec[k] >= 0) --x[static_cast<std::size_t>(prep.dec[k])];
                if (prep.inc[k] >= 0) ++x[static_cast<std::size_t>(prep.inc[k])];
                vc += prep.dv[k];
                tot += prep.dt[k];
            }
            if (tot == 0) { value = 0.0; break; }
            if (vc >= n) { value = 1.0; break; }
        }
        work_out = static_cast<double>(work);
    };

    auto worker_loop = [&](std::atomic<std::size_t>& counter, std::exception_ptr& err) {
        try {
            for (;;) {
                std::size_t i = counter.fetch_add(1);
                if (i >= m) return;
                SplitMix64 rng = derive_stream(master_seed, i);
                one_trial(rng, values[i], works[i]);
            }
        } catch (...) {
            err = std::current_exception();
        }
    };

    std::atomic<std::size_t> counter{0};
    if (threads <= 1) {
        std::exception_ptr err;
        worker_loop(counter, err);
        if (err) std::rethrow_exception(err);
    } else {
        std::vector<std::exception_ptr> errs(threads);
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] { worker_loop(counter, errs[t]); });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    return summarize(values, works);
}

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares of log(value) on log(n).
inline FitResult fit_exponent(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 2, Errc::BadArgument, "need at least two points to fit");
    const double m = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    std::vector<double> lx(points.size()), ly(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(points[i].first > 0.0 && points[i].second > 0.0, Errc::NonPositiveValue,
                "log-log fit needs positive abscissas and values");
        lx[i] = std::log(points[i].first);
        ly[i] = std::log(points[i].second);
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    require(sxx > 0.0, Errc::BadArgument, "fit abscissas are all equal");

    FitResult f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (syy == 0.0) {
        f.r_squared = 1.0; // constant data: the flat line fits perfectly
    } else {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double resid = ly[i] - (f.intercept + f.slope * lx[i]);
            ss_res += resid * resid;
        }
        f.r_squared = 1.0 - ss_res / syy;
    }
    return f;
}

// Chebyshev replication count: m = ceil(eps^-2 delta^-1 cv2) guarantees
// relative error <= eps with probability >= 1 - delta.
inline std::uint64_t replication_plan(double cv2, double epsilon, double delta) {
    require(cv2 > 0.0, Errc::BadArgument, "cv^2 must be positive");
    require(epsilon > 0.0 && epsilon <= 1.0, Errc::BadArgument, "epsilon must lie in (0, 1]");
    require(delta > 0.0 && delta <= 1.0, Errc::BadArgument, "delta must lie in (0, 1]");
    double q = cv2 / (epsilon * epsilon * delta);
    // Nudge against float rounding pushing an exact integer quotient up.
    double m = std::ceil(q - 1e-12 * std::max(1.0, q));
    return m < 1.0 ? 1 : static_cast<std::uint64_t>(m);
}

struct ScalingRow {
    int n = 0;
    double estimate = 0.0;
    double exact = std::numeric_limits<double>::quiet_NaN(); // NaN when unavailable
    double cv2 = 0.0;
    double mean_Nn = 0.0;
    double mean_work = 0.0;
    double wncv2 = 0.0;
};

// Everything a complexity plot needs: per-n measurements plus the four
// fitted exponents alongside their theoretical targets.
struct ScalingReport {
    std::vector<ScalingRow> rows;
    FitResult fit_mean_Nn, fit_mean_work, fit_cv2, fit_wncv2;
    double target_mean_Nn = 0.0;  // beta_V - 1 (two-sided Theta)
    double target_mean_work = 0.0; // beta_V + 1 (upper bound)
    double target_cv2 = 0.0;       // beta (upper bound)
    double target_wncv2 = 0.0;     // beta_V + beta + 1 (upper bound)
    int beta = 0;
    int beta_V = 0;
    double gamma_V = 0.0;
    int r = 2;
    std::size_t m = 0;
    std::uint64_t master_seed = 0;
};

// Runs the splitting estimator across the n grid with a fixed seed schedule
// (per-n sub-seed derived from master_seed and the grid position) and fits
// all four exponents.  Exact values come along wherever the solver fits in
// its state budget.
inline ScalingReport scaling_study(const ValidatedNetwork& vn, const TargetSpec& target,
                                   const State& x0, const std::vector<int>& n_list, int r,
                                   std::size_t m, std::uint64_t master_seed,
                                   unsigned threads = 1) {
    require(n_list.size() >= 4, Errc::BadArgument, "scaling study needs at least four levels");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        require(n_list[i] > n_list[i - 1], Errc::BadArgument, "levels must be increasing");

    ScalingReport report;
    report.beta = vn.beta;
    report.beta_V = target.beta_V;
    report.gamma_V = target.gamma_V;
    report.r = r;
    report.m = m;
    report.master_seed = master_seed;
    report.target_mean_Nn = target.beta_V - 1.0;
    report.target_mean_work = target.beta_V + 1.0;
    report.target_cv2 = vn.beta;
    report.target_wncv2 = target.beta_V + vn.beta + 1.0;

    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        const int n = n_list[idx];
        LevelScheme scheme = build_levels(vn, target, n, r, x0);
        std::uint64_t sub_seed = derive_stream(master_seed, idx).next();
        auto records = run_replications(vn, scheme, x0, m, sub_seed, threads);

        const double denom = level_weight(scheme);
        std::vector<double> values(m), works(m);
        double n_sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            values[i] = static_cast<double>(records[i].terminal_count) / denom;
            works[i] = static_cast<double>(records[i].work);
            n_sum += static_cast<double>(records[i].terminal_count);
        }
        ReplicationStats stats = summarize(values, works);

        ScalingRow row;
        row.n = n;
        row.estimate = stats.mean;
        row.cv2 = stats.cv2;
        row.mean_Nn = n_sum / static_cast<double>(m);
        row.mean_work = stats.mean_work;
        row.wncv2 = stats.work_normalized_cv2;
        try {
            row.exact = overflow_probability(vn, n, target.v, x0);
        } catch (const Error& e) {
            if (e.code() != Errc::TooLarge && e.code() != Errc::TruncationNoConverge) throw;
        }
        report.rows.push_back(row);
    }

    auto collect = [&](auto&& field) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : report.rows) pts.emplace_back(row.n, field(row));
        return pts;
    };
    report.fit_mean_Nn = fit_exponent(collect([](const ScalingRow& r_) { return r_.mean_Nn; }));
    report.fit_mean_work =
        fit_exponent(collect([](const ScalingRow& r_) { return r_.mean_work; }));
    report.fit_cv2 = fit_exponent(collect([](const ScalingRow& r_) { return r_.cv2; }));
    report.fit_wncv2 = fit_exponent(collect([](const ScalingRow& r_) { return r_.wncv2; }));
    return report;
}

// Shortest float rendering with 9 significant digits, shared by every CSV
// writer so reports are reproducible byte for byte.
inline std::string format_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void write_scaling_csv(const ScalingReport& report, std::ostream& out) {
    out << "n,estimate,exact,cv2,mean_Nn,mean_work\n";
    for (const auto& row : report.rows) {
        out << row.n << ',' << format_g9(row.estimate) << ',';
        if (!std::isnan(row.exact)) out << format_g9(row.exact);
        out << ',' << format_g9(row.cv2) << ',' << format_g9(row.mean_Nn) << ','
            << format_g9(row.mean_work) << '\n';
    }
    out << "# fit,quantity,slope,intercept,r_squared,target_exponent\n";
    auto fit_line = [&](const char* name, const FitResult& f, double target) {
        out << "# fit," << name << ',' << format_g9(f.slope) << ',' << format_g9(f.intercept)
            << ',' << format_g9(f.r_squared) << ',' << format_g9(target) << '\n';
    };
    fit_line("mean_Nn", report.fit_mean_Nn, report.target_mean_Nn);
    fit_line("mean_work", report.fit_mean_work, report.target_mean_work);
    fit_line("cv2", report.fit_cv2, report.target_cv2);
    fit_line("wncv2", report.fit_wncv2, report.target_wncv2);
}

}  // namespace overflowlab
