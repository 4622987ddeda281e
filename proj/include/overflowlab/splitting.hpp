#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

#include "overflowlab/chain.hpp"
#include "overflowlab/errors.hpp"
#include "overflowlab/network.hpp"
#include "overflowlab/rng.hpp"
#include "overflowlab/stats.hpp"

namespace overflowlab {

// Level placement derived from the affine subsolution.  Thresholds on the
// level potential h(x) = sum_i w_i x_i sit log(r) apart so that one level is
// worth exactly one r-fold split:
//   t_j = gamma_V * n - j * log(r),   j = 0 .. L.
//
// The level weights are w_i = gamma_V * v_i, which makes every intermediate
// level a scaled copy of the overflow set {v^T x >= n} and gives the level
// index the closed form ceil(C (n - v^T x)).  Placing levels on the global
// potential (-log rho_i weights) instead looks equivalent at first sight, but its
// level surfaces hold Theta(m^{d-1}) states of equal stationary cost, so the
// particle population at depth m picks up that whole entropy factor and the
// per-run work loses the n^{beta_V + 1} scaling whenever some station in the
// target is not a bottleneck.  With target-directed levels the intermediate
// surviving populations stay Theta(m^{beta_V - 1}), which is the regime the
// complexity statements describe.  For all-bottleneck targets the two
// choices coincide exactly.
struct LevelScheme {
    int n = 0;
    int r = 2;
    TargetSpec target;
    std::vector<double> weights; // gamma_V * v_i, the level potential weights
    double C = 0.0;              // gamma_V / log(r), levels per unit of n
    double log_r = 0.0;
    int L = 0;                   // level index of the start state
    double delta = 1.0;          // level spacing; cancels out of the index formula

    double threshold(int j) const { return target.gamma_V * n - j * log_r; }

    double potential(const State& x) const {
        double h = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) h += weights[i] * x[i];
        return h;
    }
};

namespace detail {

// Ceiling with a nudge so that values a hair above an integer (from float
// rounding of the threshold formula) do not get bumped a whole level up.
inline int nudged_ceil(double q) { return static_cast<int>(std::ceil(q - 1e-12)); }

}  // namespace detail

// max(0, ceil((gamma_V n - h(x)) / log r)), clamped to 0 on the true target.
inline int level_index(const LevelScheme& scheme, const State& x) {
    int vcount = 0;
    for (std::size_t i = 0; i < x.size(); ++i) vcount += scheme.target.v[i] * x[i];
    if (vcount >= scheme.n) return 0;
    double q = (scheme.target.gamma_V * scheme.n - scheme.potential(x)) / scheme.log_r;
    int lvl = detail::nudged_ceil(q);
    return lvl > 0 ? lvl : 0;
}

inline LevelScheme build_levels(const ValidatedNetwork& vn, const TargetSpec& target, int n,
                                int r, const State& x0) {
    require(n >= 1, Errc::BadArgument, "overflow level must be >= 1");
    require(r >= 2, Errc::BadArgument, "splitting factor must be >= 2");
    require(x0.size() == vn.d(), Errc::BadArgument, "start state length must equal d");
    for (int c : x0) require(c >= 0, Errc::BadArgument, "states are non-negative");
    require(target_count(target, x0) < n, Errc::AlreadyInTarget,
            "start state already satisfies the overflow condition");

    LevelScheme s;
    s.n = n;
    s.r = r;
    s.target = target;
    s.weights.resize(vn.d());
    for (std::size_t i = 0; i < vn.d(); ++i)
        s.weights[i] = target.gamma_V * target.v[i];
    s.log_r = std::log(static_cast<double>(r));
    s.C = target.gamma_V / s.log_r;
    s.L = level_index(s, x0);
    return s;
}

// Result of a single splitting run.
struct SplitOutcome {
    std::uint64_t terminal_count = 0;              // N_n, particles that reached the target
    double estimate = 0.0;                         // N_n / r^L
    std::uint64_t work = 0;                        // simulated transitions
    std::vector<std::uint64_t> per_level_survivors; // entry m: particles that advanced m levels
    std::uint64_t max_live_particles = 0;
};

namespace detail {

// Event table flattened into parallel arrays so the simulation loop touches
// nothing but plain ints and doubles.
struct PreparedChain {
    std::vector<double> cuts;
    std::vector<int> need; // station that must be non-empty, -1 for arrivals
    std::vector<int> dec;  // coordinate decremented when applied, -1 none
    std::vector<int> inc;  // coordinate incremented when applied, -1 none
    std::vector<double> dh;
    std::vector<int> dv;
    std::vector<int> dt;

    PreparedChain(const ValidatedNetwork& vn, const std::vector<double>& w,
                  const std::vector<int>& v) {
        EventTable table(vn);
        cuts = table.cuts;
        for (const auto& ev : table.events) {
            need.push_back(ev.required_station());
            dec.push_back(ev.from);
            inc.push_back(ev.to);
            double h = 0.0;
            int tv = 0, tt = 0;
            if (ev.from >= 0) {
                h -= w[static_cast<std::size_t>(ev.from)];
                tv -= v[static_cast<std::size_t>(ev.from)];
                tt -= 1;
            }
            if (ev.to >= 0) {
                h += w[static_cast<std::size_t>(ev.to)];
                tv += v[static_cast<std::size_t>(ev.to)];
                tt += 1;
            }
            dh.push_back(h);
            dv.push_back(tv);
            dt.push_back(tt);
        }
    }

    std::size_t pick(double u) const {
        return static_cast<std::size_t>(
            std::upper_bound(cuts.begin(), cuts.end(), u) - cuts.begin());
    }
};

// A batch of identical siblings waiting on the depth-first stack.  Children
// of one split share their birth state; each gets fresh randomness when it
// is popped.
struct ParticleGroup {
    State x;
    double h;
    int vcount;
    long long total;
    int level;
    std::uint64_t remaining;
};

inline constexpr std::uint64_t kDefaultWorkCap = 1'000'000'000ULL;

inline SplitOutcome run_prepared(const PreparedChain& prep, const LevelScheme& scheme,
                                 const State& x0, SplitMix64& rng,
                                 std::uint64_t work_cap = kDefaultWorkCap) {
    const int L = scheme.L;
    const int n = scheme.n;
    const std::uint64_t r = static_cast<std::uint64_t>(scheme.r);
    const double t0 = scheme.target.gamma_V * n;
    const double inv_logr = 1.0 / scheme.log_r;
    // h >= t_cross detects that threshold t_{level-1} was reached, with the
    // same 1e-12 nudge as level_index so the two never disagree.
    const double cross_nudge = 1e-12 * scheme.log_r;
    const double kNoCross = std::numeric_limits<double>::infinity();

    SplitOutcome out;
    out.per_level_survivors.assign(static_cast<std::size_t>(L) + 1, 0);
    out.per_level_survivors[0] = 1;
    if (L == 0) {
        // The start state is already past the last threshold: nothing to
        // simulate, the single particle counts as arrived.
        out.terminal_count = 1;
        out.estimate = 1.0;
        out.max_live_particles = 1;
        return out;
    }

    std::vector<ParticleGroup> stack;
    std::uint64_t live = 1, max_live = 1;

    State x = x0;
    double h = scheme.potential(x0);
    int vcount = target_count(scheme.target, x0);
    long long total = 0;
    for (int c : x0) total += c;
    int level = L;
    double t_cross = level >= 2 ? scheme.threshold(level - 1) - cross_nudge : kNoCross;

    bool active = true;
    while (active) {
        // Simulate the current particle to its end: death at the empty state
        // or arrival in the target (possibly splitting along the way).
        // A start at the origin is handled by the same loop: the first
        // transition happens before the death check, so a blocked first
        // event (staying at 0) dies, matching T_{0} = inf{k >= 1}.
        while (true) {
            require(out.work < work_cap, Errc::RunawayRun,
                    "splitting run exceeded the transition budget");
            ++out.work;
            std::size_t k = prep.pick(rng.u01());
            int need = prep.need[k];
            bool applied = !(need >= 0 && x[static_cast<std::size_t>(need)] == 0);
            if (applied) {
                if (prep.dec[k] >= 0) --x[static_cast<std::size_t>(prep.dec[k])];
                if (prep.inc[k] >= 0) ++x[static_cast<std::size_t>(prep.inc[k])];
                h += prep.dh[k];
                vcount += prep.dv[k];
                total += prep.dt[k];
            }
            if (total == 0) break; // death
            if (vcount >= n) {
                // Final crossing: promotion through every remaining level
                // down to 0 splits r-fold at each, and all resulting
                // particles are terminal.
                std::uint64_t mult = 1;
                for (int c = 1; c <= level; ++c) {
                    mult *= r;
                    out.per_level_survivors[static_cast<std::size_t>(L - level + c)] += mult;
                }
                out.terminal_count += mult;
                break;
            }
            if (h >= t_cross && applied && prep.dh[k] > 0.0) {
                double q = (t0 - h) * inv_logr;
                int nl = nudged_ceil(q);
                if (nl < 1) nl = 1;
                if (nl > level - 1) nl = level - 1;
                int crossings = level - nl;
                require(crossings < 62, Errc::RunawayRun, "split multiplicity overflow");
                std::uint64_t mult = 1;
                for (int c = 1; c <= crossings; ++c) {
                    mult *= r;
                    out.per_level_survivors[static_cast<std::size_t>(L - level + c)] += mult;
                }
                live += mult - 1;
                if (live > max_live) max_live = live;
                if (mult > 1)
                    stack.push_back({x, h, vcount, total, nl, mult - 1});
                level = nl;
                t_cross = level >= 2 ? scheme.threshold(level - 1) - cross_nudge : kNoCross;
            }
        }

        --live;
        if (stack.empty()) {
            active = false;
        } else {
            ParticleGroup& top = stack.back();
            x = top.x;
            h = top.h;
            vcount = top.vcount;
            total = top.total;
            level = top.level;
            t_cross = level >= 2 ? scheme.threshold(level - 1) - cross_nudge : kNoCross;
            if (--top.remaining == 0) stack.pop_back();
        }
    }

    double denom = 1.0;
    for (int c = 0; c < L; ++c) denom *= static_cast<double>(r);
    out.estimate = static_cast<double>(out.terminal_count) / denom;
    out.max_live_particles = max_live;
    return out;
}

}  // namespace detail

// One run of the splitting estimator from x0 under the given scheme.
inline SplitOutcome run_splitting(const ValidatedNetwork& vn, const LevelScheme& scheme,
                                  const State& x0, SplitMix64& rng,
                                  std::uint64_t work_cap = detail::kDefaultWorkCap) {
    require(x0.size() == vn.d(), Errc::BadArgument, "start state length must equal d");
    detail::PreparedChain prep(vn, scheme.weights, scheme.target.v);
    return detail::run_prepared(prep, scheme, x0, rng, work_cap);
}

// Minimal per-replication record kept by the batch driver.
struct RunRecord {
    std::uint64_t terminal_count = 0;
    std::uint64_t work = 0;
};

// m independent replications on streams derived from (master_seed, index).
// Records land in their replication's slot, so the outcome is identical for
// any worker count; workers pull indices from a shared counter.
inline std::vector<RunRecord> run_replications(const ValidatedNetwork& vn,
                                               const LevelScheme& scheme, const State& x0,
                                               std::size_t m, std::uint64_t master_seed,
                                               unsigned threads = 1) {
    require(m >= 1, Errc::BadArgument, "need at least one replication");
    detail::PreparedChain prep(vn, scheme.weights, scheme.target.v);
    std::vector<RunRecord> records(m);

    auto worker_loop = [&](std::atomic<std::size_t>& counter, std::exception_ptr& err) {
        try {
            for (;;) {
                std::size_t i = counter.fetch_add(1);
                if (i >= m) return;
                SplitMix64 rng = derive_stream(master_seed, i);
                SplitOutcome o = detail::run_prepared(prep, scheme, x0, rng);
                records[i] = {o.terminal_count, o.work};
            }
        } catch (...) {
            err = std::current_exception();
        }
    };

    if (threads <= 1) {
        std::atomic<std::size_t> counter{0};
        std::exception_ptr err;
        worker_loop(counter, err);
        if (err) std::rethrow_exception(err);
    } else {
        std::atomic<std::size_t> counter{0};
        std::vector<std::exception_ptr> errs(threads);
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] { worker_loop(counter, errs[t]); });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    return records;
}

// r^L as a double (values up to r^L ~ 2^66 exceed 64-bit integers).
inline double level_weight(const LevelScheme& scheme) {
    double denom = 1.0;
    for (int c = 0; c < scheme.L; ++c) denom *= static_cast<double>(scheme.r);
    return denom;
}

// Full estimator: m replications summarized into mean / variance / cv^2 and
// the work statistics the complexity bounds are stated in.
inline ReplicationStats estimate(const ValidatedNetwork& vn, const LevelScheme& scheme,
                                 const State& x0, std::size_t m, std::uint64_t master_seed,
                                 unsigned threads = 1) {
    require(m >= 2, Errc::BadArgument, "need at least two replications");
    auto records = run_replications(vn, scheme, x0, m, master_seed, threads);
    const double denom = level_weight(scheme);
    std::vector<double> values(m), works(m);
    for (std::size_t i = 0; i < m; ++i) {
        values[i] = static_cast<double>(records[i].terminal_count) / denom;
        works[i] = static_cast<double>(records[i].work);
    }
    return summarize(values, works);
}

}  // namespace overflowlab
