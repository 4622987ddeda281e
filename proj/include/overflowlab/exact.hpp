#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "overflowlab/chain.hpp"
#include "overflowlab/errors.hpp"
#include "overflowlab/network.hpp"

namespace overflowlab {

// Upper bound on enumerated states; the environment variable
// OVERFLOWLAB_MAX_STATES overrides the built-in default.
inline std::size_t configured_state_limit() {
    const char* env = std::getenv("OVERFLOWLAB_MAX_STATES");
    if (env == nullptr || *env == '\0') return 5'000'000;
    char* end = nullptr;
    unsigned long long parsed = std::strtoull(env, &end, 10);
    require(end != env && *end == '\0', Errc::BadArgument,
            std::string("OVERFLOWLAB_MAX_STATES is not a non-negative integer: ") + env);
    return static_cast<std::size_t>(parsed);
}

// Bijection between the transient states {x : v^T x < n, x_i <= cap_i for
// non-target i, x != 0} and contiguous indices, in lexicographic order.
struct StateIndexer {
    int n = 0;
    std::vector<int> v;
    std::vector<int> caps;            // consulted only where v_i == 0
    std::vector<State> states;        // lexicographically sorted

    std::size_t size() const { return states.size(); }

    const State& state(std::size_t idx) const { return states[idx]; }

    // Index of a state, or npos when it is not transient.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t index(const State& x) const {
        auto it = std::lower_bound(states.begin(), states.end(), x);
        if (it == states.end() || *it != x) return npos;
        return static_cast<std::size_t>(it - states.begin());
    }
};

inline StateIndexer enumerate_states(int n, const std::vector<int>& v,
                                     const std::vector<int>& caps,
                                     std::size_t max_states = 0) {
    const std::size_t d = v.size();
    require(n >= 1, Errc::BadArgument, "overflow level must be >= 1");
    require(caps.size() == d, Errc::BadArgument, "caps length must equal d");
    int target_stations = 0;
    for (std::size_t i = 0; i < d; ++i) {
        require(v[i] == 0 || v[i] == 1, Errc::BadArgument, "target entries must be 0 or 1");
        if (v[i] == 1) ++target_stations;
        else
            require(caps[i] >= 0, Errc::BadArgument,
                    "non-target station " + std::to_string(i + 1) + " needs a cap");
    }
    require(target_stations >= 1, Errc::EmptyTarget, "target vector has no station selected");

    // Count before allocating: C(n-1+k, k) target combinations times the
    // box volume of the capped stations, minus the excluded origin.
    const std::size_t limit = max_states ? max_states : configured_state_limit();
    double count = 1.0;
    for (int j = 1; j <= target_stations; ++j)
        count *= static_cast<double>(n - 1 + j) / static_cast<double>(j);
    for (std::size_t i = 0; i < d; ++i)
        if (v[i] == 0) count *= static_cast<double>(caps[i]) + 1.0;
    count -= 1.0;
    require(count <= static_cast<double>(limit), Errc::TooLarge,
            "state space needs about " + std::to_string(static_cast<double>(count)) +
                " states, limit is " + std::to_string(limit));

    StateIndexer ix;
    ix.n = n;
    ix.v = v;
    ix.caps = caps;
    ix.states.reserve(static_cast<std::size_t>(count));
    State x(d, 0);
    // Depth-first in coordinate order yields lexicographic output directly.
    auto emit = [&](auto&& self, std::size_t coord, int budget) -> void {
        if (coord == d) {
            bool origin = std::all_of(x.begin(), x.end(), [](int c) { return c == 0; });
            if (!origin) ix.states.push_back(x);
            return;
        }
        int hi = v[coord] == 1 ? budget : caps[coord];
        for (int c = 0; c <= hi; ++c) {
            x[coord] = c;
            self(self, coord + 1, v[coord] == 1 ? budget - c : budget);
        }
        x[coord] = 0;
    };
    emit(emit, 0, n - 1);
    return ix;
}

// Sparse representation of p(x) = rhs + self * p(x) + sum entries * p(y),
// one row per transient state.
struct LinearSystem {
    struct Row {
        double rhs = 0.0;  // mass absorbed by the target (and taboo credit)
        double self = 0.0; // K(x, x)
        std::vector<std::pair<std::size_t, double>> entries;
    };
    StateIndexer indexer;
    std::vector<Row> rows;
};

struct SystemOptions {
    std::vector<int> caps;      // empty when every station is in the target
    std::optional<State> taboo; // state pinned to value 0 (regeneration systems)
    double zero_value = 0.0;    // value credited for transitions into the origin
    std::size_t max_states = 0; // 0 = environment / default limit
};

namespace detail {

// Reflecting truncation: a jump past a non-target cap is redirected back to
// the capped state.
inline State clamp_to_caps(State y, const std::vector<int>& v, const std::vector<int>& caps) {
    if (!caps.empty())
        for (std::size_t i = 0; i < y.size(); ++i)
            if (v[i] == 0 && y[i] > caps[i]) y[i] = caps[i];
    return y;
}

inline bool in_target(const std::vector<int>& v, const State& y, int n) {
    int s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += v[i] * y[i];
    return s >= n;
}

inline bool is_origin(const State& y) {
    return std::all_of(y.begin(), y.end(), [](int c) { return c == 0; });
}

}  // namespace detail

inline LinearSystem first_passage_system(const ValidatedNetwork& vn, int n,
                                         const std::vector<int>& v,
                                         const SystemOptions& options) {
    const std::size_t d = vn.d();
    require(v.size() == d, Errc::BadArgument, "target vector length must equal d");
    std::vector<int> caps = options.caps;
    if (caps.empty()) {
        for (std::size_t i = 0; i < d; ++i)
            require(v[i] == 1, Errc::BadArgument,
                    "caps are required when some station is outside the target");
        caps.assign(d, 0);
    }

    LinearSystem sys;
    sys.indexer = enumerate_states(n, v, caps, options.max_states);
    sys.rows.resize(sys.indexer.size());

    const auto events = increment_table(vn);
    for (std::size_t i = 0; i < sys.indexer.size(); ++i) {
        const State& x = sys.indexer.state(i);
        if (options.taboo && x == *options.taboo) continue; // row pinned to p = 0
        LinearSystem::Row& row = sys.rows[i];
        for (const auto& ev : events) {
            State y = x;
            State delta = constrain(x, ev);
            for (std::size_t k = 0; k < d; ++k) y[k] += delta[k];
            y = detail::clamp_to_caps(std::move(y), v, caps);
            if (detail::in_target(v, y, n)) {
                row.rhs += ev.probability;
            } else if (detail::is_origin(y)) {
                row.rhs += ev.probability * options.zero_value;
            } else if (y == x) {
                row.self += ev.probability;
            } else {
                std::size_t j = sys.indexer.index(y);
                require(j != StateIndexer::npos, Errc::BadArgument,
                        "internal: successor escaped the enumerated state space");
                row.entries.emplace_back(j, ev.probability);
            }
        }
        // Merge duplicate successors (several events can land on one state).
        std::sort(row.entries.begin(), row.entries.end());
        std::size_t w = 0;
        for (std::size_t rIdx = 0; rIdx < row.entries.size(); ++rIdx) {
            if (w > 0 && row.entries[w - 1].first == row.entries[rIdx].first)
                row.entries[w - 1].second += row.entries[rIdx].second;
            else
                row.entries[w++] = row.entries[rIdx];
        }
        row.entries.resize(w);
    }
    return sys;
}

inline LinearSystem first_passage_system(const ValidatedNetwork& vn, int n,
                                         const std::vector<int>& v,
                                         const std::vector<int>& caps) {
    SystemOptions opt;
    opt.caps = caps;
    return first_passage_system(vn, n, v, opt);
}

// Lexicographic Gauss-Seidel sweeps from the zero vector.  All coefficients
// are non-negative, so iterates increase monotonically toward the solution;
// the stop rule is the componentwise relative residual.
inline std::vector<double> solve_gauss_seidel(const LinearSystem& sys, double tol = 1e-12,
                                              std::size_t max_sweeps = 1'000'000) {
    const std::size_t N = sys.rows.size();
    std::vector<double> p(N, 0.0);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        for (std::size_t i = 0; i < N; ++i) {
            const auto& row = sys.rows[i];
            double acc = row.rhs;
            for (const auto& [j, prob] : row.entries) acc += prob * p[j];
            p[i] = acc / (1.0 - row.self);
        }
        worst = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const auto& row = sys.rows[i];
            double acc = row.rhs + row.self * p[i];
            for (const auto& [j, prob] : row.entries) acc += prob * p[j];
            double denom = std::max(p[i], std::numeric_limits<double>::min());
            double rel = std::abs(p[i] - acc) / denom;
            worst = std::max(worst, rel);
        }
        if (worst <= tol) return p;
    }
    fail(Errc::NoConvergence, "Gauss-Seidel missed tolerance after " +
                                  std::to_string(max_sweeps) +
                                  " sweeps; relative residual " + std::to_string(worst));
}

// Direct solve via LU.  On these M-matrix systems elimination is free of
// cancellation, which preserves componentwise relative accuracy down to
// probabilities near 1e-12; this is what the tight oracle comparisons need.
inline std::vector<double> solve_dense(const LinearSystem& sys) {
    const Eigen::Index N = static_cast<Eigen::Index>(sys.rows.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd b(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto& row = sys.rows[static_cast<std::size_t>(i)];
        A(i, i) = 1.0 - row.self;
        for (const auto& [j, prob] : row.entries) A(i, static_cast<Eigen::Index>(j)) -= prob;
        b(i) = row.rhs;
    }
    Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(b);
    std::vector<double> p(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i) p[static_cast<std::size_t>(i)] = sol(i);
    return p;
}

// Dispatch: direct elimination while the system is small enough to afford
// it, iterative sweeps beyond that.
inline std::vector<double> solve_system(const LinearSystem& sys, double tol = 1e-12) {
    if (sys.rows.size() <= 2000) return solve_dense(sys);
    return solve_gauss_seidel(sys, tol);
}

namespace detail {

// Reads the overflow probability at x out of a solved system, applying the
// first-transition sum when x is the origin or a taboo state.
inline double value_at(const ValidatedNetwork& vn, const LinearSystem& sys,
                       const std::vector<double>& p, const State& x, double zero_value) {
    const int n = sys.indexer.n;
    const auto& v = sys.indexer.v;
    if (in_target(v, x, n)) return 1.0;
    if (!is_origin(x)) {
        std::size_t i = sys.indexer.index(x);
        require(i != StateIndexer::npos, Errc::BadArgument,
                "state lies outside the enumerated space");
        return p[i];
    }
    double acc = 0.0;
    for (const auto& [y_raw, prob] : kernel_row(vn, x)) {
        State y = clamp_to_caps(y_raw, v, sys.indexer.caps);
        if (in_target(v, y, n)) acc += prob;
        else if (is_origin(y)) acc += prob * zero_value;
        else acc += prob * p[sys.indexer.index(y)];
    }
    return acc;
}

inline double solve_once(const ValidatedNetwork& vn, int n, const std::vector<int>& v,
                         const std::vector<int>& caps, const State& x, double solver_tol,
                         std::size_t max_states) {
    SystemOptions opt;
    opt.caps = caps;
    opt.max_states = max_states;
    LinearSystem sys = first_passage_system(vn, n, v, opt);
    std::vector<double> p = solve_system(sys, solver_tol);
    return value_at(vn, sys, p, x, 0.0);
}

}  // namespace detail

// p_n^V(x): probability that v^T Q reaches n before the network empties,
// starting from x, with T_{0} = inf{k >= 1} so a start at the origin is the
// probability for one full busy cycle.  Stations outside the target make the
// state space infinite; their caps are doubled until the answer stops
// moving by more than tol relatively.
inline double overflow_probability(const ValidatedNetwork& vn, int n, const std::vector<int>& v,
                                   const State& x, double tol = 1e-9,
                                   std::size_t max_states = 0) {
    const std::size_t d = vn.d();
    require(v.size() == d && x.size() == d, Errc::BadArgument,
            "target and state lengths must equal d");
    if (detail::in_target(v, x, n)) return 1.0;

    bool all_target = std::all_of(v.begin(), v.end(), [](int b) { return b == 1; });
    const double solver_tol = 1e-12;
    if (all_target) return detail::solve_once(vn, n, v, {}, x, solver_tol, max_states);

    std::vector<int> caps(d, 0);
    for (std::size_t i = 0; i < d; ++i)
        if (v[i] == 0) caps[i] = std::max({2 * n, 2 * x[i] + 2, 16});
    double prev = detail::solve_once(vn, n, v, caps, x, solver_tol, max_states);
    for (int round = 0; round < 16; ++round) {
        for (std::size_t i = 0; i < d; ++i)
            if (v[i] == 0) caps[i] *= 2;
        double cur = detail::solve_once(vn, n, v, caps, x, solver_tol, max_states);
        double denom = std::max(std::abs(cur), std::numeric_limits<double>::min());
        if (std::abs(cur - prev) / denom < tol) return cur;
        prev = cur;
    }
    fail(Errc::TruncationNoConverge,
         "doubling the non-target caps never stabilized the probability");
}

// Both sides of the busy-cycle identity
//   p_n^V(x) = P_x(reach target before 0, no return to x)
//            / P_x(reach target or 0 before returning to x),
// each evaluated by an independent linear solve with x made taboo.  The
// same truncation caps are used throughout so the identity is exact for the
// chain actually solved.
inline std::pair<double, double> regeneration_check(const ValidatedNetwork& vn, int n,
                                                    const std::vector<int>& v, const State& x) {
    const std::size_t d = vn.d();
    require(v.size() == d && x.size() == d, Errc::BadArgument,
            "target and state lengths must equal d");
    int vx = 0;
    for (std::size_t i = 0; i < d; ++i) vx += v[i] * x[i];
    require(vx > 0 && vx < n, Errc::BadArgument,
            "regeneration check needs 0 < v^T x < n");

    std::vector<int> caps(d, 0);
    bool all_target = true;
    for (std::size_t i = 0; i < d; ++i)
        if (v[i] == 0) {
            all_target = false;
            caps[i] = std::max({4 * n, 2 * x[i] + 2, 32});
        }

    SystemOptions base;
    if (!all_target) base.caps = caps;

    auto first_step_sum = [&](const LinearSystem& sys, const std::vector<double>& p,
                              double zero_value) {
        double acc = 0.0;
        for (const auto& [y_raw, prob] : kernel_row(vn, x)) {
            State y = detail::clamp_to_caps(y_raw, v, sys.indexer.caps);
            if (detail::in_target(v, y, n)) acc += prob;
            else if (detail::is_origin(y)) acc += prob * zero_value;
            else if (y == x) acc += 0.0; // returning to x immediately fails the taboo
            else acc += prob * p[sys.indexer.index(y)];
        }
        return acc;
    };

    LinearSystem plain = first_passage_system(vn, n, v, base);
    std::vector<double> p_plain = solve_system(plain);
    double lhs = detail::value_at(vn, plain, p_plain, x, 0.0);

    SystemOptions taboo_num = base;
    taboo_num.taboo = x;
    taboo_num.zero_value = 0.0;
    LinearSystem sys_num = first_passage_system(vn, n, v, taboo_num);
    double num = first_step_sum(sys_num, solve_system(sys_num), 0.0);

    SystemOptions taboo_den = base;
    taboo_den.taboo = x;
    taboo_den.zero_value = 1.0;
    LinearSystem sys_den = first_passage_system(vn, n, v, taboo_den);
    double den = first_step_sum(sys_den, solve_system(sys_den), 1.0);

    require(den > 0.0, Errc::NonPositiveValue, "regeneration denominator is zero");
    return {lhs, num / den};
}

}  // namespace overflowlab
