#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "overflowlab/chain.hpp"
#include "overflowlab/errors.hpp"
#include "overflowlab/network.hpp"

namespace overflowlab {

// One row of the time-reversed kernel K~(y, x) = K(x, y) pi(x) / pi(y).
struct ReversedKernelRow {
    State origin;
    std::vector<std::pair<State, double>> entries; // predecessors in lexicographic order
};

namespace detail {

// pi(x)/pi(y) for states differing in at most two coordinates; computed from
// the utilization ratios directly so it stays O(1) and never underflows.
inline double pmf_ratio(const ValidatedNetwork& vn, const State& x, const State& y) {
    double r = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        int diff = x[i] - y[i];
        if (diff == 0) continue;
        r *= std::pow(vn.rho[i], diff);
    }
    return r;
}

// Probability K(x, y) of the single transition x -> y, summing every event
// whose constrained displacement realizes it (several blocked events can
// stack on the self-loop).
inline double forward_prob(const ValidatedNetwork& vn, const std::vector<IncrementEvent>& events,
                           const State& x, const State& y) {
    double p = 0.0;
    for (const auto& ev : events) {
        bool match = true;
        State delta = constrain(x, ev);
        for (std::size_t k = 0; k < x.size(); ++k)
            if (x[k] + delta[k] != y[k]) { match = false; break; }
        if (match) p += ev.probability;
    }
    return p;
}

}  // namespace detail

// Builds K~(y, .) by inverting displacements: the only candidate predecessors
// are y - w for each raw increment w, plus y itself for self-loops.
inline ReversedKernelRow reversed_kernel_row(const ValidatedNetwork& vn, const State& y) {
    require(y.size() == vn.d(), Errc::BadArgument, "state length must equal d");
    for (int c : y) require(c >= 0, Errc::BadArgument, "states are non-negative");

    const auto events = increment_table(vn);
    std::map<State, double> row;
    auto consider = [&](const State& x) {
        if (row.count(x)) return;
        double fwd = detail::forward_prob(vn, events, x, y);
        if (fwd > 0.0) row[x] = fwd * detail::pmf_ratio(vn, x, y);
    };

    for (const auto& ev : events) {
        State x = y;
        bool ok = true;
        if (ev.from >= 0 && ++x[static_cast<std::size_t>(ev.from)] < 0) ok = false;
        if (ev.to >= 0 && --x[static_cast<std::size_t>(ev.to)] < 0) ok = false;
        if (ok) consider(x);
    }
    consider(y);

    ReversedKernelRow out;
    out.origin = y;
    out.entries.assign(row.begin(), row.end());
    return out;
}

// The closed-form reversed Jackson network: service rates unchanged,
// arrivals fed by the forward exit flows, routing reversed through the
// throughputs.  Validating the result reproduces the same rho and pi.
inline NetworkSpec reversed_network(const ValidatedNetwork& vn) {
    const std::size_t d = vn.d();
    NetworkSpec rev;
    rev.lambda.resize(d);
    rev.mu = vn.spec.mu;
    rev.routing.assign(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
        rev.lambda[i] = vn.phi[i] * vn.spec.exit_prob(i);
        for (std::size_t j = 0; j < d; ++j)
            rev.routing[i][j] = vn.phi[j] * vn.spec.routing[j][i] / vn.phi[i];
    }
    return rev;
}

}  // namespace overflowlab
