#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "overflowlab/errors.hpp"
#include "overflowlab/network.hpp"

namespace overflowlab {

// One possible transition of the embedded chain, before the empty-station
// constraint is applied.
struct IncrementEvent {
    enum class Kind { Arrival, Transfer, Departure };
    Kind kind;
    int from;           // serving station for Transfer/Departure, -1 for Arrival
    int to;             // receiving station for Arrival/Transfer, -1 for Departure
    double probability; // lambda_i, mu_i P_ij, or mu_i P_i0

    // Station whose queue must be non-empty for the event to act.
    int required_station() const { return from; }
};

// Full increment distribution of the normalized network, in the fixed order
// arrivals, transfers (lexicographic), departures.  Zero-probability events
// are dropped so inverse-transform sampling never selects them.
inline std::vector<IncrementEvent> increment_table(const ValidatedNetwork& vn) {
    const int d = static_cast<int>(vn.d());
    std::vector<IncrementEvent> events;
    for (int i = 0; i < d; ++i)
        if (vn.spec.lambda[static_cast<std::size_t>(i)] > 0.0)
            events.push_back({IncrementEvent::Kind::Arrival, -1, i,
                              vn.spec.lambda[static_cast<std::size_t>(i)]});
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double p = vn.spec.mu[static_cast<std::size_t>(i)] *
                       vn.spec.routing[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (p > 0.0) events.push_back({IncrementEvent::Kind::Transfer, i, j, p});
        }
    for (int i = 0; i < d; ++i) {
        double p = vn.spec.mu[static_cast<std::size_t>(i)] * vn.spec.exit_prob(i);
        if (p > 0.0) events.push_back({IncrementEvent::Kind::Departure, i, -1, p});
    }
    return events;
}

// The constrained mapping: the displacement actually applied at state x.
// Service events of an empty station are blocked and displace nothing.
inline State constrain(const State& x, const IncrementEvent& ev) {
    State delta(x.size(), 0);
    int req = ev.required_station();
    if (req >= 0 && x[static_cast<std::size_t>(req)] == 0) return delta;
    if (ev.from >= 0) delta[static_cast<std::size_t>(ev.from)] -= 1;
    if (ev.to >= 0) delta[static_cast<std::size_t>(ev.to)] += 1;
    return delta;
}

// Event table plus cumulative cuts, the reusable piece of the sampler.
struct EventTable {
    std::vector<IncrementEvent> events;
    std::vector<double> cuts; // cuts[k] = sum of probabilities 0..k; back() == 1

    explicit EventTable(const ValidatedNetwork& vn) : events(increment_table(vn)) {
        cuts.reserve(events.size());
        double c = 0.0;
        for (const auto& ev : events) { c += ev.probability; cuts.push_back(c); }
        require(std::abs(c - 1.0) <= 1e-9, Errc::BadArgument,
                "event probabilities do not sum to 1");
        cuts.back() = 1.0;
    }

    // Index of the event selected by a uniform draw u in [0,1).
    std::size_t pick(double u) const {
        return static_cast<std::size_t>(
            std::upper_bound(cuts.begin(), cuts.end(), u) - cuts.begin());
    }
};

// One transition of the embedded chain, deterministic given the draw.
inline State step(const EventTable& table, const State& x, double u) {
    const IncrementEvent& ev = table.events[table.pick(u)];
    State y = x;
    int req = ev.required_station();
    if (req >= 0 && x[static_cast<std::size_t>(req)] == 0) return y;
    if (ev.from >= 0) y[static_cast<std::size_t>(ev.from)] -= 1;
    if (ev.to >= 0) y[static_cast<std::size_t>(ev.to)] += 1;
    return y;
}

inline State step(const ValidatedNetwork& vn, const State& x, double u) {
    return step(EventTable(vn), x, u);
}

// Exact one-step kernel row K(x, .), with blocked events merged into the
// self-loop.  Successors are returned in lexicographic order.
inline std::vector<std::pair<State, double>> kernel_row(const ValidatedNetwork& vn,
                                                        const State& x) {
    std::map<State, double> row;
    for (const auto& ev : increment_table(vn)) {
        State y = x;
        State delta = constrain(x, ev);
        for (std::size_t k = 0; k < y.size(); ++k) y[k] += delta[k];
        row[y] += ev.probability;
    }
    return {row.begin(), row.end()};
}

// Log-moment generating function of the constrained increment at x:
// psi(x, theta) = log sum_w P(w) exp(theta . zeta(x, w)).
inline double log_mgf(const ValidatedNetwork& vn, const State& x,
                      const std::vector<double>& theta) {
    require(theta.size() == vn.d(), Errc::BadArgument, "theta length must equal d");
    double s = 0.0;
    for (const auto& ev : increment_table(vn)) {
        State delta = constrain(x, ev);
        double dot = 0.0;
        for (std::size_t k = 0; k < delta.size(); ++k) dot += theta[k] * delta[k];
        s += ev.probability * std::exp(dot);
    }
    return std::log(s);
}

// psi evaluated at the (negated) gradient of the affine subsolution
// gamma_V - w^T y.  On interior states this is exactly zero: the traffic
// equations make the tilted event probabilities re-sum to lambda + mu = 1.
// The identity breaks on the boundary, where blocked events distort psi,
// hence the interior precondition.
inline double subsolution_residual(const ValidatedNetwork& vn, const TargetSpec& target,
                                   const State& x) {
    (void)target; // the gradient is the network's weight vector for every target
    require(x.size() == vn.d(), Errc::BadArgument, "state length must equal d");
    for (int c : x)
        require(c > 0, Errc::BoundaryState,
                "subsolution residual is defined only at interior states");
    return log_mgf(vn, x, vn.potential_weights);
}

}  // namespace overflowlab
