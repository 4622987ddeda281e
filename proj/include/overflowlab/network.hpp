#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "overflowlab/errors.hpp"

namespace overflowlab {

// Queue-length vector, one non-negative count per station.
using State = std::vector<int>;

struct NetworkSpec {
    std::vector<double> lambda;               // external arrival rates, >= 0, at least one > 0
    std::vector<double> mu;                   // service rates, > 0
    std::vector<std::vector<double>> routing; // P[i][j], row sums <= 1; deficit exits

    std::size_t d() const { return lambda.size(); }

    // Probability that a customer finishing service at i leaves the network.
    double exit_prob(std::size_t i) const {
        double s = 0.0;
        for (double p : routing[i]) s += p;
        return std::max(0.0, 1.0 - s);
    }
};

// A NetworkSpec that passed validation, with every static quantity the
// algorithms need precomputed.  Rates are rescaled so the total event rate
// is 1; that rescaling changes nothing observable about the embedded chain.
struct ValidatedNetwork {
    NetworkSpec spec;                      // normalized: sum(lambda) + sum(mu) == 1
    std::vector<double> phi;               // throughputs, phi = lambda + P^T phi
    std::vector<double> rho;               // traffic intensities phi_i / mu_i, each in (0,1)
    double rho_star = 0.0;                 // max_i rho_i
    int beta = 0;                          // number of stations attaining rho_star
    std::vector<double> potential_weights; // w_i = -log(rho_i) > 0

    std::size_t d() const { return spec.d(); }
};

// Overflow target: the set of stations whose joint population defines the
// rare event {v^T x >= n}.
struct TargetSpec {
    std::vector<int> v;      // binary membership vector, at least one 1
    double rho_star_V = 0.0; // max rho over target stations
    int beta_V = 0;          // bottleneck count inside the target
    double gamma_V = 0.0;    // -log(rho_star_V), the exponential decay rate
};

namespace detail {

// Relative tolerance for declaring two traffic intensities tied.  beta and
// beta_V are discrete outputs, so ties must be resolved deterministically.
inline constexpr double kTieRelTol = 1e-9;

inline int count_ties(const std::vector<double>& vals, const std::vector<int>* mask,
                      double* max_out) {
    double best = -1.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (mask && (*mask)[i] == 0) continue;
        best = std::max(best, vals[i]);
    }
    int ties = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (mask && (*mask)[i] == 0) continue;
        if (vals[i] >= best * (1.0 - kTieRelTol)) ++ties;
    }
    *max_out = best;
    return ties;
}

}  // namespace detail

// Checks structural invariants, openness and stability, solves the traffic
// equations, and normalizes rates.  This is the only constructor of
// ValidatedNetwork; everything downstream assumes it ran.
inline ValidatedNetwork validate(const NetworkSpec& input) {
    const std::size_t d = input.d();
    require(d >= 1, Errc::BadArgument, "network needs at least one station");
    require(input.mu.size() == d, Errc::BadArgument, "lambda and mu lengths differ");
    require(input.routing.size() == d, Errc::BadArgument, "routing matrix must be d x d");

    bool any_arrival = false;
    for (std::size_t i = 0; i < d; ++i) {
        require(input.lambda[i] >= 0.0, Errc::BadArgument,
                "negative arrival rate at station " + std::to_string(i + 1));
        any_arrival = any_arrival || input.lambda[i] > 0.0;
        require(input.mu[i] > 0.0, Errc::BadArgument,
                "service rate must be positive at station " + std::to_string(i + 1));
        require(input.routing[i].size() == d, Errc::BadArgument,
                "routing row " + std::to_string(i + 1) + " has wrong length");
        double row = 0.0;
        for (double p : input.routing[i]) {
            require(p >= 0.0 && p <= 1.0, Errc::BadArgument,
                    "routing probabilities must lie in [0,1]");
            row += p;
        }
        require(row <= 1.0 + 1e-12, Errc::BadArgument,
                "routing row " + std::to_string(i + 1) + " sums beyond 1");
    }
    require(any_arrival, Errc::BadArgument, "at least one arrival rate must be positive");

    // Openness, part 1: every station is reachable from some external arrival
    // by following routing edges with positive probability.
    std::vector<char> reach(d, 0);
    {
        std::vector<std::size_t> queue;
        for (std::size_t i = 0; i < d; ++i)
            if (input.lambda[i] > 0.0) { reach[i] = 1; queue.push_back(i); }
        while (!queue.empty()) {
            std::size_t i = queue.back();
            queue.pop_back();
            for (std::size_t j = 0; j < d; ++j)
                if (input.routing[i][j] > 0.0 && !reach[j]) { reach[j] = 1; queue.push_back(j); }
        }
        for (std::size_t i = 0; i < d; ++i)
            require(reach[i], Errc::NotOpen,
                    "station " + std::to_string(i + 1) + " is unreachable from any arrival");
    }

    // Openness, part 2: from every station a customer can eventually exit
    // (reverse reachability from the stations with positive exit probability).
    {
        std::vector<char> drains(d, 0);
        std::vector<std::size_t> queue;
        for (std::size_t i = 0; i < d; ++i)
            if (input.exit_prob(i) > 1e-12) { drains[i] = 1; queue.push_back(i); }
        while (!queue.empty()) {
            std::size_t j = queue.back();
            queue.pop_back();
            for (std::size_t i = 0; i < d; ++i)
                if (input.routing[i][j] > 0.0 && !drains[i]) { drains[i] = 1; queue.push_back(i); }
        }
        for (std::size_t i = 0; i < d; ++i)
            require(drains[i], Errc::NotOpen,
                    "station " + std::to_string(i + 1) + " cannot drain to the exit");
    }

    // Traffic equations: (I - P^T) phi = lambda.
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                  static_cast<Eigen::Index>(d));
    Eigen::VectorXd b(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        b(static_cast<Eigen::Index>(i)) = input.lambda[i];
        for (std::size_t j = 0; j < d; ++j)
            A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) -= input.routing[i][j];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    require(lu.isInvertible(), Errc::SingularRouting,
            "traffic equations have no unique solution (I - P^T is singular)");
    Eigen::VectorXd phi_v = lu.solve(b);

    ValidatedNetwork vn;
    vn.spec = input;
    vn.phi.resize(d);
    vn.rho.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        vn.phi[i] = phi_v(static_cast<Eigen::Index>(i));
        vn.rho[i] = vn.phi[i] / input.mu[i];
        if (vn.rho[i] >= 1.0)
            fail(Errc::Unstable, "station " + std::to_string(i + 1) +
                                     " has utilization " + std::to_string(vn.rho[i]) + " >= 1");
        require(vn.rho[i] > 0.0, Errc::NotOpen,
                "station " + std::to_string(i + 1) + " carries no flow");
    }

    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) scale += input.lambda[i] + input.mu[i];
    require(scale > 0.0, Errc::BadArgument, "total rate is zero");
    for (std::size_t i = 0; i < d; ++i) {
        vn.spec.lambda[i] /= scale;
        vn.spec.mu[i] /= scale;
        vn.phi[i] /= scale;
    }

    vn.beta = detail::count_ties(vn.rho, nullptr, &vn.rho_star);
    vn.potential_weights.resize(d);
    for (std::size_t i = 0; i < d; ++i) vn.potential_weights[i] = -std::log(vn.rho[i]);
    return vn;
}

// Derives the decay rate and bottleneck count of the overflow target
// {x : v^T x >= n} from the already-validated utilizations.
inline TargetSpec target_params(const ValidatedNetwork& vn, const std::vector<int>& v) {
    require(v.size() == vn.d(), Errc::BadArgument, "target vector length must equal d");
    bool any = false;
    for (int b : v) {
        require(b == 0 || b == 1, Errc::BadArgument, "target vector entries must be 0 or 1");
        any = any || b == 1;
    }
    require(any, Errc::EmptyTarget, "target vector has no station selected");

    TargetSpec t;
    t.v = v;
    t.beta_V = detail::count_ties(vn.rho, &t.v, &t.rho_star_V);
    t.gamma_V = -std::log(t.rho_star_V);
    return t;
}

inline int target_count(const TargetSpec& target, const State& x) {
    int s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += target.v[i] * x[i];
    return s;
}

// Stationary probability of state x: product of independent geometrics,
// pi(x) = prod_j (1 - rho_j) rho_j^{x_j}.
inline double stationary_pmf(const ValidatedNetwork& vn, const State& x) {
    require(x.size() == vn.d(), Errc::BadArgument, "state length must equal d");
    double p = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        require(x[j] >= 0, Errc::BadArgument, "states are non-negative");
        p *= (1.0 - vn.rho[j]) * std::pow(vn.rho[j], x[j]);
    }
    return p;
}

// Log-space variant for states far out in the tail, where the product above
// would underflow to zero.
inline double log_stationary_pmf(const ValidatedNetwork& vn, const State& x) {
    require(x.size() == vn.d(), Errc::BadArgument, "state length must equal d");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        require(x[j] >= 0, Errc::BadArgument, "states are non-negative");
        s += std::log1p(-vn.rho[j]) - x[j] * vn.potential_weights[j];
    }
    return s;
}

// P(v^T Q(inf) = n): exact discrete convolution of the target stations'
// geometric marginals.  Non-target stations integrate out to 1.
inline double stationary_level_pmf(const ValidatedNetwork& vn, const TargetSpec& target, int n) {
    require(n >= 0, Errc::BadArgument, "level must be non-negative");
    std::vector<double> acc(static_cast<std::size_t>(n) + 1, 0.0);
    acc[0] = 1.0;
    for (std::size_t j = 0; j < vn.d(); ++j) {
        if (target.v[j] == 0) continue;
        const double rho = vn.rho[j];
        std::vector<double> geo(static_cast<std::size_t>(n) + 1);
        double g = 1.0 - rho;
        for (int k = 0; k <= n; ++k) { geo[static_cast<std::size_t>(k)] = g; g *= rho; }
        std::vector<double> next(static_cast<std::size_t>(n) + 1, 0.0);
        for (int a = 0; a <= n; ++a) {
            if (acc[static_cast<std::size_t>(a)] == 0.0) continue;
            for (int b = 0; a + b <= n; ++b)
                next[static_cast<std::size_t>(a + b)] +=
                    acc[static_cast<std::size_t>(a)] * geo[static_cast<std::size_t>(b)];
        }
        acc.swap(next);
    }
    return acc[static_cast<std::size_t>(n)];
}

}  // namespace overflowlab
