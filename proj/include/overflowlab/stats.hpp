#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "overflowlab/errors.hpp"

namespace overflowlab {

// Aggregate of m independent replications of an estimator, plus the work
// accounting the complexity results are stated in.
struct ReplicationStats {
    std::size_t m = 0;
    double mean = 0.0;
    double variance = 0.0;            // unbiased (divides by m-1)
    double cv2 = 0.0;                 // variance / mean^2
    double std_error = 0.0;           // sqrt(variance / m)
    double mean_work = 0.0;           // transitions per replication
    double work_normalized_cv2 = 0.0; // cv2 * mean_work
};

// Deterministic reduction: values are consumed in index order with a
// two-pass variance, so the result is byte-identical no matter how many
// threads produced the inputs.
inline ReplicationStats summarize(const std::vector<double>& values,
                                  const std::vector<double>& works) {
    require(values.size() >= 2, Errc::BadArgument, "need at least two replications");
    require(values.size() == works.size(), Errc::BadArgument,
            "values and works must have equal length");

    ReplicationStats s;
    s.m = values.size();
    double sum = 0.0, wsum = 0.0;
    bool any_nonzero = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        wsum += works[i];
        any_nonzero = any_nonzero || values[i] != 0.0;
    }
    require(any_nonzero, Errc::DegenerateEstimate,
            "all replications returned zero; cv^2 is undefined at this sample size");

    s.mean = sum / static_cast<double>(s.m);
    double ss = 0.0;
    for (double v : values) {
        double dv = v - s.mean;
        ss += dv * dv;
    }
    s.variance = ss / static_cast<double>(s.m - 1);
    s.cv2 = s.variance / (s.mean * s.mean);
    s.std_error = std::sqrt(s.variance / static_cast<double>(s.m));
    s.mean_work = wsum / static_cast<double>(s.m);
    s.work_normalized_cv2 = s.cv2 * s.mean_work;
    return s;
}

}  // namespace overflowlab
