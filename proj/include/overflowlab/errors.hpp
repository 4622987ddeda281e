#pragma once

#include <stdexcept>
#include <string>

namespace overflowlab {

// Every failure the library reports deliberately.  Anything else escaping a
// call is a bug, not a condition the caller is expected to handle.
enum class Errc {
    ParseError,            // malformed network file / JSON
    BadArgument,           // caller passed an out-of-contract value
    NotOpen,               // network violates openness (unreachable or non-draining station)
    Unstable,              // some utilization >= 1
    SingularRouting,       // traffic equations have no unique solution
    EmptyTarget,           // target direction has no positive component
    BoundaryState,         // state-dependent quantity requested on the boundary
    AlreadyInTarget,       // start state already satisfies the overflow condition
    RunawayRun,            // a splitting run exceeded the transition budget
    DegenerateEstimate,    // all replications returned zero; no relative accuracy
    TooLarge,              // truncated state space exceeds the configured limit
    NoConvergence,         // iterative linear solve missed its tolerance
    TruncationNoConverge,  // growing the truncation box never stabilized the answer
    NonPositiveValue,      // quantity that must be > 0 is not
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::ParseError: return "ParseError";
        case Errc::BadArgument: return "BadArgument";
        case Errc::NotOpen: return "NotOpen";
        case Errc::Unstable: return "Unstable";
        case Errc::SingularRouting: return "SingularRouting";
        case Errc::EmptyTarget: return "EmptyTarget";
        case Errc::BoundaryState: return "BoundaryState";
        case Errc::AlreadyInTarget: return "AlreadyInTarget";
        case Errc::RunawayRun: return "RunawayRun";
        case Errc::DegenerateEstimate: return "DegenerateEstimate";
        case Errc::TooLarge: return "TooLarge";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::TruncationNoConverge: return "TruncationNoConverge";
        case Errc::NonPositiveValue: return "NonPositiveValue";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace overflowlab
