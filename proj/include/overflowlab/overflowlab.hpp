#pragma once

// Overflow probabilities in open Jackson networks: exact first-passage
// solves, a subsolution-guided multilevel splitting estimator, a naive
// Monte Carlo baseline, and the scaling studies comparing them.

#include "overflowlab/chain.hpp"
#include "overflowlab/errors.hpp"
#include "overflowlab/exact.hpp"
#include "overflowlab/experiments.hpp"
#include "overflowlab/io.hpp"
#include "overflowlab/network.hpp"
#include "overflowlab/reversed.hpp"
#include "overflowlab/rng.hpp"
#include "overflowlab/splitting.hpp"
#include "overflowlab/stats.hpp"
