#pragma once

#include "sjd/couplers.hpp"
#include "sjd/prob.hpp"
#include "sjd/random.hpp"

namespace sjd::fault {

// Broken verifier: on rejection it resamples from the target law itself
// instead of the residual norm(max(0, p - q)). The output law becomes
// min(p, q) + TV * p, so losslessness checks must catch it.
struct SkipResidual {
  MrsOutcome operator()(const Categorical& p, const Categorical& q, Token x,
                        RandomSource& rng) const {
    const double ratio = std::min(1.0, p[x] / q.at(x));
    if (rng.uniform01() < ratio) return {true, x};
    return {false, sample_at(p, rng.uniform01())};
  }
};

}  // namespace sjd::fault
