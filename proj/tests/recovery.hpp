#pragma once

#include "mmsym/catalog.hpp"
#include "mmsym/search.hpp"

#include <random>

namespace mmsym::testing {

// z4z3 as cyclic factors with N(0, 0.05^2) added entrywise, blocks A..D in order.
inline CyclicFactors perturbed_z4z3(std::uint64_t seed) {
    CyclicFactors f = cyclic_from_decomposition(to_float(builtin("z4z3")));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0, 0.05);
    for (Matrix* b : {&f.A, &f.B, &f.C, &f.D})
        for (Eigen::Index i = 0; i < b->size(); ++i) b->data()[i] += noise(rng);
    return f;
}

// Zero ramp to 140 of 207 entries per factor, lambda 1e-1 down to 1e-3, rounding to {0, 1, -1}.
inline Schedule recovery_schedule() {
    Schedule s;
    const int iterations[] = {200, 200, 600, 500, 500};
    const int zeros[] = {0, 70, 140, 140, 140};
    const double lambdas[] = {1e-1, 1e-1, 1e-1, 1e-2, 1e-3};
    for (int k = 0; k < 5; ++k) {
        SchedulePhase p;
        p.iterations = iterations[k];
        p.lambda = lambdas[k];
        p.zeros = zeros[k];
        p.project_every = 10;
        p.round_attempt = k >= 3;
        p.value_set = default_value_set();
        p.tol = 1e-2;
        s.phases.push_back(p);
    }
    return s;
}

constexpr std::uint64_t recovery_seed = 0;

}  // namespace mmsym::testing
