#pragma once

#include <cstdint>
#include <vector>

#include "kgrec/numeric/trace.hpp"

namespace kgrec::numeric {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<Matrix> first_moment;   // one per parameter, in store order
    std::vector<Matrix> second_moment;
};

AdamState make_adam_state(const ParamStore& params);

// Bias-corrected Adam update of every parameter from its grad buffer.
// Throws ShapeMismatch when the state does not match the store.
void adam_step(ParamStore& params, AdamState& state, double learning_rate);

}  // namespace kgrec::numeric
