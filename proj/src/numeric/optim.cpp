#include "kgrec/numeric/optim.hpp"

#include <cmath>

#include "kgrec/numeric/kernels.hpp"

namespace kgrec::numeric {

AdamState make_adam_state(const ParamStore& params) {
    AdamState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.value.rows(), p.value.cols());
        state.second_moment.emplace_back(p.value.rows(), p.value.cols());
    }
    return state;
}

void adam_step(ParamStore& params, AdamState& state, double learning_rate) {
    require_shape(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
                  "adam_step: state has " + std::to_string(state.first_moment.size()) + " slots for " +
                      std::to_string(params.size()) + " parameters");
    ++state.step;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    std::size_t k = 0;
    for (auto& p : params) {
        Matrix& m = state.first_moment[k];
        Matrix& v = state.second_moment[k];
        require_shape(p.value.same_shape(p.grad) && p.value.same_shape(m) && p.value.same_shape(v),
                      "adam_step: shape mismatch for " + p.name);
        kernels::adam_update(p.value.values(), p.grad.values(), m.values(), v.values(), learning_rate,
                             state.beta1, state.beta2, state.epsilon, bias1, bias2);
        ++k;
    }
}

}  // namespace kgrec::numeric
