#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "kgrec/numeric/trace.hpp"

namespace kgrec::numeric {

struct LossProbe {
    double value = 0.0;
    // ReLU sign pattern of the evaluation (ForwardTrace::kink_signature).
    std::uint64_t kink_signature = 0;
};

// Evaluates the loss at the current parameter values. When `with_grad` is
// true it must also leave d(loss)/d(theta) in every Parameter::grad
// (zeroing them first).
using LossFunction = std::function<LossProbe(bool with_grad)>;

struct GradCheckOptions {
    double epsilon = 1e-5;
    // Coordinates sampled per parameter; 0 checks every coordinate.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    // Coordinates whose +/- epsilon evaluation flipped a ReLU.
    std::size_t skipped_kinks = 0;
};

// Central differences (f(t+eps) - f(t-eps)) / 2 eps against the analytic
// gradient. Relative error is |a - n| / max(1e-8, |a| + |n|).
GradCheckReport finite_diff_check(const LossFunction& loss, ParamStore& params, const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric) noexcept;

}  // namespace kgrec::numeric
