#pragma once

// Differentiable building blocks of the model. Each op computes its output
// and, on a recording trace, registers the matching backward step.

#include <cstdint>
#include <span>
#include <utility>

#include "kgrec/numeric/trace.hpp"

namespace kgrec::numeric {

enum class Activation { Identity, Relu, Sigmoid };

// Numerically stable logistic function; sigmoid(0) == 0.5 exactly.
double sigmoid(double z) noexcept;

// Row gather. Backward scatters into the touched rows only.
Var embedding_lookup(ForwardTrace& trace, Parameter& table, std::span<const std::uint32_t> indices);

// y = act(x W + b), b broadcast over rows.
Var dense(ForwardTrace& trace, const Var& x, Parameter& w, Parameter& b, Activation act);

struct CrossCompressParams {
    Parameter& w_vv;  // d x 1
    Parameter& w_ev;
    Parameter& w_ve;
    Parameter& w_ee;
    Parameter& b_v;  // 1 x d
    Parameter& b_e;
};

// Per row: C = v e^T, v' = (C w_vv + C^T w_ev)^T + b_v, e' = (C w_ve + C^T w_ee)^T + b_e.
std::pair<Var, Var> cross_compress(ForwardTrace& trace, const Var& v, const Var& e, const CrossCompressParams& p);

Var add(ForwardTrace& trace, const Var& a, const Var& b);
Var concat_cols(ForwardTrace& trace, const Var& a, const Var& b);
Var row_dot(ForwardTrace& trace, const Var& a, const Var& b);  // b x 1
Var sigmoid(ForwardTrace& trace, const Var& x);
Var mean(ForwardTrace& trace, const Var& x);                   // 1 x 1
Var weighted_sum(ForwardTrace& trace, const Var& a, double wa, const Var& b, double wb);  // 1 x 1 scalars

// Mean binary cross-entropy on logits, in the stable form
// max(z, 0) - z y + log(1 + exp(-|z|)). Returns 1 x 1.
Var bce_with_logits(ForwardTrace& trace, const Var& logits, std::span<const double> labels);

// (lambda / 2) * sum of squares over every parameter.
double l2_penalty(const ParamStore& params, double lambda);
// grad += lambda * theta for every parameter.
void add_l2_gradient(ParamStore& params, double lambda);

}  // namespace kgrec::numeric
