#include "kgrec/numeric/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kgrec/errors.hpp"
#include "kgrec/numeric/kernels.hpp"

namespace kgrec::numeric {

namespace {

bool has_grad(const Var& v) { return !v->grad.empty() || v->value.empty(); }

void accumulate(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

Var embedding_lookup(ForwardTrace& trace, Parameter& table, std::span<const std::uint32_t> indices) {
    const std::size_t d = table.value.cols();
    Matrix out(indices.size(), d);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= table.value.rows()) {
            throw IndexOutOfRange(table.name + ": index " + std::to_string(indices[i]) + " >= " +
                                  std::to_string(table.value.rows()));
        }
        auto src = table.value.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    Var y = trace.make(std::move(out));
    if (trace.recording()) {
        std::vector<std::uint32_t> idx(indices.begin(), indices.end());
        trace.on_backward([y, &table, idx = std::move(idx)] { kernels::scatter_add_rows(y->grad, idx, table.grad); });
    }
    return y;
}

Var dense(ForwardTrace& trace, const Var& x, Parameter& w, Parameter& b, Activation act) {
    require_shape(x->value.cols() == w.value.rows(),
                  "dense: input " + x->value.shape_string() + " vs weight " + w.value.shape_string());
    require_shape(b.value.rows() == 1 && b.value.cols() == w.value.cols(),
                  "dense: bias " + b.value.shape_string() + " vs weight " + w.value.shape_string());
    Matrix z;
    kernels::gemm_nn(x->value, w.value, z);
    const std::size_t m = z.cols();
    for (std::size_t r = 0; r < z.rows(); ++r) {
        for (std::size_t j = 0; j < m; ++j) z(r, j) += b.value[j];
    }
    if (act == Activation::Relu) trace.note_kinks(z);
    Matrix out = z;
    for (double& v : out.values()) {
        switch (act) {
            case Activation::Identity: break;
            case Activation::Relu: v = v > 0.0 ? v : 0.0; break;
            case Activation::Sigmoid: v = sigmoid(v); break;
        }
    }
    Var y = trace.make(std::move(out));
    if (trace.recording()) {
        trace.on_backward([x, y, &w, &b, act] {
            Matrix gz = y->grad;
            if (act == Activation::Relu) {
                for (std::size_t i = 0; i < gz.size(); ++i) {
                    if (!(y->value[i] > 0.0)) gz[i] = 0.0;
                }
            } else if (act == Activation::Sigmoid) {
                for (std::size_t i = 0; i < gz.size(); ++i) gz[i] *= y->value[i] * (1.0 - y->value[i]);
            }
            kernels::gemm_tn_acc(x->value, gz, w.grad);
            kernels::col_sum_acc(gz, b.grad);
            if (has_grad(x)) {
                Matrix dx;
                kernels::gemm_nt(gz, w.value, dx);
                accumulate(x->grad, dx);
            }
        });
    }
    return y;
}

std::pair<Var, Var> cross_compress(ForwardTrace& trace, const Var& v, const Var& e, const CrossCompressParams& p) {
    kernels::CrossCompressWeights w{p.w_vv.value, p.w_ev.value, p.w_ve.value,
                                    p.w_ee.value, p.b_v.value,  p.b_e.value};
    Matrix cross, v_out, e_out;
    kernels::cross_compress_forward(v->value, e->value, w, cross, v_out, e_out);
    Var vo = trace.make(std::move(v_out));
    Var eo = trace.make(std::move(e_out));
    if (trace.recording()) {
        trace.on_backward([v, e, vo, eo, p, cross = std::move(cross)] {
            kernels::CrossCompressWeights cw{p.w_vv.value, p.w_ev.value, p.w_ve.value,
                                             p.w_ee.value, p.b_v.value,  p.b_e.value};
            kernels::CrossCompressGrads g{p.w_vv.grad, p.w_ev.grad, p.w_ve.grad,
                                          p.w_ee.grad, p.b_v.grad,  p.b_e.grad};
            Matrix dv, de;
            kernels::cross_compress_backward(v->value, e->value, cross, cw, vo->grad, eo->grad, g, dv, de);
            if (has_grad(v)) accumulate(v->grad, dv);
            if (has_grad(e)) accumulate(e->grad, de);
        });
    }
    return {vo, eo};
}

Var add(ForwardTrace& trace, const Var& a, const Var& b) {
    require_shape(a->value.same_shape(b->value), "add: " + a->value.shape_string() + " vs " + b->value.shape_string());
    Matrix out = a->value;
    accumulate(out, b->value);
    Var y = trace.make(std::move(out));
    if (trace.recording()) {
        trace.on_backward([a, b, y] {
            if (has_grad(a)) accumulate(a->grad, y->grad);
            if (has_grad(b)) accumulate(b->grad, y->grad);
        });
    }
    return y;
}

Var concat_cols(ForwardTrace& trace, const Var& a, const Var& b) {
    require_shape(a->value.rows() == b->value.rows(),
                  "concat_cols: " + a->value.shape_string() + " vs " + b->value.shape_string());
    const std::size_t n = a->value.rows();
    const std::size_t ca = a->value.cols();
    const std::size_t cb = b->value.cols();
    Matrix out(n, ca + cb);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < ca; ++j) out(r, j) = a->value(r, j);
        for (std::size_t j = 0; j < cb; ++j) out(r, ca + j) = b->value(r, j);
    }
    Var y = trace.make(std::move(out));
    if (trace.recording()) {
        trace.on_backward([a, b, y, n, ca, cb] {
            for (std::size_t r = 0; r < n; ++r) {
                if (has_grad(a)) {
                    for (std::size_t j = 0; j < ca; ++j) a->grad(r, j) += y->grad(r, j);
                }
                if (has_grad(b)) {
                    for (std::size_t j = 0; j < cb; ++j) b->grad(r, j) += y->grad(r, ca + j);
                }
            }
        });
    }
    return y;
}

Var row_dot(ForwardTrace& trace, const Var& a, const Var& b) {
    Matrix out;
    kernels::row_dot(a->value, b->value, out);
    Var y = trace.make(std::move(out));
    if (trace.recording()) {
        trace.on_backward([a, b, y] {
            const std::size_t d = a->value.cols();
            for (std::size_t r = 0; r < a->value.rows(); ++r) {
                const double g = y->grad[r];
                for (std::size_t j = 0; j < d; ++j) {
                    if (has_grad(a)) a->grad(r, j) += g * b->value(r, j);
                    if (has_grad(b)) b->grad(r, j) += g * a->value(r, j);
                }
            }
        });
    }
    return y;
}

Var sigmoid(ForwardTrace& trace, const Var& x) {
    Matrix out = x->value;
    for (double& v : out.values()) v = sigmoid(v);
    Var y = trace.make(std::move(out));
    if (trace.recording()) {
        trace.on_backward([x, y] {
            if (!has_grad(x)) return;
            for (std::size_t i = 0; i < y->value.size(); ++i) {
                x->grad[i] += y->grad[i] * y->value[i] * (1.0 - y->value[i]);
            }
        });
    }
    return y;
}

Var mean(ForwardTrace& trace, const Var& x) {
    const std::size_t n = x->value.size();
    require_shape(n > 0, "mean of an empty matrix");
    double s = 0.0;
    for (double v : x->value.values()) s += v;
    Var y = trace.make(Matrix(1, 1, s / static_cast<double>(n)));
    if (trace.recording()) {
        trace.on_backward([x, y, n] {
            if (!has_grad(x)) return;
            const double g = y->grad[0] / static_cast<double>(n);
            for (double& v : x->grad.values()) v += g;
        });
    }
    return y;
}

Var weighted_sum(ForwardTrace& trace, const Var& a, double wa, const Var& b, double wb) {
    require_shape(a->value.size() == 1 && b->value.size() == 1, "weighted_sum takes 1x1 scalars");
    Var y = trace.make(Matrix(1, 1, wa * a->value[0] + wb * b->value[0]));
    if (trace.recording()) {
        trace.on_backward([a, b, y, wa, wb] {
            if (has_grad(a)) a->grad[0] += wa * y->grad[0];
            if (has_grad(b)) b->grad[0] += wb * y->grad[0];
        });
    }
    return y;
}

Var bce_with_logits(ForwardTrace& trace, const Var& logits, std::span<const double> labels) {
    const Matrix& z = logits->value;
    require_shape(z.cols() == 1 && z.rows() == labels.size(),
                  "bce: logits " + z.shape_string() + " vs " + std::to_string(labels.size()) + " labels");
    require_shape(!labels.empty(), "bce: empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double zi = z[i];
        s += std::max(zi, 0.0) - zi * labels[i] + std::log1p(std::exp(-std::abs(zi)));
    }
    const double n = static_cast<double>(labels.size());
    Var y = trace.make(Matrix(1, 1, s / n));
    if (trace.recording()) {
        std::vector<double> y_true(labels.begin(), labels.end());
        trace.on_backward([logits, y, n, y_true = std::move(y_true)] {
            if (!has_grad(logits)) return;
            const double g = y->grad[0] / n;
            for (std::size_t i = 0; i < y_true.size(); ++i) {
                logits->grad[i] += g * (sigmoid(logits->value[i]) - y_true[i]);
            }
        });
    }
    return y;
}

double l2_penalty(const ParamStore& params, double lambda) {
    if (lambda == 0.0) return 0.0;
    double s = 0.0;
    for (const auto& p : params) {
        for (double v : p.value.values()) s += v * v;
    }
    return 0.5 * lambda * s;
}

void add_l2_gradient(ParamStore& params, double lambda) {
    if (lambda == 0.0) return;
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += lambda * p.value[i];
    }
}

}  // namespace kgrec::numeric
