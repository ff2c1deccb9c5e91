#pragma once

// Dense kernels behind the layers. Each kernel exists twice: a plain serial
// reference and an OpenMP version. Both compute every output element with
// the same summation order, so they agree bitwise and results do not depend
// on the thread count. Batch reductions (weight gradients) are done per
// output element over rows in ascending order.

#include <cstdint>
#include <span>

#include "kgrec/numeric/matrix.hpp"

namespace kgrec::numeric::kernels {

struct CrossCompressWeights {
    const Matrix& w_vv;  // d x 1
    const Matrix& w_ev;
    const Matrix& w_ve;
    const Matrix& w_ee;
    const Matrix& b_v;  // 1 x d
    const Matrix& b_e;
};

struct CrossCompressGrads {
    Matrix& w_vv;
    Matrix& w_ev;
    Matrix& w_ve;
    Matrix& w_ee;
    Matrix& b_v;
    Matrix& b_e;
};

#define KGREC_KERNEL_DECLS                                                                        \
    /* c = a * b */                                                                               \
    void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c);                                    \
    /* c += a^T * g */                                                                            \
    void gemm_tn_acc(const Matrix& a, const Matrix& g, Matrix& c);                                \
    /* c = g * b^T */                                                                             \
    void gemm_nt(const Matrix& g, const Matrix& b, Matrix& c);                                    \
    /* c(0, j) += sum_i g(i, j) */                                                                \
    void col_sum_acc(const Matrix& g, Matrix& c);                                                 \
    /* out(i, 0) = <a_i, b_i> */                                                                  \
    void row_dot(const Matrix& a, const Matrix& b, Matrix& out);                                  \
    /* Per row: C = v e^T (stored in cross, b*d*d), v' = C w_vv + C^T w_ev + b_v,                 \
       e' = C w_ve + C^T w_ee + b_e. */                                                           \
    void cross_compress_forward(const Matrix& v, const Matrix& e, const CrossCompressWeights& w,  \
                                Matrix& cross, Matrix& v_out, Matrix& e_out);                     \
    /* Accumulates weight grads into g, writes dv/de. */                                          \
    void cross_compress_backward(const Matrix& v, const Matrix& e, const Matrix& cross,           \
                                 const CrossCompressWeights& w, const Matrix& gv_out,             \
                                 const Matrix& ge_out, CrossCompressGrads& g, Matrix& dv,         \
                                 Matrix& de);                                                     \
    /* One Adam update over a flat parameter block. */                                           \
    void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, \
                     std::span<double> v, double lr, double beta1, double beta2, double eps,      \
                     double bias1, double bias2);

namespace serial {
KGREC_KERNEL_DECLS
}  // namespace serial

namespace parallel {
KGREC_KERNEL_DECLS
}  // namespace parallel

#undef KGREC_KERNEL_DECLS

enum class Backend { Serial, Parallel };

// Process-wide choice used by the layer code. Defaults to Parallel when
// built with OpenMP.
Backend backend() noexcept;
void set_backend(Backend b) noexcept;
bool openmp_enabled() noexcept;
int max_threads() noexcept;

// Forces the serial backend for the lifetime of the guard.
class ScopedBackend {
public:
    explicit ScopedBackend(Backend b) noexcept : saved_(backend()) { set_backend(b); }
    ~ScopedBackend() { set_backend(saved_); }
    ScopedBackend(const ScopedBackend&) = delete;
    ScopedBackend& operator=(const ScopedBackend&) = delete;

private:
    Backend saved_;
};

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_tn_acc(const Matrix& a, const Matrix& g, Matrix& c);
void gemm_nt(const Matrix& g, const Matrix& b, Matrix& c);
void col_sum_acc(const Matrix& g, Matrix& c);
void row_dot(const Matrix& a, const Matrix& b, Matrix& out);
void cross_compress_forward(const Matrix& v, const Matrix& e, const CrossCompressWeights& w, Matrix& cross,
                            Matrix& v_out, Matrix& e_out);
void cross_compress_backward(const Matrix& v, const Matrix& e, const Matrix& cross, const CrossCompressWeights& w,
                             const Matrix& gv_out, const Matrix& ge_out, CrossCompressGrads& g, Matrix& dv,
                             Matrix& de);
void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, double bias1, double bias2);

// Sparse row scatter used by embedding backward: table_grad.row(idx[i]) += g.row(i).
// Serial only; duplicate indices make a parallel scatter order-dependent.
void scatter_add_rows(const Matrix& g, std::span<const std::uint32_t> idx, Matrix& table_grad);

}  // namespace kgrec::numeric::kernels
