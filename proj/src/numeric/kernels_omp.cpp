// OpenMP kernels. Every loop below is over independent output rows or
// columns; per-element arithmetic is the same body the serial kernels use.

#include "kernel_bodies.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kgrec::numeric::kernels::parallel {

using namespace detail;

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kMinParallelWork = 1 << 14;

using Index = std::ptrdiff_t;
}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
    check_gemm_nn(a, b, c);
    const Index rows = static_cast<Index>(a.rows());
    const bool big = a.rows() * a.cols() * b.cols() >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index i = 0; i < rows; ++i) gemm_nn_row(a, b, c, static_cast<std::size_t>(i));
}

void gemm_tn_acc(const Matrix& a, const Matrix& g, Matrix& c) {
    check_gemm_tn(a, g, c);
    const Index rows = static_cast<Index>(c.rows());
    const bool big = a.rows() * a.cols() * g.cols() >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index p = 0; p < rows; ++p) gemm_tn_row(a, g, c, static_cast<std::size_t>(p));
}

void gemm_nt(const Matrix& g, const Matrix& b, Matrix& c) {
    check_gemm_nt(g, b, c);
    const Index rows = static_cast<Index>(g.rows());
    const bool big = g.rows() * g.cols() * b.rows() >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index i = 0; i < rows; ++i) gemm_nt_row(g, b, c, static_cast<std::size_t>(i));
}

void col_sum_acc(const Matrix& g, Matrix& c) {
    check_col_sum(g, c);
    const Index cols = static_cast<Index>(g.cols());
    const bool big = g.size() >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index j = 0; j < cols; ++j) col_sum_col(g, c, static_cast<std::size_t>(j));
}

void row_dot(const Matrix& a, const Matrix& b, Matrix& out) {
    check_row_dot(a, b, out);
    const Index rows = static_cast<Index>(a.rows());
    const bool big = a.size() >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index i = 0; i < rows; ++i) row_dot_row(a, b, out, static_cast<std::size_t>(i));
}

void cross_compress_forward(const Matrix& v, const Matrix& e, const CrossCompressWeights& w, Matrix& cross,
                            Matrix& v_out, Matrix& e_out) {
    check_cross(v, e, w);
    const std::size_t b = v.rows();
    const std::size_t d = v.cols();
    cross = Matrix(b, d * d);
    v_out = Matrix(b, d);
    e_out = Matrix(b, d);
    const bool big = b * d * d >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index r = 0; r < static_cast<Index>(b); ++r) {
        cross_forward_row(v, e, w, cross, v_out, e_out, static_cast<std::size_t>(r));
    }
}

void cross_compress_backward(const Matrix& v, const Matrix& e, const Matrix& cross, const CrossCompressWeights& w,
                             const Matrix& gv_out, const Matrix& ge_out, CrossCompressGrads& g, Matrix& dv,
                             Matrix& de) {
    check_cross(v, e, w);
    const std::size_t b = v.rows();
    const std::size_t d = v.cols();
    dv = Matrix(b, d);
    de = Matrix(b, d);
    Matrix contrib(b, 4 * d);
    const bool big = b * d * d >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index r = 0; r < static_cast<Index>(b); ++r) {
        cross_backward_row(v, e, cross, w, gv_out, ge_out, dv, de, contrib, static_cast<std::size_t>(r));
    }
#pragma omp parallel for schedule(static) if (big)
    for (Index col = 0; col < static_cast<Index>(6 * d); ++col) {
        cross_reduce_col(contrib, gv_out, ge_out, g, static_cast<std::size_t>(col));
    }
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, double bias1, double bias2) {
    require_shape(theta.size() == grad.size() && m.size() == theta.size() && v.size() == theta.size(),
                  "adam_update: block sizes differ");
    const Index n = static_cast<Index>(theta.size());
    const bool big = theta.size() >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (Index i = 0; i < n; ++i) {
        adam_element(theta[i], grad[i], m[i], v[i], lr, beta1, beta2, eps, bias1, bias2);
    }
}

}  // namespace kgrec::numeric::kernels::parallel

namespace kgrec::numeric::kernels {

namespace {
#ifdef _OPENMP
Backend g_backend = Backend::Parallel;
#else
Backend g_backend = Backend::Serial;
#endif
}  // namespace

Backend backend() noexcept { return g_backend; }
void set_backend(Backend b) noexcept { g_backend = b; }

bool openmp_enabled() noexcept {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

#define KGREC_DISPATCH(name, ...) \
    (g_backend == Backend::Parallel ? parallel::name(__VA_ARGS__) : serial::name(__VA_ARGS__))

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) { KGREC_DISPATCH(gemm_nn, a, b, c); }
void gemm_tn_acc(const Matrix& a, const Matrix& g, Matrix& c) { KGREC_DISPATCH(gemm_tn_acc, a, g, c); }
void gemm_nt(const Matrix& g, const Matrix& b, Matrix& c) { KGREC_DISPATCH(gemm_nt, g, b, c); }
void col_sum_acc(const Matrix& g, Matrix& c) { KGREC_DISPATCH(col_sum_acc, g, c); }
void row_dot(const Matrix& a, const Matrix& b, Matrix& out) { KGREC_DISPATCH(row_dot, a, b, out); }

void cross_compress_forward(const Matrix& v, const Matrix& e, const CrossCompressWeights& w, Matrix& cross,
                            Matrix& v_out, Matrix& e_out) {
    KGREC_DISPATCH(cross_compress_forward, v, e, w, cross, v_out, e_out);
}

void cross_compress_backward(const Matrix& v, const Matrix& e, const Matrix& cross, const CrossCompressWeights& w,
                             const Matrix& gv_out, const Matrix& ge_out, CrossCompressGrads& g, Matrix& dv,
                             Matrix& de) {
    KGREC_DISPATCH(cross_compress_backward, v, e, cross, w, gv_out, ge_out, g, dv, de);
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, double bias1, double bias2) {
    KGREC_DISPATCH(adam_update, theta, grad, m, v, lr, beta1, beta2, eps, bias1, bias2);
}

#undef KGREC_DISPATCH

void scatter_add_rows(const Matrix& g, std::span<const std::uint32_t> idx, Matrix& table_grad) {
    require_shape(g.rows() == idx.size() && g.cols() == table_grad.cols(),
                  "scatter_add_rows: " + g.shape_string() + " into " + table_grad.shape_string());
    const std::size_t d = g.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        double* dst = table_grad.data() + static_cast<std::size_t>(idx[i]) * d;
        const double* src = g.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
}

}  // namespace kgrec::numeric::kernels
