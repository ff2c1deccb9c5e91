// Serial reference kernels. Kept as the oracle for the OpenMP versions and
// used whenever the backend is switched to Serial (latency benchmark).

#include "kernel_bodies.hpp"

namespace kgrec::numeric::kernels::serial {

using namespace detail;

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
    check_gemm_nn(a, b, c);
    for (std::size_t i = 0; i < a.rows(); ++i) gemm_nn_row(a, b, c, i);
}

void gemm_tn_acc(const Matrix& a, const Matrix& g, Matrix& c) {
    check_gemm_tn(a, g, c);
    for (std::size_t p = 0; p < c.rows(); ++p) gemm_tn_row(a, g, c, p);
}

void gemm_nt(const Matrix& g, const Matrix& b, Matrix& c) {
    check_gemm_nt(g, b, c);
    for (std::size_t i = 0; i < g.rows(); ++i) gemm_nt_row(g, b, c, i);
}

void col_sum_acc(const Matrix& g, Matrix& c) {
    check_col_sum(g, c);
    for (std::size_t j = 0; j < g.cols(); ++j) col_sum_col(g, c, j);
}

void row_dot(const Matrix& a, const Matrix& b, Matrix& out) {
    check_row_dot(a, b, out);
    for (std::size_t i = 0; i < a.rows(); ++i) row_dot_row(a, b, out, i);
}

void cross_compress_forward(const Matrix& v, const Matrix& e, const CrossCompressWeights& w, Matrix& cross,
                            Matrix& v_out, Matrix& e_out) {
    check_cross(v, e, w);
    const std::size_t b = v.rows();
    const std::size_t d = v.cols();
    cross = Matrix(b, d * d);
    v_out = Matrix(b, d);
    e_out = Matrix(b, d);
    for (std::size_t r = 0; r < b; ++r) cross_forward_row(v, e, w, cross, v_out, e_out, r);
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
    for (std::size_t r = 0; r < b; ++r) cross_backward_row(v, e, cross, w, gv_out, ge_out, dv, de, contrib, r);
    for (std::size_t col = 0; col < 6 * d; ++col) cross_reduce_col(contrib, gv_out, ge_out, g, col);
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 double lr, double beta1, double beta2, double eps, double bias1, double bias2) {
    require_shape(theta.size() == grad.size() && m.size() == theta.size() && v.size() == theta.size(),
                  "adam_update: block sizes differ");
    for (std::size_t i = 0; i < theta.size(); ++i) {
        adam_element(theta[i], grad[i], m[i], v[i], lr, beta1, beta2, eps, bias1, bias2);
    }
}

}  // namespace kgrec::numeric::kernels::serial
