#pragma once

// Per-row / per-element kernel bodies shared by the serial and OpenMP loops.
// Keeping one body per output element is what makes the two backends agree
// bitwise.

#include <cmath>
#include <string>

#include "kgrec/errors.hpp"
#include "kgrec/numeric/kernels.hpp"

namespace kgrec::numeric::kernels::detail {

inline void check_gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
    require_shape(a.cols() == b.rows(), "gemm_nn: " + a.shape_string() + " * " + b.shape_string());
    if (c.rows() != a.rows() || c.cols() != b.cols()) c = Matrix(a.rows(), b.cols());
}

inline void gemm_nn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    const std::size_t k = a.cols();
    const std::size_t n = b.cols();
    double* out = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
        const double aip = a(i, p);
        const double* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += aip * brow[j];
    }
}

inline void check_gemm_tn(const Matrix& a, const Matrix& g, const Matrix& c) {
    require_shape(a.rows() == g.rows() && c.rows() == a.cols() && c.cols() == g.cols(),
                  "gemm_tn_acc: " + a.shape_string() + "^T * " + g.shape_string() + " into " + c.shape_string());
}

inline void gemm_tn_row(const Matrix& a, const Matrix& g, Matrix& c, std::size_t p) {
    const std::size_t m = a.rows();
    const std::size_t n = g.cols();
    double* out = c.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
        const double aip = a(i, p);
        const double* grow = g.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += aip * grow[j];
    }
}

inline void check_gemm_nt(const Matrix& g, const Matrix& b, Matrix& c) {
    require_shape(g.cols() == b.cols(), "gemm_nt: " + g.shape_string() + " * " + b.shape_string() + "^T");
    if (c.rows() != g.rows() || c.cols() != b.rows()) c = Matrix(g.rows(), b.rows());
}

inline void gemm_nt_row(const Matrix& g, const Matrix& b, Matrix& c, std::size_t i) {
    const std::size_t n = g.cols();
    const double* grow = g.data() + i * n;
    for (std::size_t k = 0; k < b.rows(); ++k) {
        const double* brow = b.data() + k * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
        c(i, k) = s;
    }
}

inline void check_col_sum(const Matrix& g, const Matrix& c) {
    require_shape(c.rows() == 1 && c.cols() == g.cols(),
                  "col_sum_acc: " + g.shape_string() + " into " + c.shape_string());
}

inline void col_sum_col(const Matrix& g, Matrix& c, std::size_t j) {
    double s = c[j];
    for (std::size_t i = 0; i < g.rows(); ++i) s += g(i, j);
    c[j] = s;
}

inline void check_row_dot(const Matrix& a, const Matrix& b, Matrix& out) {
    require_shape(a.same_shape(b), "row_dot: " + a.shape_string() + " vs " + b.shape_string());
    if (out.rows() != a.rows() || out.cols() != 1) out = Matrix(a.rows(), 1);
}

inline void row_dot_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * b(i, j);
    out[i] = s;
}

inline void check_cross(const Matrix& v, const Matrix& e, const CrossCompressWeights& w) {
    const std::size_t d = v.cols();
    require_shape(v.same_shape(e), "cross_compress: v " + v.shape_string() + " vs e " + e.shape_string());
    for (const Matrix* m : {&w.w_vv, &w.w_ev, &w.w_ve, &w.w_ee}) {
        require_shape(m->rows() == d && m->cols() == 1, "cross_compress: weight must be " + std::to_string(d) + "x1");
    }
    for (const Matrix* m : {&w.b_v, &w.b_e}) {
        require_shape(m->rows() == 1 && m->cols() == d, "cross_compress: bias must be 1x" + std::to_string(d));
    }
}

inline void cross_forward_row(const Matrix& v, const Matrix& e, const CrossCompressWeights& w, Matrix& cross,
                              Matrix& v_out, Matrix& e_out, std::size_t r) {
    const std::size_t d = v.cols();
    double* c = cross.data() + r * d * d;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) c[i * d + j] = v(r, i) * e(r, j);
    }
    for (std::size_t i = 0; i < d; ++i) {
        double c_vv = 0.0, ct_ev = 0.0, c_ve = 0.0, ct_ee = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            c_vv += c[i * d + j] * w.w_vv[j];
            ct_ev += c[j * d + i] * w.w_ev[j];
            c_ve += c[i * d + j] * w.w_ve[j];
            ct_ee += c[j * d + i] * w.w_ee[j];
        }
        v_out(r, i) = c_vv + ct_ev + w.b_v[i];
        e_out(r, i) = c_ve + ct_ee + w.b_e[i];
    }
}

// Writes dv/de for row r and the row's weight-gradient contributions into
// contrib (4*d columns: vv | ev | ve | ee).
inline void cross_backward_row(const Matrix& v, const Matrix& e, const Matrix& cross, const CrossCompressWeights& w,
                               const Matrix& gv, const Matrix& ge, Matrix& dv, Matrix& de, Matrix& contrib,
                               std::size_t r) {
    const std::size_t d = v.cols();
    const double* c = cross.data() + r * d * d;
    for (std::size_t j = 0; j < d; ++j) {
        double vv = 0.0, ev = 0.0, ve = 0.0, ee = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            vv += gv(r, i) * c[i * d + j];
            ev += gv(r, i) * c[j * d + i];
            ve += ge(r, i) * c[i * d + j];
            ee += ge(r, i) * c[j * d + i];
        }
        contrib(r, j) = vv;
        contrib(r, d + j) = ev;
        contrib(r, 2 * d + j) = ve;
        contrib(r, 3 * d + j) = ee;
    }
    for (std::size_t i = 0; i < d; ++i) dv(r, i) = 0.0;
    for (std::size_t j = 0; j < d; ++j) de(r, j) = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double dc = gv(r, i) * w.w_vv[j] + ge(r, i) * w.w_ve[j] + gv(r, j) * w.w_ev[i] +
                              ge(r, j) * w.w_ee[i];
            dv(r, i) += dc * e(r, j);
            de(r, j) += dc * v(r, i);
        }
    }
}

inline void cross_reduce_col(const Matrix& contrib, const Matrix& gv, const Matrix& ge, CrossCompressGrads& g,
                             std::size_t col) {
    // col in [0, 6d): four weight vectors then the two biases.
    const std::size_t d = gv.cols();
    const std::size_t block = col / d;
    const std::size_t j = col % d;
    if (block < 4) {
        Matrix* targets[4] = {&g.w_vv, &g.w_ev, &g.w_ve, &g.w_ee};
        double s = (*targets[block])[j];
        for (std::size_t r = 0; r < contrib.rows(); ++r) s += contrib(r, col);
        (*targets[block])[j] = s;
    } else {
        const Matrix& src = block == 4 ? gv : ge;
        Matrix& dst = block == 4 ? g.b_v : g.b_e;
        double s = dst[j];
        for (std::size_t r = 0; r < src.rows(); ++r) s += src(r, j);
        dst[j] = s;
    }
}

inline void adam_element(double& theta, double grad, double& m, double& v, double lr, double beta1, double beta2,
                         double eps, double bias1, double bias2) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    theta -= lr * m_hat / (std::sqrt(v_hat) + eps);
}

}  // namespace kgrec::numeric::kernels::detail
