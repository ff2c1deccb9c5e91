#include "kgrec/numeric/matrix.hpp"

#include <algorithm>

#include "kgrec/errors.hpp"

namespace kgrec::numeric {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_shape(data_.size() == rows * cols,
                  "matrix data length " + std::to_string(data_.size()) + " != " + std::to_string(rows) +
                      "x" + std::to_string(cols));
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        require_shape(row.size() == c, "ragged row list");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::string Matrix::shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeMismatch(what);
}

}  // namespace kgrec::numeric
