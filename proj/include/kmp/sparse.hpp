#pragma once

#include <vector>

#include "kmp/tensor.hpp"

namespace kmp {

// CSR matrix used for graph propagation operators (Â, D^{-1}A).
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> offsets;  // rows + 1
    std::vector<int> indices;
    std::vector<double> values;

    // y = S * x
    Tensor apply(const Tensor& x) const {
        if (cols != x.rows)
            throw shape_error("SparseMatrix::apply: " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " vs " + x.shape_str());
        Tensor y(rows, x.cols);
        for (int i = 0; i < rows; ++i) {
            double* yr = &y.v[static_cast<std::size_t>(i) * x.cols];
            for (int p = offsets[i]; p < offsets[i + 1]; ++p) {
                const double w = values[p];
                const double* xr = &x.v[static_cast<std::size_t>(indices[p]) * x.cols];
                for (int j = 0; j < x.cols; ++j) yr[j] += w * xr[j];
            }
        }
        return y;
    }

    SparseMatrix transposed() const {
        SparseMatrix t;
        t.rows = cols;
        t.cols = rows;
        t.offsets.assign(cols + 1, 0);
        for (int idx : indices) ++t.offsets[idx + 1];
        for (int i = 0; i < cols; ++i) t.offsets[i + 1] += t.offsets[i];
        t.indices.resize(indices.size());
        t.values.resize(values.size());
        std::vector<int> cursor(t.offsets.begin(), t.offsets.end() - 1);
        for (int i = 0; i < rows; ++i) {
            for (int p = offsets[i]; p < offsets[i + 1]; ++p) {
                const int pos = cursor[indices[p]]++;
                t.indices[pos] = i;
                t.values[pos] = values[p];
            }
        }
        return t;
    }

    Tensor to_dense() const {
        Tensor d(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int p = offsets[i]; p < offsets[i + 1]; ++p) d(i, indices[p]) += values[p];
        return d;
    }
};

}  // namespace kmp
