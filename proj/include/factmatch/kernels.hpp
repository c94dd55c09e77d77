#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "factmatch/textproc.hpp"

// Data-parallel inner loops. Every parallel kernel has a `_serial` twin that
// is the reference implementation; both compute each output element with the
// same arithmetic, so their results are bit-identical.

namespace factmatch::kernels {

/// Row-major dense matrix of doubles.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Cosine of two dense vectors; 0.0 if either has zero norm.
double dense_cosine(std::span<const double> a, std::span<const double> b);

/// out(i, j) = cosine(left row i, right row j). Column counts must match.
DenseMatrix cosine_matrix(const DenseMatrix& left, const DenseMatrix& right);
DenseMatrix cosine_matrix_serial(const DenseMatrix& left, const DenseMatrix& right);

struct RankedIndex {
    std::size_t index = 0;
    double score = 0.0;

    friend bool operator==(const RankedIndex&, const RankedIndex&) = default;
};

/// For every row of `scores`, the min(k, cols) best columns by descending
/// score, ties broken by ascending `column_keys[j]`.
std::vector<std::vector<RankedIndex>> top_k_rows(const DenseMatrix& scores, std::span<const std::string> column_keys,
                                                 std::size_t k);
std::vector<std::vector<RankedIndex>> top_k_rows_serial(const DenseMatrix& scores,
                                                        std::span<const std::string> column_keys, std::size_t k);

/// Single-row version shared by both paths.
std::vector<RankedIndex> top_k(std::span<const double> scores, std::span<const std::string> keys, std::size_t k);

/// cosine(query, docs[i]) for every i.
std::vector<double> sparse_cosine_batch(const text::SparseVector& query, std::span<const text::SparseVector> docs);
std::vector<double> sparse_cosine_batch_serial(const text::SparseVector& query,
                                               std::span<const text::SparseVector> docs);

/// Threads OpenMP will use (1 when built without OpenMP).
int max_threads();

}  // namespace factmatch::kernels
