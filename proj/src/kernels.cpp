#include "factmatch/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "factmatch/error.hpp"

namespace factmatch::kernels {

namespace {

double sq_norm(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

std::vector<double> row_norms(const DenseMatrix& m)
{
    std::vector<double> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        out[i] = std::sqrt(sq_norm(m.row(i)));
    }
    return out;
}

double cosine_with_norms(std::span<const double> a, double na, std::span<const double> b, double nb)
{
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        d += a[k] * b[k];
    }
    return std::clamp(d / (na * nb), -1.0, 1.0);
}

void check_shapes(const DenseMatrix& left, const DenseMatrix& right)
{
    if (left.cols != right.cols) {
        throw InvalidArgument("dimension mismatch: " + std::to_string(left.cols) + " vs "
                              + std::to_string(right.cols));
    }
}

}  // namespace

double dense_cosine(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw InvalidArgument("dimension mismatch");
    }
    return cosine_with_norms(a, std::sqrt(sq_norm(a)), b, std::sqrt(sq_norm(b)));
}

DenseMatrix cosine_matrix_serial(const DenseMatrix& left, const DenseMatrix& right)
{
    check_shapes(left, right);
    auto ln = row_norms(left);
    auto rn = row_norms(right);
    DenseMatrix out(left.rows, right.rows);
    for (std::size_t i = 0; i < left.rows; ++i) {
        for (std::size_t j = 0; j < right.rows; ++j) {
            out(i, j) = cosine_with_norms(left.row(i), ln[i], right.row(j), rn[j]);
        }
    }
    return out;
}

DenseMatrix cosine_matrix(const DenseMatrix& left, const DenseMatrix& right)
{
    check_shapes(left, right);
    auto ln = row_norms(left);
    auto rn = row_norms(right);
    DenseMatrix out(left.rows, right.rows);
    const auto total = static_cast<std::int64_t>(left.rows * right.rows);
    // Flattened so a handful of claims against many tweets still spreads across threads.
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < total; ++idx) {
        const auto i = static_cast<std::size_t>(idx) / right.rows;
        const auto j = static_cast<std::size_t>(idx) % right.rows;
        out(i, j) = cosine_with_norms(left.row(i), ln[i], right.row(j), rn[j]);
    }
    return out;
}

std::vector<RankedIndex> top_k(std::span<const double> scores, std::span<const std::string> keys, std::size_t k)
{
    std::vector<RankedIndex> all(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
        all[j] = {j, scores[j]};
    }
    auto better = [&](const RankedIndex& a, const RankedIndex& b) {
        return a.score != b.score ? a.score > b.score : keys[a.index] < keys[b.index];
    };
    const std::size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<long>(keep), all.end(), better);
    all.resize(keep);
    return all;
}

std::vector<std::vector<RankedIndex>> top_k_rows_serial(const DenseMatrix& scores,
                                                        std::span<const std::string> column_keys, std::size_t k)
{
    if (column_keys.size() != scores.cols) {
        throw InvalidArgument("top_k_rows: key count does not match columns");
    }
    std::vector<std::vector<RankedIndex>> out(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        out[i] = top_k(scores.row(i), column_keys, k);
    }
    return out;
}

std::vector<std::vector<RankedIndex>> top_k_rows(const DenseMatrix& scores, std::span<const std::string> column_keys,
                                                 std::size_t k)
{
    if (column_keys.size() != scores.cols) {
        throw InvalidArgument("top_k_rows: key count does not match columns");
    }
    std::vector<std::vector<RankedIndex>> out(scores.rows);
    const auto rows = static_cast<std::int64_t>(scores.rows);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < rows; ++i) {
        out[static_cast<std::size_t>(i)] = top_k(scores.row(static_cast<std::size_t>(i)), column_keys, k);
    }
    return out;
}

std::vector<double> sparse_cosine_batch_serial(const text::SparseVector& query,
                                               std::span<const text::SparseVector> docs)
{
    std::vector<double> out(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        out[i] = text::cosine(query, docs[i]);
    }
    return out;
}

std::vector<double> sparse_cosine_batch(const text::SparseVector& query, std::span<const text::SparseVector> docs)
{
    std::vector<double> out(docs.size());
    const auto n = static_cast<std::int64_t>(docs.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = text::cosine(query, docs[static_cast<std::size_t>(i)]);
    }
    return out;
}

int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace factmatch::kernels
