#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "factmatch/kernels.hpp"
#include "factmatch/rng.hpp"

using namespace factmatch;
using namespace factmatch::kernels;

namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols)
{
    std::normal_distribution<double> d;
    DenseMatrix m(rows, cols);
    for (auto& x : m.data) {
        x = d(rng);
    }
    return m;
}

text::SparseVector random_sparse(Rng& rng, std::uint32_t dim)
{
    std::uniform_real_distribution<double> w(0.1, 2.0);
    text::SparseVector v;
    for (std::uint32_t i = 0; i < dim; ++i) {
        if (uniform_index(rng, 4) == 0) {
            v.push_back({i, w(rng)});
        }
    }
    return v;
}

}  // namespace

TEST_CASE("dense cosine")
{
    const std::vector<double> a{1.0, 0.0};
    const std::vector<double> b{1.0, 1.0};
    CHECK(dense_cosine(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(dense_cosine(a, a) == doctest::Approx(1.0));
    CHECK(dense_cosine(a, std::vector<double>{0.0, 0.0}) == 0.0);
}

TEST_CASE("parallel cosine matrix is bit-identical to the serial one")
{
    auto rng = make_rng(21);
    for (auto [r, c, d] : {std::tuple{1, 1, 3}, std::tuple{7, 40, 16}, std::tuple{83, 300, 32}}) {
        auto left = random_matrix(rng, static_cast<std::size_t>(r), static_cast<std::size_t>(d));
        auto right = random_matrix(rng, static_cast<std::size_t>(c), static_cast<std::size_t>(d));
        auto par = cosine_matrix(left, right);
        auto ser = cosine_matrix_serial(left, right);
        CHECK(par.rows == ser.rows);
        CHECK(par.cols == ser.cols);
        CHECK(par.data == ser.data);
        CHECK(ser(0, 0) == doctest::Approx(dense_cosine(left.row(0), right.row(0))).epsilon(1e-15));
    }
}

TEST_CASE("cosine matrix rejects mismatched widths")
{
    CHECK_THROWS(cosine_matrix(DenseMatrix(2, 3), DenseMatrix(2, 4)));
    CHECK_THROWS(cosine_matrix_serial(DenseMatrix(2, 3), DenseMatrix(2, 4)));
}

TEST_CASE("top_k matches a brute-force sort")
{
    auto rng = make_rng(22);
    std::uniform_int_distribution<int> coarse(0, 5);
    for (int round = 0; round < 100; ++round) {
        const std::size_t n = 1 + uniform_index(rng, 30);
        std::vector<double> scores(n);
        std::vector<std::string> keys(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = coarse(rng) / 5.0;  // many ties
            keys[i] = "k" + std::to_string(uniform_index(rng, 1000)) + "_" + std::to_string(i);
        }
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return scores[a] != scores[b] ? scores[a] > scores[b] : keys[a] < keys[b];
        });
        const std::size_t k = 1 + uniform_index(rng, n + 5);
        auto got = top_k(scores, keys, k);
        REQUIRE(got.size() == std::min(k, n));
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].index == order[i]);
            CHECK(got[i].score == scores[order[i]]);
        }
    }
}

TEST_CASE("parallel top_k_rows equals serial")
{
    auto rng = make_rng(23);
    auto scores = random_matrix(rng, 50, 120);
    std::vector<std::string> keys;
    for (std::size_t j = 0; j < 120; ++j) {
        keys.push_back("t" + std::to_string(1000 + j));
    }
    CHECK(top_k_rows(scores, keys, 10) == top_k_rows_serial(scores, keys, 10));
    CHECK(top_k_rows(scores, keys, 500) == top_k_rows_serial(scores, keys, 500));
}

TEST_CASE("parallel sparse cosine batch equals serial")
{
    auto rng = make_rng(24);
    std::vector<text::SparseVector> docs;
    for (int i = 0; i < 400; ++i) {
        docs.push_back(random_sparse(rng, 60));
    }
    docs.push_back({});
    auto q = random_sparse(rng, 60);
    auto par = sparse_cosine_batch(q, docs);
    auto ser = sparse_cosine_batch_serial(q, docs);
    CHECK(par == ser);
    CHECK(ser.back() == 0.0);
    CHECK(ser[3] == text::cosine(q, docs[3]));
    CHECK(max_threads() >= 1);
}
