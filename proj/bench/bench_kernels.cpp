// Serial vs OpenMP timings for the hot kernels.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "factmatch/kernels.hpp"
#include "factmatch/rng.hpp"

using namespace factmatch;
using kernels::DenseMatrix;

namespace {

template <class F>
double best_of(int reps, F&& f)
{
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols)
{
    std::normal_distribution<double> n(0.0, 1.0);
    DenseMatrix m(rows, cols);
    for (auto& x : m.data) {
        x = n(rng);
    }
    return m;
}

text::SparseVector random_sparse(Rng& rng, std::uint32_t vocab, std::size_t nnz)
{
    std::vector<std::uint32_t> idx;
    while (idx.size() < nnz) {
        idx.push_back(static_cast<std::uint32_t>(uniform_index(rng, vocab)));
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    }
    std::uniform_real_distribution<double> u(0.1, 1.0);
    text::SparseVector v;
    for (auto i : idx) {
        v.push_back({i, u(rng)});
    }
    return v;
}

void report(const char* name, double serial, double parallel, bool same)
{
    std::printf("%-22s serial %9.4f s   parallel %9.4f s   speedup %5.2fx   %s\n", name, serial, parallel,
                serial / parallel, same ? "outputs identical" : "OUTPUTS DIFFER");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"kernel benchmark"};
    std::size_t tweets = 8300;
    std::size_t claims = 83;
    std::size_t dim = 256;
    std::size_t docs = 50000;
    int reps = 3;
    app.add_option("--tweets", tweets, "rows of the left matrix");
    app.add_option("--claims", claims, "rows of the right matrix");
    app.add_option("--dim", dim, "embedding width");
    app.add_option("--docs", docs, "sparse documents");
    app.add_option("--reps", reps, "repetitions, best time is kept");
    CLI11_PARSE(app, argc, argv);

    auto rng = make_rng(7);
    std::printf("threads: %d\n", kernels::max_threads());

    const auto left = random_matrix(rng, tweets, dim);
    const auto right = random_matrix(rng, claims, dim);
    DenseMatrix a;
    DenseMatrix b;
    const double cs = best_of(reps, [&] { a = kernels::cosine_matrix_serial(left, right); });
    const double cp = best_of(reps, [&] { b = kernels::cosine_matrix(left, right); });
    report("cosine_matrix", cs, cp, a.data == b.data);

    // claims x tweets, as the per-claim top-100 pool is built
    DenseMatrix scores(claims, tweets);
    for (std::size_t i = 0; i < claims; ++i) {
        for (std::size_t j = 0; j < tweets; ++j) {
            scores(i, j) = a(j, i);
        }
    }
    std::vector<std::string> keys;
    for (std::size_t j = 0; j < tweets; ++j) {
        keys.push_back("t" + std::to_string(j));
    }
    std::vector<std::vector<kernels::RankedIndex>> ts;
    std::vector<std::vector<kernels::RankedIndex>> tp;
    const double ks = best_of(reps, [&] { ts = kernels::top_k_rows_serial(scores, keys, 100); });
    const double kp = best_of(reps, [&] { tp = kernels::top_k_rows(scores, keys, 100); });
    report("top_k_rows (k=100)", ks, kp, ts == tp);

    const auto query = random_sparse(rng, 20000, 12);
    std::vector<text::SparseVector> corpus;
    for (std::size_t i = 0; i < docs; ++i) {
        corpus.push_back(random_sparse(rng, 20000, 12));
    }
    std::vector<double> ss;
    std::vector<double> sp;
    const double bs = best_of(reps, [&] { ss = kernels::sparse_cosine_batch_serial(query, corpus); });
    const double bp = best_of(reps, [&] { sp = kernels::sparse_cosine_batch(query, corpus); });
    report("sparse_cosine_batch", bs, bp, ss == sp);
    return 0;
}
