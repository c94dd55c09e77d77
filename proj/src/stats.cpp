#include "factmatch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "factmatch/error.hpp"

namespace factmatch::eval {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;

// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
double beta_fraction(double a, double b, double x)
{
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < kTiny) {
        d = kTiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        c = 1.0 + num / c;
        d = std::fabs(d) < kTiny ? 1.0 / kTiny : 1.0 / d;
        c = std::fabs(c) < kTiny ? kTiny : c;
        h *= d * c;

        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        c = 1.0 + num / c;
        d = std::fabs(d) < kTiny ? 1.0 / kTiny : 1.0 / d;
        c = std::fabs(c) < kTiny ? kTiny : c;
        const double step = d * c;
        h *= step;
        if (std::fabs(step - 1.0) < kEps) {
            return h;
        }
    }
    throw Error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
        throw InvalidArgument("incomplete_beta: need a, b > 0 and x in [0, 1]");
    }
    if (x == 0.0 || x == 1.0) {
        return x;
    }
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x)
                             + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df)
{
    if (!(df > 0.0)) {
        throw InvalidArgument("student_t: df must be positive");
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df)
{
    const double tail = student_t_two_sided(t, df) / 2.0;
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidArgument("student_t_quantile: p must be in (0, 1)");
    }
    if (p == 0.5) {
        return 0.0;
    }
    if (p < 0.5) {
        return -student_t_quantile(1.0 - p, df);
    }
    // Upper tail target; bracket then bisect on the tail, which keeps precision
    // for p close to 1.
    const double tail = 2.0 * (1.0 - p);
    double lo = 0.0;
    double hi = 1.0;
    while (student_t_two_sided(hi, df) > tail) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) {
            return std::numeric_limits<double>::infinity();
        }
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_two_sided(mid, df) > tail) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

MeanCi mean_ci95(std::span<const double> values)
{
    const std::size_t n = values.size();
    if (n < 2) {
        throw InvalidArgument("mean_ci95: need at least 2 values, got " + std::to_string(n));
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    MeanCi out;
    out.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - out.mean) * (v - out.mean);
    }
    out.sd = std::sqrt(ss / static_cast<double>(n - 1));
    out.half_width = student_t_quantile(0.975, static_cast<double>(n - 1)) * out.sd / std::sqrt(static_cast<double>(n));
    return out;
}

Significance paired_significance(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw InvalidArgument("paired_significance: length mismatch (" + std::to_string(a.size()) + " vs "
                              + std::to_string(b.size()) + ")");
    }
    if (a.size() < 2) {
        throw InvalidArgument("paired_significance: need at least 2 pairs");
    }
    const std::size_t n = a.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += a[i] - b[i];
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    Significance out;
    // Differences that are constant up to rounding count as zero variance.
    if (sd <= 1e-12 * std::max(1.0, std::fabs(mean))) {
        out.degenerate = true;
        out.p_value = std::fabs(mean) <= 1e-12 ? 1.0 : 0.0;
        return out;
    }
    out.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
    out.p_value = student_t_two_sided(out.t_statistic, static_cast<double>(n - 1));
    return out;
}

}  // namespace factmatch::eval
