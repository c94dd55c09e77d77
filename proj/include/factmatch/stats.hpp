#pragma once

#include <span>

namespace factmatch::eval {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

/// Student's t distribution with `df` > 0 degrees of freedom.
double student_t_cdf(double t, double df);
/// P(|T| >= |t|).
double student_t_two_sided(double t, double df);
/// Inverse of student_t_cdf for p in (0, 1).
double student_t_quantile(double p, double df);

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;
    double sd = 0.0;
};

/// Mean with a two-sided 95% Student-t interval. Needs >= 2 values.
MeanCi mean_ci95(std::span<const double> values);

struct Significance {
    double p_value = 1.0;
    double t_statistic = 0.0;
    /// Fold differences had zero variance; p is 1 for equal means, else 0.
    bool degenerate = false;
};

/// Two-sided paired t-test over per-fold values.
Significance paired_significance(std::span<const double> a, std::span<const double> b);

}  // namespace factmatch::eval
