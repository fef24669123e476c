#pragma once

#include <cmath>
#include <limits>

namespace asr::stats {

namespace detail {

/// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x)
{
    constexpr int max_iter = 10000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;

    double const qab = a + b;
    double const qap = a + 1.0;
    double const qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        double const m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double const del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) {
            break;
        }
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x)
{
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double const log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b)
                             + a * std::log(x) + b * std::log1p(-x);
    double const front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df)
{
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    double const x = df / (df + t * t);
    return incomplete_beta(0.5 * df, 0.5, x);
}

/// P(T <= t).
inline double student_t_cdf(double t, double df)
{
    double const tail = 0.5 * student_t_two_sided_p(t, df);
    return t >= 0.0 ? 1.0 - tail : tail;
}

/// Upper tail P(F >= f) of the F distribution.
inline double f_survival(double f, double df1, double df2)
{
    if (std::isinf(f)) return 0.0;
    if (f <= 0.0) return 1.0;
    return incomplete_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

} // namespace asr::stats
