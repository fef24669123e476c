#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracles {

/// Student-t density.
inline double t_density(double x, double df)
{
    double const logc = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) - 0.5 * std::log(df * M_PI);
    return std::exp(logc - (df + 1.0) / 2.0 * std::log1p(x * x / df));
}

/// Two-sided p by composite Simpson integration of the density over [0, |t|].
inline double simpson_two_sided_p(double t, double df, std::size_t intervals = 4000)
{
    double const b = std::fabs(t);
    if (b == 0.0) return 1.0;
    double const h = b / static_cast<double>(intervals);
    double s = t_density(0.0, df) + t_density(b, df);
    for (std::size_t i = 1; i < intervals; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * t_density(h * static_cast<double>(i), df);
    }
    double const half_mass = s * h / 3.0;
    return 1.0 - 2.0 * half_mass;
}

/// Brute-force paired t statistic.
inline double paired_t(std::vector<double> const & a, std::vector<double> const & b)
{
    auto const n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
    return mean / std::sqrt(ss / (n - 1.0)) * std::sqrt(n);
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
inline std::vector<std::vector<double>> invert(std::vector<std::vector<double>> m)
{
    auto const k = m.size();
    std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < k; ++r) {
            if (std::fabs(m[r][c]) > std::fabs(m[p][c])) p = r;
        }
        if (m[p][c] == 0.0) throw std::runtime_error("singular");
        std::swap(m[p], m[c]);
        std::swap(inv[p], inv[c]);
        double const d = m[c][c];
        for (std::size_t j = 0; j < k; ++j) {
            m[c][j] /= d;
            inv[c][j] /= d;
        }
        for (std::size_t r = 0; r < k; ++r) {
            if (r == c) continue;
            double const f = m[r][c];
            for (std::size_t j = 0; j < k; ++j) {
                m[r][j] -= f * m[c][j];
                inv[r][j] -= f * inv[c][j];
            }
        }
    }
    return inv;
}

struct NormalEquationsFit
{
    std::vector<double> beta;
    std::vector<double> se;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double f = 0.0;
};

/// OLS through (X'X)^{-1} X'y; `rows` are observations, column 0 is the intercept.
inline NormalEquationsFit normal_equations(std::vector<std::vector<double>> const & rows, std::vector<double> const & y)
{
    auto const n = rows.size();
    auto const k = rows.front().size();
    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    std::vector<double> xty(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < k; ++a) {
            xty[a] += rows[i][a] * y[i];
            for (std::size_t b = 0; b < k; ++b) xtx[a][b] += rows[i][a] * rows[i][b];
        }
    }
    auto inv = invert(xtx);
    NormalEquationsFit fit;
    fit.beta.assign(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) fit.beta[a] += inv[a][b] * xty[b];
    }
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= static_cast<double>(n);
    double rss = 0.0;
    double tss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double yhat = 0.0;
        for (std::size_t a = 0; a < k; ++a) yhat += rows[i][a] * fit.beta[a];
        rss += (y[i] - yhat) * (y[i] - yhat);
        tss += (y[i] - ybar) * (y[i] - ybar);
    }
    auto const dn = static_cast<double>(n);
    auto const dk = static_cast<double>(k);
    double const sigma2 = rss / (dn - dk);
    for (std::size_t a = 0; a < k; ++a) fit.se.push_back(std::sqrt(sigma2 * inv[a][a]));
    fit.r2 = 1.0 - rss / tss;
    fit.adj_r2 = 1.0 - (1.0 - fit.r2) * (dn - 1.0) / (dn - dk);
    fit.f = (fit.r2 / (dk - 1.0)) / ((1.0 - fit.r2) / (dn - dk));
    return fit;
}

} // namespace oracles
