#pragma once

#include "asr/error.hpp"
#include "asr/stats/distributions.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asr::stats {

/// Dense column-major matrix; just enough for least squares.
class Matrix
{
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows)
    , cols_(cols)
    , data_(rows * cols, fill)
    { }

    static Matrix from_columns(std::vector<std::vector<double>> const & columns)
    {
        if (columns.empty()) {
            return {};
        }
        Matrix m(columns.front().size(), columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            require(columns[c].size() == m.rows_, ErrorCode::InvalidInput, "design columns differ in length");
            for (std::size_t r = 0; r < m.rows_; ++r) {
                m(r, c) = columns[c][r];
            }
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    double & operator()(std::size_t r, std::size_t c) noexcept { return data_[c * rows_ + r]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[c * rows_ + r]; }

    [[nodiscard]] std::span<double const> column(std::size_t c) const noexcept
    {
        return {data_.data() + c * rows_, rows_};
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Stars { None, One, Two, Three };

/// Conventional significance markers: p<0.1 *, p<0.05 **, p<0.01 ***.
constexpr Stars stars_for(double p_value) noexcept
{
    if (p_value < 0.01) return Stars::Three;
    if (p_value < 0.05) return Stars::Two;
    if (p_value < 0.1) return Stars::One;
    return Stars::None;
}

constexpr std::string_view to_string(Stars s) noexcept
{
    switch (s) {
    case Stars::None: return "";
    case Stars::One: return "*";
    case Stars::Two: return "**";
    case Stars::Three: return "***";
    }
    return "";
}

struct Coefficient
{
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    Stars stars = Stars::None;
};

struct RegressionFit
{
    std::vector<Coefficient> coefficients;
    std::vector<double> residuals;
    double rss = 0.0;
    double tss = 0.0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double residual_se = 0.0;
    double f_statistic = 0.0;
    double f_p_value = 1.0;
    Stars f_stars = Stars::None;
    std::size_t df_model = 0;
    std::size_t df_resid = 0;
    std::size_t n = 0;

    [[nodiscard]] Coefficient const * find(std::string_view name) const noexcept
    {
        for (auto const & c : coefficients) {
            if (c.name == name) {
                return &c;
            }
        }
        return nullptr;
    }

    [[nodiscard]] Coefficient const & coef(std::string_view name) const
    {
        auto const * c = find(name);
        require(c != nullptr, ErrorCode::NotFound, "no coefficient '" + std::string(name) + "'");
        return *c;
    }
};

/// Householder QR least squares with classical (homoskedastic) standard
/// errors. `X` must already contain the intercept column; R-squared and F are
/// computed against the intercept-only model.
inline RegressionFit ols_fit(std::span<double const> y, Matrix const & X, std::vector<std::string> const & names)
{
    auto const n = X.rows();
    auto const k = X.cols();
    require(names.size() == k, ErrorCode::InvalidInput, "one name per design column is required");
    require(y.size() == n, ErrorCode::InvalidInput, "response and design differ in length");
    require(k >= 1, ErrorCode::InvalidInput, "design has no columns");
    require(n > k, ErrorCode::InsufficientData,
            "need more observations than coefficients (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");

    Matrix a = X;
    std::vector<double> qty(y.begin(), y.end());
    std::vector<double> rdiag(k, 0.0);
    std::vector<double> col_norm(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (double v : X.column(j)) s += v * v;
        col_norm[j] = std::sqrt(s);
    }

    std::vector<double> v(n);
    for (std::size_t j = 0; j < k; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < n; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            rdiag[j] = 0.0;
            continue;
        }
        double const alpha = a(j, j) > 0.0 ? -norm : norm;
        double vnorm2 = 0.0;
        for (std::size_t i = j; i < n; ++i) {
            v[i] = a(i, j);
        }
        v[j] -= alpha;
        for (std::size_t i = j; i < n; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) {
            rdiag[j] = a(j, j);
            continue;
        }
        auto reflect = [&](auto && get) {
            double dot = 0.0;
            for (std::size_t i = j; i < n; ++i) dot += v[i] * get(i);
            double const scale = 2.0 * dot / vnorm2;
            for (std::size_t i = j; i < n; ++i) get(i) -= scale * v[i];
        };
        for (std::size_t c = j; c < k; ++c) {
            reflect([&](std::size_t i) -> double & { return a(i, c); });
        }
        reflect([&](std::size_t i) -> double & { return qty[i]; });
        rdiag[j] = a(j, j);
    }

    std::string collinear;
    for (std::size_t j = 0; j < k; ++j) {
        if (col_norm[j] == 0.0 || std::fabs(rdiag[j]) <= 1e-10 * col_norm[j]) {
            if (!collinear.empty()) collinear += ", ";
            collinear += names[j];
        }
    }
    require(collinear.empty(), ErrorCode::RankDeficient, "design is not full column rank; collinear: " + collinear);

    // Back substitution R beta = Q'y.
    std::vector<double> beta(k, 0.0);
    for (std::size_t jj = k; jj-- > 0;) {
        double s = qty[jj];
        for (std::size_t c = jj + 1; c < k; ++c) s -= a(jj, c) * beta[c];
        beta[jj] = s / a(jj, jj);
    }

    // R^{-1}, upper triangular; (X'X)^{-1} = R^{-1} R^{-T}.
    Matrix rinv(k, k);
    for (std::size_t col = 0; col < k; ++col) {
        for (std::size_t rr = col + 1; rr-- > 0;) {
            double s = rr == col ? 1.0 : 0.0;
            for (std::size_t c = rr + 1; c <= col; ++c) s -= a(rr, c) * rinv(c, col);
            rinv(rr, col) = s / a(rr, rr);
        }
    }

    RegressionFit fit;
    fit.n = n;
    fit.df_resid = n - k;
    fit.df_model = k - 1;
    fit.residuals.resize(n);
    double ybar = 0.0;
    for (double v_ : y) ybar += v_;
    ybar /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double fitted = 0.0;
        for (std::size_t c = 0; c < k; ++c) fitted += X(i, c) * beta[c];
        fit.residuals[i] = y[i] - fitted;
        fit.rss += fit.residuals[i] * fit.residuals[i];
        fit.tss += (y[i] - ybar) * (y[i] - ybar);
    }
    require(fit.tss > 0.0, ErrorCode::ZeroVariance, "dependent variable has zero variance");

    auto const dn = static_cast<double>(n);
    auto const dk = static_cast<double>(k);
    double const sigma2 = fit.rss / (dn - dk);
    fit.residual_se = std::sqrt(sigma2);
    fit.r2 = 1.0 - fit.rss / fit.tss;
    fit.adj_r2 = 1.0 - (1.0 - fit.r2) * (dn - 1.0) / (dn - dk);
    if (k > 1) {
        fit.f_statistic = (fit.r2 / (dk - 1.0)) / ((1.0 - fit.r2) / (dn - dk));
        if (fit.r2 >= 1.0) {
            fit.f_statistic = std::numeric_limits<double>::infinity();
        }
        fit.f_p_value = f_survival(fit.f_statistic, dk - 1.0, dn - dk);
    } else {
        fit.f_statistic = std::numeric_limits<double>::quiet_NaN();
        fit.f_p_value = std::numeric_limits<double>::quiet_NaN();
    }
    fit.f_stars = std::isnan(fit.f_p_value) ? Stars::None : stars_for(fit.f_p_value);

    fit.coefficients.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t c = j; c < k; ++c) s += rinv(j, c) * rinv(j, c);
        Coefficient coef;
        coef.name = names[j];
        coef.estimate = beta[j];
        coef.std_error = std::sqrt(sigma2 * s);
        if (coef.std_error > 0.0) {
            coef.t_stat = coef.estimate / coef.std_error;
        } else {
            coef.t_stat = coef.estimate == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                               : std::copysign(std::numeric_limits<double>::infinity(), coef.estimate);
        }
        coef.p_value = student_t_two_sided_p(coef.t_stat, dn - dk);
        coef.stars = std::isnan(coef.p_value) ? Stars::None : stars_for(coef.p_value);
        fit.coefficients.push_back(std::move(coef));
    }
    return fit;
}

} // namespace asr::stats
