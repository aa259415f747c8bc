#pragma once

// Stage 1: cubic B-spline systems, design matrices and per-series OLS filtering.

#include "tsclust/common.hpp"

#include <array>
#include <optional>
#include <span>

namespace tsclust {

/// Strictly increasing sample times shared by every series.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> points);

    /// m equally spaced points from lo to hi inclusive (m == 1 gives {lo}).
    static TimeGrid uniform(double lo, double hi, std::size_t m);

    std::span<const double> points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double front() const { return points_.front(); }
    double back() const { return points_.back(); }
    double operator[](std::size_t j) const { return points_[j]; }

    /// True if the points are exactly what uniform(front, back, size) produces.
    bool is_uniform() const;

private:
    std::vector<double> points_;
};

/// Clamped cubic B-spline system with d basis functions and d-2 equally
/// spaced breakpoints spanning [lo, hi].
class BasisSystem {
public:
    static constexpr int kOrder = 4;

    int order() const { return kOrder; }
    std::size_t size() const { return static_cast<std::size_t>(d_); }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& knots() const { return knots_; }

    bool contains(double t) const { return t >= lo_ && t <= hi_; }

    /// Writes the kOrder possibly-nonzero basis values at t into `values` and
    /// returns the index of the first of them. t must lie in the domain.
    std::size_t evaluate_nonzero(double t, std::array<double, kOrder>& values) const;

private:
    friend BasisSystem make_bspline_system(double lo, double hi, std::size_t d);
    BasisSystem(double lo, double hi, int d);

    double lo_;
    double hi_;
    int d_;
    std::vector<double> breakpoints_;
    std::vector<double> knots_;
};

BasisSystem make_bspline_system(double lo, double hi, std::size_t d);

/// The d-vector x(t). Throws ValidationError outside the domain.
Vector evaluate_basis(const BasisSystem& system, double t);

/// b' x(t).
double reconstruct(const BasisSystem& system, const VectorRef& b, double t);

/// X (m x d) with a factorization of X'X computed once and shared by all series.
///
/// X'X is treated as nonsingular when its smallest eigenvalue exceeds 1e-10
/// times the largest; otherwise fits go through the Moore-Penrose inverse of
/// X'X, which yields the minimum-norm least-squares solution.
class DesignMatrix {
public:
    static constexpr double kRankTolerance = 1e-10;

    explicit DesignMatrix(Matrix x);

    std::size_t rows() const { return static_cast<std::size_t>(x_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(x_.cols()); }
    const Matrix& matrix() const { return x_; }
    const Eigen::MatrixXd& gram() const { return gram_; }
    bool full_rank() const { return full_rank_; }

    /// Solves (X'X) b = rhs, or applies (X'X)^+ when singular.
    Vector solve_normal(const VectorRef& rhs) const;

    /// (X'X)^{-1}, or the pseudoinverse when singular.
    Eigen::MatrixXd gram_inverse() const;

private:
    Matrix x_;
    Eigen::MatrixXd gram_;
    bool full_rank_ = true;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::MatrixXd pinv_gram_;
};

DesignMatrix design_matrix(const BasisSystem& system, const TimeGrid& grid);

/// OLS coefficients of one series against X.
Vector ols_fit(const DesignMatrix& x, std::span<const double> z);

/// Per-column centering and scaling used to normalize coefficients.
struct ColumnStats {
    Vector mean;
    Vector scale;
};

/// n x d OLS coefficient vectors, optionally column-normalized.
struct CoefSet {
    Matrix values;
    std::optional<ColumnStats> normalization;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

/// Fits every row of `series` (n x m). Rows are independent; the result does
/// not depend on the number of threads.
CoefSet fit_coefficients(const DesignMatrix& x, const Matrix& series);

/// Residuals of the least-squares fit of the series on (1, t).
std::vector<double> detrend(std::span<const double> series, const TimeGrid& grid);

/// In-place detrend of every row.
void detrend_rows(Matrix& series, const TimeGrid& grid);

}  // namespace tsclust
