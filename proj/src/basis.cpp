#include "tsclust/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsclust {

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points))
{
    require(!points_.empty(), "time grid needs at least one point");
    for (std::size_t j = 0; j < points_.size(); ++j) {
        require(std::isfinite(points_[j]), "time grid contains a non-finite point");
        if (j > 0) require(points_[j] > points_[j - 1], "time grid must be strictly increasing");
    }
}

TimeGrid TimeGrid::uniform(double lo, double hi, std::size_t m)
{
    require(m >= 1, "time grid needs at least one point");
    std::vector<double> points(m);
    if (m == 1) {
        points[0] = lo;
        return TimeGrid(std::move(points));
    }
    require(lo < hi, "uniform grid needs lo < hi");
    const double step = (hi - lo) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j + 1 < m; ++j) points[j] = lo + step * static_cast<double>(j);
    points[m - 1] = hi;
    return TimeGrid(std::move(points));
}

bool TimeGrid::is_uniform() const
{
    const TimeGrid reference = uniform(front(), back(), size());
    return std::equal(points_.begin(), points_.end(), reference.points_.begin());
}

BasisSystem::BasisSystem(double lo, double hi, int d) : lo_(lo), hi_(hi), d_(d)
{
    const int nbreaks = d - 2;
    breakpoints_.resize(static_cast<std::size_t>(nbreaks));
    const double step = (hi - lo) / static_cast<double>(nbreaks - 1);
    for (int j = 0; j < nbreaks - 1; ++j) breakpoints_[static_cast<std::size_t>(j)] = lo + step * j;
    breakpoints_.back() = hi;

    knots_.reserve(static_cast<std::size_t>(d + kOrder));
    for (int j = 0; j < kOrder - 1; ++j) knots_.push_back(lo);
    knots_.insert(knots_.end(), breakpoints_.begin(), breakpoints_.end());
    for (int j = 0; j < kOrder - 1; ++j) knots_.push_back(hi);
}

BasisSystem make_bspline_system(double lo, double hi, std::size_t d)
{
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "degenerate basis domain");
    require(d >= static_cast<std::size_t>(BasisSystem::kOrder),
            "basis size d must be at least the spline order (4)");
    return BasisSystem(lo, hi, static_cast<int>(d));
}

std::size_t BasisSystem::evaluate_nonzero(double t, std::array<double, kOrder>& values) const
{
    constexpr int p = kOrder - 1;
    // Knot span i with knots[i] <= t < knots[i+1]; the right endpoint belongs to the last span.
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    int span = static_cast<int>(it - knots_.begin()) - 1;
    span = std::clamp(span, p, d_ - 1);

    std::array<double, kOrder> left{};
    std::array<double, kOrder> right{};
    values[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - knots_[static_cast<std::size_t>(span + 1 - j)];
        right[j] = knots_[static_cast<std::size_t>(span + j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    return static_cast<std::size_t>(span - p);
}

Vector evaluate_basis(const BasisSystem& system, double t)
{
    if (!system.contains(t))
        throw ValidationError("t = " + std::to_string(t) + " lies outside the basis domain");
    std::array<double, BasisSystem::kOrder> local{};
    const std::size_t first = system.evaluate_nonzero(t, local);
    Vector x = Vector::Zero(static_cast<Eigen::Index>(system.size()));
    for (std::size_t r = 0; r < local.size(); ++r) x(static_cast<Eigen::Index>(first + r)) = local[r];
    return x;
}

double reconstruct(const BasisSystem& system, const VectorRef& b, double t)
{
    require(static_cast<std::size_t>(b.size()) == system.size(), "coefficient length does not match basis size");
    return b.dot(evaluate_basis(system, t));
}

DesignMatrix::DesignMatrix(Matrix x) : x_(std::move(x))
{
    require(x_.rows() >= 1 && x_.cols() >= 1, "design matrix must be nonempty");
    gram_ = x_.transpose() * x_;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_);
    const Vector& ev = eig.eigenvalues();  // ascending
    const double largest = ev(ev.size() - 1);
    full_rank_ = largest > 0.0 && ev(0) > kRankTolerance * largest;
    if (full_rank_) {
        llt_.compute(gram_);
        full_rank_ = llt_.info() == Eigen::Success;
    }
    if (!full_rank_) {
        Vector inv = Vector::Zero(ev.size());
        for (Eigen::Index j = 0; j < ev.size(); ++j)
            if (largest > 0.0 && ev(j) > kRankTolerance * largest) inv(j) = 1.0 / ev(j);
        pinv_gram_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    }
}

Vector DesignMatrix::solve_normal(const VectorRef& rhs) const
{
    if (full_rank_) return llt_.solve(rhs);
    return pinv_gram_ * rhs;
}

Eigen::MatrixXd DesignMatrix::gram_inverse() const
{
    if (full_rank_) return llt_.solve(Eigen::MatrixXd::Identity(gram_.rows(), gram_.cols()));
    return pinv_gram_;
}

DesignMatrix design_matrix(const BasisSystem& system, const TimeGrid& grid)
{
    const auto m = static_cast<Eigen::Index>(grid.size());
    Matrix x = Matrix::Zero(m, static_cast<Eigen::Index>(system.size()));
    std::array<double, BasisSystem::kOrder> local{};
    for (Eigen::Index j = 0; j < m; ++j) {
        const double t = grid[static_cast<std::size_t>(j)];
        if (!system.contains(t))
            throw ValidationError("grid point " + std::to_string(t) + " lies outside the basis domain");
        const std::size_t first = system.evaluate_nonzero(t, local);
        for (std::size_t r = 0; r < local.size(); ++r)
            x(j, static_cast<Eigen::Index>(first + r)) = local[r];
    }
    return DesignMatrix(std::move(x));
}

Vector ols_fit(const DesignMatrix& x, std::span<const double> z)
{
    require(z.size() == x.rows(), "series length does not match design rows");
    Eigen::Map<const Vector> zv(z.data(), static_cast<Eigen::Index>(z.size()));
    return x.solve_normal(x.matrix().transpose() * zv);
}

CoefSet fit_coefficients(const DesignMatrix& x, const Matrix& series)
{
    require(static_cast<std::size_t>(series.cols()) == x.rows(), "series length does not match design rows");
    const Eigen::Index n = series.rows();
    CoefSet out;
    out.values.resize(n, static_cast<Eigen::Index>(x.cols()));
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector rhs = x.matrix().transpose() * series.row(i).transpose();
        out.values.row(i) = x.solve_normal(rhs).transpose();
    }
    return out;
}

namespace {

struct TrendMoments {
    double mean_t = 0.0;
    double s_tt = 0.0;
};

TrendMoments trend_moments(const TimeGrid& grid)
{
    require(grid.size() >= 2, "detrending needs at least two time points");
    TrendMoments mo;
    for (double t : grid.points()) mo.mean_t += t;
    mo.mean_t /= static_cast<double>(grid.size());
    for (double t : grid.points()) mo.s_tt += (t - mo.mean_t) * (t - mo.mean_t);
    if (!(mo.s_tt > 0.0)) throw ValidationError("detrending needs a non-constant time grid");
    return mo;
}

void detrend_in_place(double* z, const TimeGrid& grid, const TrendMoments& mo)
{
    const std::size_t m = grid.size();
    double mean_z = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean_z += z[j];
    mean_z /= static_cast<double>(m);
    double s_tz = 0.0;
    for (std::size_t j = 0; j < m; ++j) s_tz += (grid[j] - mo.mean_t) * (z[j] - mean_z);
    const double slope = s_tz / mo.s_tt;
    for (std::size_t j = 0; j < m; ++j) z[j] = z[j] - mean_z - slope * (grid[j] - mo.mean_t);
}

}  // namespace

std::vector<double> detrend(std::span<const double> series, const TimeGrid& grid)
{
    require(series.size() == grid.size(), "series length does not match grid");
    const TrendMoments mo = trend_moments(grid);
    std::vector<double> out(series.begin(), series.end());
    detrend_in_place(out.data(), grid, mo);
    return out;
}

void detrend_rows(Matrix& series, const TimeGrid& grid)
{
    require(static_cast<std::size_t>(series.cols()) == grid.size(), "series length does not match grid");
    const TrendMoments mo = trend_moments(grid);
    const Eigen::Index n = series.rows();
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) detrend_in_place(series.row(i).data(), grid, mo);
}

}  // namespace tsclust
