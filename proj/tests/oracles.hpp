#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's numerical code.

#include "tsclust/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using tsclust::Labels;
using tsclust::Matrix;

/// Cubic Bernstein polynomial C(3,i) s^i (1-s)^(3-i) on [lo, hi].
inline double bernstein3(int i, double t, double lo, double hi)
{
    const double s = (t - lo) / (hi - lo);
    const double c[] = {1, 3, 3, 1};
    return c[i] * std::pow(s, i) * std::pow(1.0 - s, 3 - i);
}

/// Textbook Cox-de Boor recursion straight from the definition, with 0/0 = 0
/// and the last nonempty span closed on the right.
inline double cox_de_boor(const std::vector<double>& knots, int i, int p, double t)
{
    if (p == 0) {
        const double a = knots[static_cast<std::size_t>(i)], b = knots[static_cast<std::size_t>(i) + 1];
        if (a < b && t >= a && t < b) return 1.0;
        // right end of the domain belongs to the last nonempty span
        if (a < b && t == b && b == knots.back()) {
            for (std::size_t j = static_cast<std::size_t>(i) + 1; j + 1 < knots.size(); ++j)
                if (knots[j] < knots[j + 1]) return 0.0;
            return 1.0;
        }
        return 0.0;
    }
    double left = 0.0, right = 0.0;
    const auto ki = knots[static_cast<std::size_t>(i)];
    const auto kip = knots[static_cast<std::size_t>(i + p)];
    const auto ki1 = knots[static_cast<std::size_t>(i + 1)];
    const auto kip1 = knots[static_cast<std::size_t>(i + p + 1)];
    if (kip > ki) left = (t - ki) / (kip - ki) * cox_de_boor(knots, i, p - 1, t);
    if (kip1 > ki1) right = (kip1 - t) / (kip1 - ki1) * cox_de_boor(knots, i + 1, p - 1, t);
    return left + right;
}

/// Clamped cubic knot vector with d basis functions over [lo, hi].
inline std::vector<double> clamped_knots(double lo, double hi, int d)
{
    std::vector<double> k;
    const int pieces = d - 3;
    for (int r = 0; r < 3; ++r) k.push_back(lo);
    for (int j = 0; j <= pieces; ++j) k.push_back(j == pieces ? hi : lo + (hi - lo) * j / pieces);
    for (int r = 0; r < 3; ++r) k.push_back(hi);
    return k;
}

/// Minimum-norm least squares via a full SVD of X.
inline Eigen::VectorXd svd_lstsq(const Eigen::MatrixXd& x, const Eigen::VectorXd& z)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double tol = s.size() ? s(0) * 1e-10 : 0.0;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index j = 0; j < s.size(); ++j)
        if (s(j) > tol) coef += svd.matrixV().col(j) * (svd.matrixU().col(j).dot(z) / s(j));
    return coef;
}

/// Linear detrend by solving the 2x2 normal equations in long double.
inline std::vector<double> detrend_2x2(const std::vector<double>& z, const std::vector<double>& t)
{
    long double n = static_cast<long double>(z.size()), st = 0, stt = 0, sz = 0, stz = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        st += t[j];
        stt += static_cast<long double>(t[j]) * t[j];
        sz += z[j];
        stz += static_cast<long double>(t[j]) * z[j];
    }
    const long double det = n * stt - st * st;
    const long double slope = (n * stz - st * sz) / det;
    const long double icept = (sz - slope * st) / n;
    std::vector<double> r(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) r[j] = static_cast<double>(z[j] - icept - slope * t[j]);
    return r;
}

/// Gaussian log-density through an explicit inverse and LU determinant.
inline double gauss_logpdf(const Eigen::VectorXd& b, const Eigen::VectorXd& mu, const Eigen::MatrixXd& v)
{
    const Eigen::VectorXd r = b - mu;
    const double quad = r.dot(v.fullPivLu().inverse() * r);
    const double det = v.fullPivLu().determinant();
    return -0.5 * static_cast<double>(b.size()) * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * quad;
}

/// log sum_c w_c phi(b; mu_c, V_c), summed directly (no log-sum-exp).
inline double mixture_logpdf_direct(const Eigen::VectorXd& b, const std::vector<double>& w,
                                    const std::vector<Eigen::VectorXd>& mu, const std::vector<Eigen::MatrixXd>& v)
{
    double total = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) total += w[c] * std::exp(gauss_logpdf(b, mu[c], v[c]));
    return std::log(total);
}

/// ARI from a dense contingency table and long-double binomials.
inline double ari_contingency(const Labels& a, const Labels& b)
{
    std::map<int, int> ra, rb;
    for (int x : a) ra.emplace(x, static_cast<int>(ra.size()));
    for (int x : b) rb.emplace(x, static_cast<int>(rb.size()));
    std::vector<std::vector<long double>> table(ra.size(), std::vector<long double>(rb.size(), 0));
    for (std::size_t i = 0; i < a.size(); ++i) table[static_cast<std::size_t>(ra[a[i]])][static_cast<std::size_t>(rb[b[i]])] += 1;
    auto c2 = [](long double x) { return x * (x - 1) / 2; };
    long double sij = 0, sa = 0, sb = 0;
    std::vector<long double> col(rb.size(), 0);
    for (const auto& row : table) {
        long double r = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            sij += c2(row[j]);
            r += row[j];
            col[j] += row[j];
        }
        sa += c2(r);
    }
    for (long double c : col) sb += c2(c);
    const long double expected = sa * sb / c2(static_cast<long double>(a.size()));
    const long double maxi = (sa + sb) / 2;
    if (maxi == expected) return 1.0;
    return static_cast<double>((sij - expected) / (maxi - expected));
}

/// ARI from explicit pair counting (O(n^2)).
inline double ari_pairs(const Labels& a, const Labels& b)
{
    long double both = 0, only_a = 0, only_b = 0, neither = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            if (sa && sb) both += 1;
            else if (sa) only_a += 1;
            else if (sb) only_b += 1;
            else neither += 1;
        }
    const long double num = 2 * (both * neither - only_a * only_b);
    const long double den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if (den == 0) return 1.0;
    return static_cast<double>(num / den);
}

/// Plain Lloyd iteration: assign to the nearest mean (ties to the lower index),
/// move means to centroids, stop when the assignment repeats or after max_iter
/// assignment passes. An empty cluster takes the point farthest from its
/// nearest mean (ties to the lower index), then the next farthest, and so on.
/// Returns the labels at the final means.
struct LloydResult {
    Labels labels;
    Matrix means;
    bool had_empty = false;
};

inline LloydResult lloyd(const Matrix& data, Matrix means, int max_iter)
{
    const auto n = data.rows(), k = means.rows(), d = data.cols();
    std::vector<double> nearest(static_cast<std::size_t>(n));
    auto assign = [&](const Matrix& mu) {
        Labels lab(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < k; ++c) {
                double s = 0;
                for (Eigen::Index j = 0; j < d; ++j) {
                    const double diff = data(i, j) - mu(c, j);
                    s += diff * diff;
                }
                if (s < best_d) {
                    best_d = s;
                    best = static_cast<int>(c);
                }
            }
            lab[static_cast<std::size_t>(i)] = best;
            nearest[static_cast<std::size_t>(i)] = best_d;
        }
        return lab;
    };
    LloydResult res;
    Labels prev;
    for (int it = 0; it < max_iter; ++it) {
        Labels lab = assign(means);
        if (lab == prev) break;
        Matrix sums = Matrix::Zero(k, d);
        std::vector<int> cnt(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = lab[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < d; ++j) sums(c, j) += data(i, j);
            ++cnt[static_cast<std::size_t>(c)];
        }
        std::vector<Eigen::Index> far;
        std::size_t used = 0;
        for (Eigen::Index c = 0; c < k; ++c) {
            if (cnt[static_cast<std::size_t>(c)] > 0) {
                for (Eigen::Index j = 0; j < d; ++j) means(c, j) = sums(c, j) / cnt[static_cast<std::size_t>(c)];
                continue;
            }
            res.had_empty = true;
            if (far.empty()) {
                for (Eigen::Index i = 0; i < n; ++i) far.push_back(i);
                std::stable_sort(far.begin(), far.end(), [&](Eigen::Index a, Eigen::Index b) {
                    return nearest[static_cast<std::size_t>(a)] > nearest[static_cast<std::size_t>(b)];
                });
            }
            means.row(c) = data.row(far[used++ % far.size()]);
        }
        prev = std::move(lab);
    }
    res.labels = assign(means);
    res.means = means;
    return res;
}

/// Canonical relabeling by order of first appearance.
inline Labels canonical(const Labels& lab)
{
    std::map<int, int> ids;
    Labels out(lab.size());
    for (std::size_t i = 0; i < lab.size(); ++i) out[i] = ids.emplace(lab[i], static_cast<int>(ids.size())).first->second;
    return out;
}

/// Exact maximum of the trimmed spherical objective over all retained subsets
/// of size h and all splits of them into at most k groups (means at centroids).
inline double tclust_exhaustive(const Matrix& u, int k, std::size_t h, double lambda)
{
    const auto n = static_cast<std::size_t>(u.rows());
    const auto d = static_cast<double>(u.cols());
    const double constant = -std::log(static_cast<double>(k)) - 0.5 * d * std::log(2.0 * std::numbers::pi * lambda);
    double best_sse = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != h) continue;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1u) idx.push_back(i);
        std::size_t combos = 1;
        for (std::size_t r = 0; r < h; ++r) combos *= static_cast<std::size_t>(k);
        for (std::size_t code = 0; code < combos; ++code) {
            std::vector<int> g(h);
            std::size_t c = code;
            for (std::size_t r = 0; r < h; ++r) {
                g[r] = static_cast<int>(c % static_cast<std::size_t>(k));
                c /= static_cast<std::size_t>(k);
            }
            double sse = 0.0;
            for (int grp = 0; grp < k; ++grp) {
                Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(u.cols());
                int cnt = 0;
                for (std::size_t r = 0; r < h; ++r)
                    if (g[r] == grp) {
                        mean += u.row(static_cast<Eigen::Index>(idx[r]));
                        ++cnt;
                    }
                if (!cnt) continue;
                mean /= cnt;
                for (std::size_t r = 0; r < h; ++r)
                    if (g[r] == grp) sse += (u.row(static_cast<Eigen::Index>(idx[r])) - mean).squaredNorm();
            }
            best_sse = std::min(best_sse, sse);
        }
    }
    return (static_cast<double>(h) * constant - best_sse / (2.0 * lambda)) / static_cast<double>(n);
}

/// Mean Euclidean distance between estimated and true means under the best
/// one-to-one matching (exhaustive over permutations).
inline double matched_mean_error(const Matrix& est, const Matrix& truth)
{
    std::vector<int> perm(static_cast<std::size_t>(truth.rows()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t c = 0; c < perm.size(); ++c)
            total += (est.row(static_cast<Eigen::Index>(c)) - truth.row(perm[c])).norm();
        best = std::min(best, total / static_cast<double>(perm.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace oracle
