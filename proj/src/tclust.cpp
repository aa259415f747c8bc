#include "tsclust/tclust.hpp"

#include "tsclust/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace tsclust {

TrimSpec::TrimSpec(double alpha) : alpha_(alpha)
{
    require(alpha >= 0.0 && alpha < 1.0, "trim level alpha must lie in [0, 1)");
}

std::size_t TrimSpec::retained(std::size_t n) const
{
    const double exact = static_cast<double>(n) * (1.0 - alpha_);
    return static_cast<std::size_t>(std::floor(exact + 1e-9));
}

namespace {

double score_constant(std::size_t k, std::size_t d, double lambda)
{
    return -std::log(static_cast<double>(k)) - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * lambda);
}

struct Scores {
    Labels nearest;
    std::vector<double> dist;  // squared distance to the nearest mean
};

Scores score_points(const Matrix& data, const Matrix& means)
{
    const Eigen::Index n = data.rows();
    Scores s;
    s.nearest.resize(static_cast<std::size_t>(n));
    s.dist.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [c, dist] = nearest_mean(data.row(i).data(), means);
        s.nearest[static_cast<std::size_t>(i)] = c;
        s.dist[static_cast<std::size_t>(i)] = dist;
    }
    return s;
}

// The h points with the largest max_c D_c, i.e. the smallest nearest-mean
// distance; ties go to the lower point index. Returned in increasing index order.
std::vector<std::size_t> retain_best(const std::vector<double>& dist, std::size_t h)
{
    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto better = [&dist](std::size_t a, std::size_t b) {
        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
    };
    if (h < order.size()) {
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h), order.end(), better);
        order.resize(h);
    }
    std::sort(order.begin(), order.end());
    return order;
}

double objective_from(const Scores& s, const std::vector<std::size_t>& retained, std::size_t k, std::size_t d,
                      double lambda)
{
    const double constant = score_constant(k, d, lambda);
    double total = 0.0;
    for (std::size_t i : retained) total += constant - s.dist[i] / (2.0 * lambda);
    return total / static_cast<double>(s.dist.size());
}

struct Partition {
    std::vector<std::size_t> retained;
    Labels assignment;
};

Partition partition(const Scores& s, std::size_t h)
{
    Partition p;
    p.retained = retain_best(s.dist, h);
    p.assignment.assign(s.dist.size(), -1);
    for (std::size_t i : p.retained) p.assignment[i] = s.nearest[i];
    return p;
}

}  // namespace

double component_log_score(const VectorRef& u, const MeanModel& model, int c)
{
    require(c >= 0 && static_cast<std::size_t>(c) < model.k(), "cluster index out of range");
    require(static_cast<std::size_t>(u.size()) == model.dim(), "point and means differ in dimension");
    const double dist = (u - model.means().row(c).transpose()).squaredNorm();
    return score_constant(model.k(), model.dim(), model.lambda()) - dist / (2.0 * model.lambda());
}

double tclust_objective(const CoefSet& coefs, const MeanModel& model, const TrimSpec& trim)
{
    require(coefs.rows() >= 1, "objective needs at least one point");
    require(coefs.cols() == model.dim(), "coefficients and means differ in dimension");
    const std::size_t h = trim.retained(coefs.rows());
    require(h >= 1, "trim level leaves no points (h < 1)");
    const Scores s = score_points(coefs.values, model.means());
    return objective_from(s, retain_best(s.dist, h), model.k(), model.dim(), model.lambda());
}

std::pair<MeanModel, TclustState> tclust_step(const CoefSet& coefs, const MeanModel& model, const TrimSpec& trim)
{
    require(coefs.cols() == model.dim(), "coefficients and means differ in dimension");
    const std::size_t k = model.k();
    const std::size_t h = trim.retained(coefs.rows());
    require(h >= k, "trim level retains fewer points than clusters (h < k)");

    const Scores s = score_points(coefs.values, model.means());
    Partition part = partition(s, h);

    TclustState state;
    state.means = model.means();
    state.objective = objective_from(s, part.retained, k, model.dim(), model.lambda());

    const auto d = static_cast<Eigen::Index>(model.dim());
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i : part.retained) {
        const int c = part.assignment[i];
        sums.row(c) += coefs.values.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(c)];
    }

    std::vector<std::size_t> worst;  // retained points, worst fit first
    std::size_t next_worst = 0;
    Matrix next = sums;
    for (std::size_t c = 0; c < k; ++c) {
        const auto row = static_cast<Eigen::Index>(c);
        if (counts[c] > 0) {
            next.row(row) /= static_cast<double>(counts[c]);
            continue;
        }
        if (worst.empty()) {
            worst = part.retained;
            std::stable_sort(worst.begin(), worst.end(),
                             [&s](std::size_t a, std::size_t b) { return s.dist[a] > s.dist[b]; });
        }
        next.row(row) = coefs.values.row(static_cast<Eigen::Index>(worst[next_worst % worst.size()]));
        ++next_worst;
    }

    state.retained = std::move(part.retained);
    state.assignment = std::move(part.assignment);
    return {MeanModel(std::move(next), model.lambda(), trim.alpha()), std::move(state)};
}

Matrix initial_means(const CoefSet& coefs, int k, std::uint64_t seed, int restart)
{
    const std::size_t n = coefs.rows();
    require(k >= 1 && static_cast<std::size_t>(k) <= n, "cannot draw k distinct initial points");
    Rng rng = make_stream(seed, {0x7C1u, static_cast<std::uint64_t>(restart)});
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    while (chosen.size() < static_cast<std::size_t>(k)) {
        const std::size_t i = pick(rng);
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
    }
    Matrix means(k, coefs.values.cols());
    for (int c = 0; c < k; ++c) means.row(c) = coefs.values.row(static_cast<Eigen::Index>(chosen[static_cast<std::size_t>(c)]));
    return means;
}

ClusterFit refine(const CoefSet& coefs, const MeanModel& start, const TrimSpec& trim, int max_iter)
{
    require(max_iter >= 1, "max_iter must be at least 1");
    MeanModel current = start;
    Labels previous;
    std::vector<double> trace;
    int iterations = 0;
    for (int it = 1; it <= max_iter; ++it) {
        auto [next, state] = tclust_step(coefs, current, trim);
        trace.push_back(state.objective);
        iterations = it;
        if (state.assignment == previous) break;
        previous = std::move(state.assignment);
        current = std::move(next);
    }

    // Labels are computed after sorting, so they already refer to the canonical order.
    current.sort_lexicographic();
    const Scores s = score_points(coefs.values, current.means());
    const std::size_t h = trim.retained(coefs.rows());
    const Partition part = partition(s, h);

    ClusterFit fit{current, {}, {}, 0.0, iterations, 0, std::move(trace)};
    fit.objective = objective_from(s, part.retained, current.k(), current.dim(), current.lambda());
    fit.objective_trace.push_back(fit.objective);
    fit.labels = s.nearest;
    fit.trimmed.assign(coefs.rows(), 1);
    for (std::size_t i : part.retained) fit.trimmed[i] = 0;
    return fit;
}

ClusterFit trimmed_kmeans(const CoefSet& coefs, int k, const TrimSpec& trim, const TclustOptions& options)
{
    const std::size_t n = coefs.rows();
    require(n >= 1, "trimmed k-means needs at least one point");
    require(k >= 1, "trimmed k-means needs k >= 1");
    require(trim.retained(n) >= static_cast<std::size_t>(k),
            "trim level retains fewer points than clusters (k > h)");
    require(options.restarts >= 1, "restarts must be at least 1");
    require(options.max_iter >= 1, "max_iter must be at least 1");

    std::vector<std::optional<ClusterFit>> fits(static_cast<std::size_t>(options.restarts));
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < options.restarts; ++r) {
        const MeanModel start(initial_means(coefs, k, options.seed, r), options.lambda, trim.alpha());
        fits[static_cast<std::size_t>(r)] = refine(coefs, start, trim, options.max_iter);
        fits[static_cast<std::size_t>(r)]->restart = r;
    }

    std::size_t best = 0;
    for (std::size_t r = 1; r < fits.size(); ++r)
        if (fits[r]->objective > fits[best]->objective) best = r;
    return std::move(*fits[best]);
}

Labels allocate_all(const CoefSet& coefs, const ClusterFit& fit)
{
    require(coefs.cols() == fit.model.dim(), "coefficients and means differ in dimension");
    return score_points(coefs.values, fit.model.means()).nearest;
}

}  // namespace tsclust
