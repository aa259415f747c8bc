#pragma once

// alpha-trimmed k-means: the trimmed objective, one concentration step of the
// TCLUST iteration, and multi-start fitting.

#include "tsclust/mixtures.hpp"

#include <cstdint>

namespace tsclust {

/// Trim fraction alpha in [0, 1); floor(n (1 - alpha)) points are retained.
class TrimSpec {
public:
    explicit TrimSpec(double alpha = 0.0);

    double alpha() const { return alpha_; }

    /// floor(n (1 - alpha)), guarded against representation error in 1 - alpha.
    std::size_t retained(std::size_t n) const;

private:
    double alpha_;
};

/// What one concentration step saw: the means it scored against, the retained
/// set chosen from those scores, and its split into clusters.
struct TclustState {
    int iteration = 0;
    Matrix means;
    /// Indices of the retained points in increasing order.
    std::vector<std::size_t> retained;
    /// Cluster of each point, -1 for trimmed points.
    Labels assignment;
    /// tclust_objective at `means`.
    double objective = 0.0;
};

struct ClusterFit {
    MeanModel model;
    /// Nearest-mean label of every point at the final means.
    Labels labels;
    /// 1 for the n - h points trimmed at the final means.
    std::vector<std::uint8_t> trimmed;
    double objective = 0.0;
    int iterations = 0;
    int restart = 0;
    /// Objective at the start of each step and at the final means (winning restart).
    std::vector<double> objective_trace;
};

struct TclustOptions {
    int restarts = 20;
    int max_iter = 20;
    std::uint64_t seed = 0;
    double lambda = 1.0;
};

/// log D_c(u) = -log k - (d/2) log(2 pi lambda) - ||u - mu_c||^2 / (2 lambda).
double component_log_score(const VectorRef& u, const MeanModel& model, int c);

/// (1/n) times the sum, over the h points with the largest max_c D_c, of
/// max_c log D_c. The remaining n - h points contribute nothing.
double tclust_objective(const CoefSet& coefs, const MeanModel& model, const TrimSpec& trim);

/// One iteration: score every point, keep the h best (ties toward lower
/// point index), split them by nearest mean (ties toward lower cluster
/// index) and move each mean to its cluster centroid. An empty cluster is
/// re-seeded at the worst-fitting retained point not already used.
std::pair<MeanModel, TclustState> tclust_step(const CoefSet& coefs, const MeanModel& model, const TrimSpec& trim);

/// k distinct points drawn uniformly from the rows of `coefs`, using the
/// stream derived from (seed, restart).
Matrix initial_means(const CoefSet& coefs, int k, std::uint64_t seed, int restart);

/// Iterates tclust_step from `start` until the retained set and assignments
/// repeat or max_iter steps have run. Means come back in lexicographic order.
ClusterFit refine(const CoefSet& coefs, const MeanModel& start, const TrimSpec& trim, int max_iter);

/// Multi-start trimmed k-means; keeps the restart with the largest final
/// objective (ties toward the lower restart index).
ClusterFit trimmed_kmeans(const CoefSet& coefs, int k, const TrimSpec& trim, const TclustOptions& options = {});

/// Nearest-mean label for every point, trimmed or not.
Labels allocate_all(const CoefSet& coefs, const ClusterFit& fit);

}  // namespace tsclust
