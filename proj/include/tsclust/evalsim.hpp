#pragma once

// Adjusted Rand index and the S1/S2 simulation studies.

#include "tsclust/basis.hpp"
#include "tsclust/common.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace tsclust {

/// Hubert-Arabie adjusted Rand index of two labelings (any integer ids).
/// Defined as 1 when the chance-corrected denominator vanishes.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

enum class Study { S1, S2 };

Study parse_study(std::string_view name);
std::string_view to_string(Study study);

/// Generative setup: five classes of 10-coefficient cubic B-spline curves on
/// [0, 1], coefficient covariance V_c and Gaussian noise of SD sigma.
struct SimConfig {
    Study study = Study::S1;
    std::size_t n = 500;
    std::size_t m = 100;
    std::uint64_t seed = 0;
    int classes = 5;
    int d_gen = 10;
    double sigma = 0.25;
    /// Diagonal SD of V_c.
    double coef_sd = 0.25;
    /// Square root of the S2 off-diagonal entry of V_c (zero for S1).
    double coef_offdiag_sd = 0.15;

    static SimConfig make(Study study, std::size_t m, std::size_t n, std::uint64_t seed);

    /// Rows are mu_1..mu_5: zero, (1,1,0..), (-1,-1,0..), (0..,1,1), (0..,-1,-1).
    Matrix class_means() const;
    Eigen::MatrixXd coef_covariance() const;
    void validate() const;
};

struct LabeledDataset {
    TimeGrid grid;
    Matrix series;        // n x m noisy samples
    Labels labels;        // true class, 0-based
    Matrix coefficients;  // generating B_i, n x d_gen
};

/// Draws every class uniformly, B_i ~ N(mu_c, V_c), and samples
/// B_i' x(t_j) + N(0, sigma^2) on the uniform m-point grid of [0, 1].
LabeledDataset simulate_study(const SimConfig& cfg);

/// Average coefficient variance when V_c + sigma^2 (X'X)^{-1} is replaced by
/// lambda I: tr(V_c + sigma^2 (X'X)^{-1}) / d.
double spherical_scale(const SimConfig& cfg);

enum class MethodKind { Gmm, TrimmedKMeans };

struct Method {
    MethodKind kind = MethodKind::TrimmedKMeans;
    double alpha = 0.0;
    std::string name;

    static Method gmm() { return {MethodKind::Gmm, 0.0, "gmm"}; }
    static Method kmeans() { return {MethodKind::TrimmedKMeans, 0.0, "kmeans"}; }
    static Method trimmed(double alpha);
    static std::vector<Method> all();
};

Method parse_method(std::string_view name);

struct StudyCell {
    std::size_t m = 100;
    std::size_t n = 500;
};

/// Parses "100x500,100x1000" (m x n).
std::vector<StudyCell> parse_grid(std::string_view text);

struct StudyPlan {
    Study study = Study::S1;
    std::vector<StudyCell> cells;
    int replicates = 50;
    std::vector<Method> methods = Method::all();
    std::uint64_t seed = 0;
    /// Trimmed k-means starts and iterations (the tkmeans defaults).
    int restarts = 50;
    int max_iter = 20;
    int gmm_restarts = 5;
};

struct StudyRow {
    Study study = Study::S1;
    std::size_t m = 0;
    std::size_t n = 0;
    std::string method;
    double alpha = 0.0;
    double ari_mean = 0.0;
    double ari_se = 0.0;
    double seconds = 0.0;
    int replicates = 0;
    std::vector<double> ari;  // one per replicate
};

struct StudyReport {
    std::vector<StudyRow> rows;

    const StudyRow& find(std::size_t m, std::size_t n, std::string_view method) const;
};

/// Labels from one method run on a dataset (k fixed to the number of classes).
Labels run_method(const Method& method, const CoefSet& coefs, int k, const StudyPlan& plan, std::uint64_t seed);

/// Simulate, filter with the generator's basis, cluster and score every
/// (cell, replicate, method). Each replicate uses its own derived stream.
StudyReport run_study(const StudyPlan& plan);

/// CSV `study,m,n,method,alpha,ari_mean,ari_se,seconds`.
void write_report_csv(const StudyReport& report, const std::filesystem::path& path);

}  // namespace tsclust
