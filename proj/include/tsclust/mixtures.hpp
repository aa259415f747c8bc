#pragma once

// Gaussian and mixture densities over coefficient vectors, the equal-weight
// spherical log-likelihood, the two allocation rules, and an EM baseline for
// the full-covariance mixture.

#include "tsclust/basis.hpp"
#include "tsclust/common.hpp"

#include <cstdint>
#include <optional>

namespace tsclust {

/// Full mixture parameters: weights, means and covariances of k components.
struct GmmParams {
    std::vector<double> weights;
    std::vector<Vector> means;
    std::vector<Eigen::MatrixXd> covariances;

    std::size_t k() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }

    /// Throws ValidationError unless weights are positive and sum to one and
    /// every covariance is symmetric positive definite.
    void validate() const;
};

/// k spherical components with common scale lambda and equal weights 1/k.
/// Means are rows of a k x d matrix.
class MeanModel {
public:
    MeanModel(Matrix means, double lambda = 1.0, double alpha = 0.0);

    const Matrix& means() const { return means_; }
    std::size_t k() const { return static_cast<std::size_t>(means_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(means_.cols()); }
    double lambda() const { return lambda_; }
    double alpha() const { return alpha_; }

    /// Reorders means lexicographically. Returns old_index_of[new_index].
    std::vector<int> sort_lexicographic();

private:
    Matrix means_;
    double lambda_;
    double alpha_;
};

/// log phi_d(b; mu, V), via a Cholesky factorization of V.
double gaussian_log_density(const VectorRef& b, const VectorRef& mu, const Eigen::MatrixXd& cov);

/// log sum_c pi_c phi_d(b; mu_c, V_c), stabilized with log-sum-exp.
double mixture_log_density(const VectorRef& b, const GmmParams& params);

/// sum_i log sum_c k^{-1} phi_d(b_i; mu_c, lambda I).
double spherical_log_likelihood(const CoefSet& coefs, const MeanModel& model);

/// argmax_c pi_c phi_d(b; mu_c, V_c); ties go to the lowest index.
int bayes_allocate(const VectorRef& b, const GmmParams& params);

/// argmin_c ||b - mu_c||^2; ties go to the lowest index.
int kmeans_allocate(const VectorRef& b, const MeanModel& model);

/// Nearest mean for a raw d-vector, returning the index and squared distance.
std::pair<int, double> nearest_mean(const double* u, const Matrix& means);

struct EmOptions {
    std::uint64_t seed = 0;
    int max_iter = 500;
    /// Added to every covariance diagonal in each M-step. Defaults to
    /// 1e-6 times the mean diagonal of the pooled sample covariance.
    std::optional<double> ridge;
};

struct EmFit {
    GmmParams params;
    /// Sample log-likelihood after each E-step; the last entry belongs to `params`.
    std::vector<double> loglik;
    int iterations = 0;
    double ridge = 0.0;
};

/// EM for the full-covariance mixture, initialized from one untrimmed
/// k-means run. Stops at max_iter or when the log-likelihood gain falls
/// below 1e-6 n.
EmFit fit_gmm_em(const CoefSet& coefs, int k, const EmOptions& options = {});

/// Log-likelihood of every row under `params`.
double gmm_log_likelihood(const Matrix& data, const GmmParams& params);

}  // namespace tsclust
