#include "tsclust/mixtures.hpp"

#include "tsclust/tclust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace tsclust {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double log_sum_exp(const double* values, std::size_t count)
{
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < count; ++c) top = std::max(top, values[c]);
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (std::size_t c = 0; c < count; ++c) acc += std::exp(values[c] - top);
    return top + std::log(acc);
}

struct Factor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_det = 0.0;
};

Factor factorize(const Eigen::MatrixXd& cov)
{
    Factor f;
    f.llt.compute(cov);
    if (f.llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
    const auto diag = f.llt.matrixLLT().diagonal();
    for (Eigen::Index j = 0; j < diag.size(); ++j) {
        if (!(diag(j) > 0.0)) throw NumericalError("covariance matrix is not positive definite");
        f.log_det += 2.0 * std::log(diag(j));
    }
    return f;
}

// Column c holds log pi_c + log phi(u_i; mu_c, V_c) for every row u_i.
Eigen::MatrixXd component_log_terms(const Matrix& data, const GmmParams& params)
{
    const Eigen::Index n = data.rows();
    const auto d = static_cast<double>(data.cols());
    Eigen::MatrixXd terms(n, static_cast<Eigen::Index>(params.k()));
    for (std::size_t c = 0; c < params.k(); ++c) {
        const Factor f = factorize(params.covariances[c]);
        const Eigen::MatrixXd centered = (data.rowwise() - params.means[c].transpose()).transpose();
        const Eigen::MatrixXd z = f.llt.matrixL().solve(centered);
        const double constant = std::log(params.weights[c]) - 0.5 * (d * kLog2Pi + f.log_det);
        terms.col(static_cast<Eigen::Index>(c)) = (constant - 0.5 * z.colwise().squaredNorm().array()).transpose();
    }
    return terms;
}

}  // namespace

void GmmParams::validate() const
{
    require(k() >= 1, "mixture needs at least one component");
    require(means.size() == k() && covariances.size() == k(), "mixture parameter lists differ in length");
    const auto d = static_cast<Eigen::Index>(dim());
    double total = 0.0;
    for (std::size_t c = 0; c < k(); ++c) {
        require(weights[c] > 0.0 && std::isfinite(weights[c]), "mixture weights must be positive");
        require(means[c].size() == d, "mixture means differ in dimension");
        const Eigen::MatrixXd& v = covariances[c];
        require(v.rows() == d && v.cols() == d, "covariance shape does not match dimension");
        require((v - v.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff()),
                "covariance matrix is not symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(v);
        require(llt.info() == Eigen::Success, "covariance matrix is not positive definite");
        total += weights[c];
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to one");
}

MeanModel::MeanModel(Matrix means, double lambda, double alpha)
    : means_(std::move(means)), lambda_(lambda), alpha_(alpha)
{
    require(means_.rows() >= 1 && means_.cols() >= 1, "mean model needs at least one d-vector");
    require(lambda_ > 0.0 && std::isfinite(lambda_), "lambda must be positive");
    require(alpha_ >= 0.0 && alpha_ < 1.0, "trim level must lie in [0, 1)");
}

std::vector<int> MeanModel::sort_lexicographic()
{
    std::vector<int> order(k());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [this](int a, int b) {
        const auto ra = means_.row(a);
        const auto rb = means_.row(b);
        return std::lexicographical_compare(ra.data(), ra.data() + ra.size(), rb.data(), rb.data() + rb.size());
    });
    Matrix sorted(means_.rows(), means_.cols());
    for (std::size_t c = 0; c < order.size(); ++c) sorted.row(static_cast<Eigen::Index>(c)) = means_.row(order[c]);
    means_ = std::move(sorted);
    return order;
}

double gaussian_log_density(const VectorRef& b, const VectorRef& mu, const Eigen::MatrixXd& cov)
{
    const Eigen::Index d = b.size();
    require(mu.size() == d && cov.rows() == d && cov.cols() == d, "density arguments differ in dimension");
    const Factor f = factorize(cov);
    const Vector z = f.llt.matrixL().solve(b - mu);
    return -0.5 * (static_cast<double>(d) * kLog2Pi + f.log_det) - 0.5 * z.squaredNorm();
}

double mixture_log_density(const VectorRef& b, const GmmParams& params)
{
    params.validate();
    std::vector<double> terms(params.k());
    for (std::size_t c = 0; c < params.k(); ++c)
        terms[c] = std::log(params.weights[c]) + gaussian_log_density(b, params.means[c], params.covariances[c]);
    return log_sum_exp(terms.data(), terms.size());
}

std::pair<int, double> nearest_mean(const double* u, const Matrix& means)
{
    const Eigen::Index k = means.rows();
    const Eigen::Index d = means.cols();
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < k; ++c) {
        const double* mu = means.row(c).data();
        double dist = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double diff = u[j] - mu[j];
            dist += diff * diff;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(c);
        }
    }
    return {best, best_dist};
}

double spherical_log_likelihood(const CoefSet& coefs, const MeanModel& model)
{
    require(coefs.rows() >= 1, "log-likelihood needs at least one coefficient vector");
    require(coefs.cols() == model.dim(), "coefficients and means differ in dimension");
    const Eigen::Index n = coefs.values.rows();
    const Eigen::Index k = static_cast<Eigen::Index>(model.k());
    const Eigen::Index d = coefs.values.cols();
    const double lambda = model.lambda();
    const double constant = -std::log(static_cast<double>(k)) - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * lambda);

    std::vector<double> per_point(static_cast<std::size_t>(n));
#pragma omp parallel
    {
        std::vector<double> terms(static_cast<std::size_t>(k));
#pragma omp for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double* u = coefs.values.row(i).data();
            for (Eigen::Index c = 0; c < k; ++c) {
                const double* mu = model.means().row(c).data();
                double dist = 0.0;
                for (Eigen::Index j = 0; j < d; ++j) dist += (u[j] - mu[j]) * (u[j] - mu[j]);
                terms[static_cast<std::size_t>(c)] = constant - dist / (2.0 * lambda);
            }
            per_point[static_cast<std::size_t>(i)] = log_sum_exp(terms.data(), terms.size());
        }
    }
    double total = 0.0;
    for (double v : per_point) total += v;
    return total;
}

int bayes_allocate(const VectorRef& b, const GmmParams& params)
{
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < params.k(); ++c) {
        const double score =
            std::log(params.weights[c]) + gaussian_log_density(b, params.means[c], params.covariances[c]);
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(c);
        }
    }
    return best;
}

int kmeans_allocate(const VectorRef& b, const MeanModel& model)
{
    require(static_cast<std::size_t>(b.size()) == model.dim(), "point and means differ in dimension");
    const Vector copy = b;
    return nearest_mean(copy.data(), model.means()).first;
}

double gmm_log_likelihood(const Matrix& data, const GmmParams& params)
{
    const Eigen::MatrixXd terms = component_log_terms(data, params);
    double total = 0.0;
    std::vector<double> row(static_cast<std::size_t>(terms.cols()));
    for (Eigen::Index i = 0; i < terms.rows(); ++i) {
        for (Eigen::Index c = 0; c < terms.cols(); ++c) row[static_cast<std::size_t>(c)] = terms(i, c);
        total += log_sum_exp(row.data(), row.size());
    }
    return total;
}

namespace {

// Weighted M-step. Column c of `resp` holds the responsibilities of component c.
GmmParams maximize(const Matrix& data, const Eigen::MatrixXd& resp, double ridge)
{
    const Eigen::Index n = data.rows();
    GmmParams p;
    for (Eigen::Index c = 0; c < resp.cols(); ++c) {
        const double nc = resp.col(c).sum();
        if (!(nc > 1e-10 * static_cast<double>(n))) throw NumericalError("mixture component collapsed during EM");
        const Vector mu = (data.transpose() * resp.col(c)) / nc;
        const Eigen::MatrixXd w =
            ((data.rowwise() - mu.transpose()).array().colwise() * resp.col(c).array().sqrt()).matrix();
        Eigen::MatrixXd cov = (w.transpose() * w) / nc;
        cov = 0.5 * (cov + cov.transpose()).eval();
        cov.diagonal().array() += ridge;
        p.weights.push_back(nc / static_cast<double>(n));
        p.means.push_back(mu);
        p.covariances.push_back(std::move(cov));
    }
    return p;
}

// E-step: fills responsibilities and returns the sample log-likelihood.
double expect(const Matrix& data, const GmmParams& params, Eigen::MatrixXd& resp)
{
    const Eigen::MatrixXd terms = component_log_terms(data, params);
    resp.resize(terms.rows(), terms.cols());
    double total = 0.0;
    std::vector<double> row(static_cast<std::size_t>(terms.cols()));
    for (Eigen::Index i = 0; i < terms.rows(); ++i) {
        for (Eigen::Index c = 0; c < terms.cols(); ++c) row[static_cast<std::size_t>(c)] = terms(i, c);
        const double lse = log_sum_exp(row.data(), row.size());
        resp.row(i) = (terms.row(i).array() - lse).exp();
        total += lse;
    }
    return total;
}

}  // namespace

EmFit fit_gmm_em(const CoefSet& coefs, int k, const EmOptions& options)
{
    const Matrix& data = coefs.values;
    const Eigen::Index n = data.rows();
    require(k >= 1, "EM needs k >= 1");
    require(n > k, "EM needs more points than components");
    require(data.cols() >= 1, "EM needs d >= 1");
    require(options.max_iter >= 1, "EM needs max_iter >= 1");

    const Vector grand = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - grand.transpose();
    const Eigen::MatrixXd pooled = (centered.transpose() * centered) / static_cast<double>(n);
    const double mean_var = pooled.diagonal().mean();
    require(mean_var > 0.0, "EM cannot fit all-identical data");
    const double ridge = options.ridge.value_or(1e-6 * mean_var);
    require(ridge >= 0.0, "ridge must be nonnegative");

    TclustOptions init_opts;
    init_opts.restarts = 1;
    init_opts.seed = options.seed;
    const ClusterFit init = trimmed_kmeans(coefs, k, TrimSpec(0.0), init_opts);

    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) resp(i, init.labels[static_cast<std::size_t>(i)]) = 1.0;

    EmFit fit;
    fit.ridge = ridge;
    fit.params = maximize(data, resp, ridge);
    fit.loglik.push_back(expect(data, fit.params, resp));
    const double tolerance = 1e-6 * static_cast<double>(n);
    for (int it = 1; it <= options.max_iter; ++it) {
        GmmParams next = maximize(data, resp, ridge);
        const double ll = expect(data, next, resp);
        fit.params = std::move(next);
        fit.loglik.push_back(ll);
        fit.iterations = it;
        if (ll - fit.loglik[fit.loglik.size() - 2] < tolerance) break;
    }
    return fit;
}

}  // namespace tsclust
