#include "tsclust/evalsim.hpp"

#include "csv.hpp"
#include "tsclust/mixtures.hpp"
#include "tsclust/rng.hpp"
#include "tsclust/tclust.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <utility>

namespace tsclust {

namespace {

std::uint64_t choose2(std::uint64_t x) { return x * (x - 1) / 2; }

// Compact ids 0..r-1 for arbitrary labels.
std::vector<std::uint32_t> compact(std::span<const int> labels)
{
    std::vector<int> uniq(labels.begin(), labels.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<std::uint32_t> ids(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        ids[i] = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
    return ids;
}

std::uint64_t sum_choose2_of_counts(std::vector<std::uint32_t> ids)
{
    std::sort(ids.begin(), ids.end());
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < ids.size();) {
        std::size_t j = i;
        while (j < ids.size() && ids[j] == ids[i]) ++j;
        total += choose2(j - i);
        i = j;
    }
    return total;
}

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b)
{
    require(a.size() == b.size(), "ARI needs labelings of equal length");
    require(a.size() >= 2, "ARI needs at least two points");
    const auto ia = compact(a);
    const auto ib = compact(b);

    // Contingency cells as packed (row, col) keys; runs of equal keys are n_ij.
    std::vector<std::uint64_t> cells(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) cells[i] = (std::uint64_t{ia[i]} << 32) | ib[i];
    std::sort(cells.begin(), cells.end());
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < cells.size();) {
        std::size_t j = i;
        while (j < cells.size() && cells[j] == cells[i]) ++j;
        index += choose2(j - i);
        i = j;
    }

    const std::uint64_t sum_a = sum_choose2_of_counts(ia);
    const std::uint64_t sum_b = sum_choose2_of_counts(ib);
    const auto pairs = static_cast<double>(choose2(a.size()));
    const double expected = static_cast<double>(sum_a) * static_cast<double>(sum_b) / pairs;
    const double max_index = static_cast<double>(sum_a + sum_b) / 2.0;
    const double denom = max_index - expected;
    if (denom == 0.0) return 1.0;
    return (static_cast<double>(index) - expected) / denom;
}

Study parse_study(std::string_view name)
{
    if (name == "s1" || name == "S1") return Study::S1;
    if (name == "s2" || name == "S2") return Study::S2;
    throw ValidationError("unknown study '" + std::string(name) + "' (expected s1 or s2)");
}

std::string_view to_string(Study study) { return study == Study::S1 ? "s1" : "s2"; }

SimConfig SimConfig::make(Study study, std::size_t m, std::size_t n, std::uint64_t seed)
{
    SimConfig cfg;
    cfg.study = study;
    cfg.m = m;
    cfg.n = n;
    cfg.seed = seed;
    return cfg;
}

Matrix SimConfig::class_means() const
{
    require(classes == 5 && d_gen >= 4, "the generator defines exactly five classes and needs d_gen >= 4");
    Matrix mu = Matrix::Zero(classes, d_gen);
    mu(1, 0) = mu(1, 1) = 1.0;
    mu(2, 0) = mu(2, 1) = -1.0;
    mu(3, d_gen - 2) = mu(3, d_gen - 1) = 1.0;
    mu(4, d_gen - 2) = mu(4, d_gen - 1) = -1.0;
    return mu;
}

Eigen::MatrixXd SimConfig::coef_covariance() const
{
    const double off = study == Study::S2 ? coef_offdiag_sd * coef_offdiag_sd : 0.0;
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(d_gen, d_gen, off);
    v.diagonal().setConstant(coef_sd * coef_sd);
    return v;
}

void SimConfig::validate() const
{
    require(n >= 1 && m >= 1, "simulation needs n >= 1 and m >= 1");
    require(sigma >= 0.0 && coef_sd >= 0.0 && coef_offdiag_sd >= 0.0, "simulation SDs must be nonnegative");
    require(d_gen >= 4, "generator basis needs d_gen >= 4");
    if (study == Study::S2)
        require(coef_offdiag_sd <= coef_sd, "S2 covariance is not positive semidefinite");
}

LabeledDataset simulate_study(const SimConfig& cfg)
{
    cfg.validate();
    const Matrix mu = cfg.class_means();
    const Eigen::MatrixXd cov = cfg.coef_covariance();
    Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(cfg.d_gen, cfg.d_gen);
    if (!cov.isZero(0.0)) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) throw ValidationError("coefficient covariance is not positive definite");
        chol = llt.matrixL();
    }

    const BasisSystem basis = make_bspline_system(0.0, 1.0, static_cast<std::size_t>(cfg.d_gen));
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, cfg.m);
    const DesignMatrix x = design_matrix(basis, grid);

    Rng rng = make_stream(cfg.seed, {0x51Au});
    std::uniform_int_distribution<int> pick_class(0, cfg.classes - 1);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto n = static_cast<Eigen::Index>(cfg.n);
    const auto m = static_cast<Eigen::Index>(cfg.m);
    LabeledDataset data{std::move(grid), Matrix(n, m), Labels(cfg.n), Matrix(n, cfg.d_gen)};
    Vector xi(cfg.d_gen);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = pick_class(rng);
        data.labels[static_cast<std::size_t>(i)] = c;
        for (Eigen::Index j = 0; j < xi.size(); ++j) xi(j) = normal(rng);
        const Vector b = mu.row(c).transpose() + chol * xi;
        data.coefficients.row(i) = b.transpose();
        data.series.row(i) = (x.matrix() * b).transpose();
        for (Eigen::Index j = 0; j < m; ++j) data.series(i, j) += cfg.sigma * normal(rng);
    }
    return data;
}

double spherical_scale(const SimConfig& cfg)
{
    const BasisSystem basis = make_bspline_system(0.0, 1.0, static_cast<std::size_t>(cfg.d_gen));
    const DesignMatrix x = design_matrix(basis, TimeGrid::uniform(0.0, 1.0, cfg.m));
    const double d = cfg.d_gen;
    return (cfg.coef_covariance().trace() + cfg.sigma * cfg.sigma * x.gram_inverse().trace()) / d;
}

Method Method::trimmed(double alpha)
{
    TrimSpec check(alpha);
    return {MethodKind::TrimmedKMeans, alpha, "trimmed_" + csv::format(alpha)};
}

std::vector<Method> Method::all()
{
    return {gmm(), kmeans(), trimmed(0.25), trimmed(0.5)};
}

Method parse_method(std::string_view name)
{
    if (name == "gmm") return Method::gmm();
    if (name == "kmeans") return Method::kmeans();
    constexpr std::string_view prefix = "trimmed_";
    if (name.starts_with(prefix)) return Method::trimmed(csv::parse_double(name.substr(prefix.size()), "method"));
    throw ValidationError("unknown method '" + std::string(name) + "' (gmm, kmeans, trimmed_<alpha>)");
}

std::vector<StudyCell> parse_grid(std::string_view text)
{
    std::vector<StudyCell> cells;
    for (std::string_view item : csv::split(text)) {
        item = csv::trim(item);
        const std::size_t x = item.find('x');
        if (x == std::string_view::npos) throw ValidationError("grid cell '" + std::string(item) + "' must look like MxN");
        const long long m = csv::parse_int(item.substr(0, x), "grid");
        const long long n = csv::parse_int(item.substr(x + 1), "grid");
        require(m >= 1 && n >= 2, "grid cells need m >= 1 and n >= 2");
        cells.push_back({static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
    }
    require(!cells.empty(), "grid must contain at least one cell");
    return cells;
}

const StudyRow& StudyReport::find(std::size_t m, std::size_t n, std::string_view method) const
{
    for (const auto& row : rows)
        if (row.m == m && row.n == n && row.method == method) return row;
    throw ValidationError("no study row for m=" + std::to_string(m) + " n=" + std::to_string(n) + " method=" +
                          std::string(method));
}

Labels run_method(const Method& method, const CoefSet& coefs, int k, const StudyPlan& plan, std::uint64_t seed)
{
    Labels labels(coefs.rows());
    if (method.kind == MethodKind::TrimmedKMeans) {
        TclustOptions opts;
        opts.restarts = plan.restarts;
        opts.max_iter = plan.max_iter;
        opts.seed = seed;
        const ClusterFit fit = trimmed_kmeans(coefs, k, TrimSpec(method.alpha), opts);
        return allocate_all(coefs, fit);
    }

    std::optional<EmFit> best;
    for (int r = 0; r < plan.gmm_restarts; ++r) {
        EmOptions opts;
        opts.seed = derive_seed(seed, {static_cast<std::uint64_t>(r)});
        try {
            EmFit fit = fit_gmm_em(coefs, k, opts);
            if (!best || fit.loglik.back() > best->loglik.back()) best = std::move(fit);
        } catch (const NumericalError&) {
            // a collapsed start; the other restarts decide
        }
    }
    if (!best) throw NumericalError("every EM restart collapsed");
    for (std::size_t i = 0; i < coefs.rows(); ++i)
        labels[i] = bayes_allocate(coefs.values.row(static_cast<Eigen::Index>(i)).transpose(), best->params);
    return labels;
}

StudyReport run_study(const StudyPlan& plan)
{
    require(plan.replicates >= 1, "replicates must be at least 1");
    require(!plan.cells.empty() && !plan.methods.empty(), "study needs cells and methods");
    using Clock = std::chrono::steady_clock;
    constexpr int k = 5;

    StudyReport report;
    for (const StudyCell& cell : plan.cells) {
        SimConfig base = SimConfig::make(plan.study, cell.m, cell.n, 0);
        const BasisSystem basis = make_bspline_system(0.0, 1.0, static_cast<std::size_t>(base.d_gen));
        const DesignMatrix x = design_matrix(basis, TimeGrid::uniform(0.0, 1.0, cell.m));

        const std::size_t nm = plan.methods.size();
        const auto reps = static_cast<std::size_t>(plan.replicates);
        std::vector<double> ari(reps * nm);
        std::vector<double> secs(reps * nm);
        std::vector<std::exception_ptr> errors(reps);

#pragma omp parallel for schedule(dynamic, 1)
        for (int r = 0; r < plan.replicates; ++r) {
            const auto rr = static_cast<std::size_t>(r);
            try {
                SimConfig cfg = base;
                cfg.seed = derive_seed(plan.seed, {cell.m, cell.n, rr});
                const LabeledDataset data = simulate_study(cfg);
                const CoefSet coefs = fit_coefficients(x, data.series);
                for (std::size_t q = 0; q < nm; ++q) {
                    const Method& method = plan.methods[q];
                    const std::uint64_t tag =
                        method.kind == MethodKind::Gmm ? 1 : 1000 + static_cast<std::uint64_t>(std::llround(method.alpha * 1e6));
                    const auto start = Clock::now();
                    const Labels labels =
                        run_method(method, coefs, k, plan, derive_seed(plan.seed, {cell.m, cell.n, rr, tag}));
                    secs[rr * nm + q] = std::chrono::duration<double>(Clock::now() - start).count();
                    ari[rr * nm + q] = adjusted_rand_index(data.labels, labels);
                }
            } catch (...) {
                errors[rr] = std::current_exception();
            }
        }
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);

        for (std::size_t q = 0; q < nm; ++q) {
            StudyRow row;
            row.study = plan.study;
            row.m = cell.m;
            row.n = cell.n;
            row.method = plan.methods[q].name;
            row.alpha = plan.methods[q].alpha;
            row.replicates = plan.replicates;
            for (std::size_t r = 0; r < reps; ++r) {
                row.ari.push_back(ari[r * nm + q]);
                row.seconds += secs[r * nm + q];
            }
            double mean = 0.0;
            for (double v : row.ari) mean += v;
            mean /= static_cast<double>(reps);
            double ss = 0.0;
            for (double v : row.ari) ss += (v - mean) * (v - mean);
            row.ari_mean = mean;
            row.ari_se = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) / std::sqrt(static_cast<double>(reps)) : 0.0;
            row.seconds /= static_cast<double>(reps);
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

void write_report_csv(const StudyReport& report, const std::filesystem::path& path)
{
    auto out = csv::open_out(path);
    out << "study,m,n,method,alpha,ari_mean,ari_se,seconds\n";
    for (const auto& row : report.rows)
        out << to_string(row.study) << ',' << row.m << ',' << row.n << ',' << row.method << ','
            << csv::format(row.alpha) << ',' << csv::format(row.ari_mean) << ',' << csv::format(row.ari_se) << ','
            << csv::format(row.seconds) << '\n';
    if (!out) throw ValidationError("failed writing " + path.string());
}

}  // namespace tsclust
