#include "tsclust/pipeline.hpp"

#include "csv.hpp"
#include "tsclust/mixtures.hpp"
#include "tsclust/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <string>

namespace tsclust {

CoefSet normalize_columns(const CoefSet& coefs)
{
    require(coefs.rows() >= 2, "column normalization needs at least two series");
    const Matrix& b = coefs.values;
    const auto n = static_cast<double>(b.rows());
    ColumnStats stats{Vector(b.cols()), Vector(b.cols())};
    CoefSet out{Matrix(b.rows(), b.cols()), std::nullopt};
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        const auto col = b.col(j);
        const bool constant = (col.array() == col(0)).all();
        if (constant) {
            stats.mean(j) = col(0);
            stats.scale(j) = 1.0;
            out.values.col(j).setZero();
            continue;
        }
        const double mean = col.sum() / n;
        const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
        stats.mean(j) = mean;
        stats.scale(j) = sd > 0.0 ? sd : 1.0;
        out.values.col(j) = (col.array() - mean) / stats.scale(j);
    }
    out.normalization = std::move(stats);
    return out;
}

Matrix denormalize(const Matrix& rows, const ColumnStats& stats)
{
    require(rows.cols() == stats.mean.size() && rows.cols() == stats.scale.size(),
            "normalization stats do not match the coefficient dimension");
    Matrix out(rows.rows(), rows.cols());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        out.row(i) = rows.row(i).array() * stats.scale.transpose().array() + stats.mean.transpose().array();
    return out;
}

std::vector<int> RunConfig::range_k(int lo, int hi)
{
    require(lo >= 1 && hi >= lo, "k range needs 1 <= a <= b");
    std::vector<int> ks;
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
    return ks;
}

std::vector<int> RunConfig::parse_k_set(std::string_view text)
{
    text = csv::trim(text);
    const std::size_t dots = text.find("..");
    if (dots != std::string_view::npos) {
        const long long lo = csv::parse_int(text.substr(0, dots), "k-set");
        const long long hi = csv::parse_int(text.substr(dots + 2), "k-set");
        require(lo >= 1 && hi >= lo && hi <= 65535, "k-set range must satisfy 1 <= a <= b <= 65535");
        return range_k(static_cast<int>(lo), static_cast<int>(hi));
    }
    std::vector<int> ks;
    for (auto cell : csv::split(text)) {
        const long long k = csv::parse_int(cell, "k-set");
        require(k >= 1 && k <= 65535, "k-set values must lie in 1..65535");
        ks.push_back(static_cast<int>(k));
    }
    std::sort(ks.begin(), ks.end());
    require(std::adjacent_find(ks.begin(), ks.end()) == ks.end(), "k-set values must be distinct");
    return ks;
}

void RunConfig::validate() const
{
    require(d >= 4, "d must be at least 4 for a cubic B-spline system");
    require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
    require(alpha >= 0.0 && alpha < 1.0, "alpha must lie in [0, 1)");
    require(!k_set.empty(), "k-set must be nonempty");
    require(std::is_sorted(k_set.begin(), k_set.end()) && std::adjacent_find(k_set.begin(), k_set.end()) == k_set.end(),
            "k-set must be strictly increasing");
    require(k_set.front() >= 1 && k_set.back() <= 65535, "k-set values must lie in 1..65535");
    require(restarts >= 1, "restarts must be positive");
    require(max_iter >= 1, "max-iter must be positive");
}

void apply_json_config(RunConfig& cfg, const std::filesystem::path& path)
{
    using nlohmann::json;
    auto in = csv::open_in(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ValidationError(path.string() + ": config must be a JSON object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "d") cfg.d = value.get<int>();
            else if (key == "lambda") cfg.lambda = value.get<double>();
            else if (key == "alpha") cfg.alpha = value.get<double>();
            else if (key == "k_set") {
                if (value.is_string()) cfg.k_set = RunConfig::parse_k_set(value.get<std::string>());
                else cfg.k_set = value.get<std::vector<int>>();
            }
            else if (key == "restarts") cfg.restarts = value.get<int>();
            else if (key == "max_iter") cfg.max_iter = value.get<int>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "detrend") cfg.detrend = value.get<bool>();
            else if (key == "normalize") cfg.normalize = value.get<bool>();
            else if (key == "penalty") cfg.penalty = parse_penalty(value.get<std::string>());
            else if (key == "input") cfg.input = value.get<std::string>();
            else if (key == "format") cfg.format = parse_volume_format(value.get<std::string>());
            else if (key == "out") cfg.out = value.get<std::string>();
            else throw ValidationError(path.string() + ": unknown config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

TwoStageResult run_two_stage(const VolumeSeries& volume, const RunConfig& cfg)
{
    using Clock = std::chrono::steady_clock;
    cfg.validate();
    volume.validate();
    const std::size_t n = volume.voxels();

    std::vector<int> ks;
    for (int k : cfg.k_set) {
        const int capped = static_cast<std::size_t>(k) <= n ? k : static_cast<int>(n);
        if (ks.empty() || ks.back() != capped) ks.push_back(capped);
    }
    require(ks.size() == 1 || ks.size() >= 4, "model selection needs one candidate k or at least four");

    Matrix series = volume.series;
    if (cfg.detrend) detrend_rows(series, volume.grid);
    const BasisSystem basis = make_bspline_system(volume.grid.front(), volume.grid.back(), static_cast<std::size_t>(cfg.d));
    const DesignMatrix x = design_matrix(basis, volume.grid);
    CoefSet coefs = fit_coefficients(x, series);
    if (cfg.normalize && n >= 2) coefs = normalize_columns(coefs);

    const TrimSpec requested(cfg.alpha);
    const double alpha = requested.retained(n) >= static_cast<std::size_t>(ks.back()) ? cfg.alpha : 0.0;
    const TrimSpec trim(alpha);
    SelectionTrace trace;
    std::vector<KSweepEntry> sweep;

    const auto original_scale = [&](const Matrix& means) {
        return coefs.normalization ? denormalize(means, *coefs.normalization) : means;
    };

    std::map<int, ClusterFit> fits;
    for (int k : ks) {
        const auto start = Clock::now();
        TclustOptions opts;
        opts.restarts = cfg.restarts;
        opts.max_iter = cfg.max_iter;
        opts.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(k)});
        opts.lambda = cfg.lambda;
        ClusterFit fit = trimmed_kmeans(coefs, k, trim, opts);
        const double loglik =
            spherical_log_likelihood(coefs, MeanModel(fit.model.means(), cfg.lambda)) / static_cast<double>(n);
        const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
        trace.add({k, loglik, penalty_value(cfg.penalty, k, cfg.d), seconds});
        sweep.push_back({k, original_scale(fit.model.means()), fit.objective});
        fits.emplace(k, std::move(fit));
    }

    SlopeEstimate slope;
    int selected = ks.front();
    if (ks.size() > 1) {
        try {
            slope = estimate_slope_ddse(trace);
        } catch (const Error& e) {
            throw SelectionError(e.what(), trace, sweep);
        }
        selected = select_k(trace, slope.kappa);
    }

    const ClusterFit& chosen = fits.at(selected);
    const Labels labels = allocate_all(coefs, chosen);
    ClusterVolume cv;
    cv.dims = volume.dims;
    cv.k = selected;
    cv.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) cv.labels[i] = static_cast<std::uint16_t>(labels[i] + 1);
    cv.trimmed = chosen.trimmed;

    const Matrix means = original_scale(chosen.model.means());
    MeanFunctions curves{volume.grid, means, means * x.matrix().transpose()};
    return {std::move(cv), std::move(curves), std::move(trace), std::move(slope), std::move(sweep), selected, alpha};
}

}  // namespace tsclust
