#include "cli.hpp"

#include "tsclust/evalsim.hpp"
#include "tsclust/pipeline.hpp"
#include "tsclust/selection.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace tsclust {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct FitArgs {
    std::string config;
    std::string input;
    std::string format;
    int d = 0;
    std::string k_set;
    double alpha = 0.0;
    int restarts = 0;
    int max_iter = 0;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    std::string penalty;
    bool no_detrend = false;
    bool no_normalize = false;
    std::string out;
};

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    f.flush();
    if (!f) throw ValidationError("failed writing " + path.string());
}

json slope_json(const SlopeEstimate& s)
{
    json windows = json::array();
    for (const auto& w : s.diagnostics) windows.push_back({{"first_k", w.first_k}, {"last_k", w.last_k}, {"slope", w.slope}});
    return {{"kappa", s.kappa}, {"window_first_k", s.window_first_k}, {"window_last_k", s.window_last_k}, {"windows", windows}};
}

void write_sweep(const fs::path& dir, const SelectionTrace& trace, const std::vector<KSweepEntry>& sweep)
{
    write_trace_csv(trace, dir / "trace.csv");
    fs::create_directories(dir / "means");
    for (const auto& e : sweep) write_means_csv(e.means, dir / "means" / ("k_" + std::to_string(e.k) + ".csv"));
}

int cmd_fit(const FitArgs& a, CLI::App& sub, std::ostream& out)
{
    RunConfig cfg;
    if (!a.config.empty()) apply_json_config(cfg, a.config);
    if (sub.count("--input")) cfg.input = a.input;
    if (sub.count("--format")) cfg.format = parse_volume_format(a.format);
    if (sub.count("--d")) cfg.d = a.d;
    if (sub.count("--k-set")) cfg.k_set = RunConfig::parse_k_set(a.k_set);
    if (sub.count("--alpha")) cfg.alpha = a.alpha;
    if (sub.count("--restarts")) cfg.restarts = a.restarts;
    if (sub.count("--max-iter")) cfg.max_iter = a.max_iter;
    if (sub.count("--seed")) cfg.seed = a.seed;
    if (sub.count("--lambda")) cfg.lambda = a.lambda;
    if (sub.count("--penalty")) cfg.penalty = parse_penalty(a.penalty);
    if (a.no_detrend) cfg.detrend = false;
    if (a.no_normalize) cfg.normalize = false;
    if (sub.count("--out")) cfg.out = a.out;
    require(!cfg.input.empty(), "fit needs --input (or \"input\" in the config)");
    require(!cfg.out.empty(), "fit needs --out (or \"out\" in the config)");
    cfg.validate();

    const VolumeSeries volume = load_volume(cfg.input, cfg.format);
    fs::create_directories(cfg.out);
    const fs::path dir = cfg.out;

    const TwoStageResult res = [&] {
        try {
            return run_two_stage(volume, cfg);
        } catch (const SelectionError& e) {
            write_sweep(dir, e.trace(), e.sweep());
            throw;
        }
    }();
    write_sweep(dir, res.trace, res.sweep);
    write_text(dir / "slope.json", slope_json(res.slope).dump(2) + "\n");
    export_cluster_map_civl(res.clusters, dir / "labels.civl");
    export_cluster_map_csv(res.clusters, dir / "labels.csv");
    export_mean_functions(res.means, dir / "mean_functions.csv");
    const json selection = {{"k_hat", res.selected_k},
                            {"kappa", res.slope.kappa},
                            {"penalty", std::string(to_string(cfg.penalty))},
                            {"alpha", res.alpha},
                            {"n", volume.voxels()},
                            {"d", cfg.d},
                            {"candidates", res.trace.candidates()}};
    write_text(dir / "selection.json", selection.dump(2) + "\n");
    out << "selected k = " << res.selected_k << " (kappa = " << res.slope.kappa << ") for " << volume.voxels()
        << " voxels; outputs in " << dir.string() << '\n';
    return 0;
}

Labels read_label_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string() + " for reading");
    std::string line;
    Labels labels;
    std::optional<std::size_t> column;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (first) {
            first = false;
            for (std::size_t j = 0; j < cells.size(); ++j)
                if (cells[j] == "label") column = j;
            if (column) continue;
            int probe = 0;
            const auto& c = cells.front();
            if (std::from_chars(c.data(), c.data() + c.size(), probe).ec != std::errc()) {
                column = 0;  // some other header; use the first column
                continue;
            }
        }
        const std::size_t j = column.value_or(0);
        if (j >= cells.size()) throw ValidationError(path.string() + ": missing label column");
        int v = 0;
        const auto& c = cells[j];
        const auto r = std::from_chars(c.data(), c.data() + c.size(), v);
        if (r.ec != std::errc() || r.ptr != c.data() + c.size())
            throw ValidationError(path.string() + ": cannot parse label '" + c + "'");
        labels.push_back(v);
    }
    return labels;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Two-stage clustering of sampled time series"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "cluster a volume and select k");
    fit_cmd->add_option("--config", fit.config, "JSON file with RunConfig fields")->check(CLI::ExistingFile);
    fit_cmd->add_option("--input", fit.input, "volume file");
    fit_cmd->add_option("--format", fit.format, "civt or csv");
    fit_cmd->add_option("--d", fit.d, "number of B-spline basis functions");
    fit_cmd->add_option("--k-set", fit.k_set, "candidate k, e.g. 2..50");
    fit_cmd->add_option("--alpha", fit.alpha, "trim fraction in [0, 1)");
    fit_cmd->add_option("--restarts", fit.restarts, "random starts per k");
    fit_cmd->add_option("--max-iter", fit.max_iter, "iterations per start");
    fit_cmd->add_option("--seed", fit.seed, "master seed");
    fit_cmd->add_option("--lambda", fit.lambda, "spherical variance");
    fit_cmd->add_option("--penalty", fit.penalty, "spherical or full");
    fit_cmd->add_flag("--no-detrend", fit.no_detrend, "skip linear detrending");
    fit_cmd->add_flag("--no-normalize", fit.no_normalize, "skip column normalization");
    fit_cmd->add_option("--out", fit.out, "output directory");

    std::string study = "s1", grid, report, methods;
    int replicates = 50, restarts = 50;
    std::uint64_t sim_seed = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "run the S1/S2 simulation study");
    sim_cmd->add_option("--study", study, "s1 or s2");
    sim_cmd->add_option("--grid", grid, "cells as MxN, comma separated")->required();
    sim_cmd->add_option("--replicates", replicates, "replicates per cell");
    sim_cmd->add_option("--seed", sim_seed, "master seed");
    sim_cmd->add_option("--restarts", restarts, "trimmed k-means starts");
    sim_cmd->add_option("--methods", methods, "comma list of gmm, kmeans, trimmed_<alpha>");
    sim_cmd->add_option("--out", report, "report CSV")->required();

    std::string trace_path, penalty = "spherical";
    int sel_d = 0;
    std::optional<double> kappa;
    auto* sel_cmd = app.add_subcommand("select", "choose k from a trace");
    sel_cmd->add_option("--trace", trace_path, "trace CSV")->required()->check(CLI::ExistingFile);
    sel_cmd->add_option("--penalty", penalty, "spherical or full");
    sel_cmd->add_option("--d", sel_d, "coefficient dimension")->required();
    sel_cmd->add_option("--kappa", kappa, "fixed slope; DDSE when absent");

    std::string ari_a, ari_b;
    auto* ari_cmd = app.add_subcommand("ari", "adjusted Rand index of two label files");
    ari_cmd->add_option("--a", ari_a, "labels CSV")->required()->check(CLI::ExistingFile);
    ari_cmd->add_option("--b", ari_b, "labels CSV")->required()->check(CLI::ExistingFile);

    std::string civl, axis = "z", ppm;
    std::size_t index = 0;
    auto* render_cmd = app.add_subcommand("render", "PPM image of one slice of a label volume");
    render_cmd->add_option("--labels", civl, "CIVL file")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--axis", axis, "x, y or z");
    render_cmd->add_option("--index", index, "slice index")->required();
    render_cmd->add_option("--out", ppm, "PPM path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit, *fit_cmd, out);

        if (*sim_cmd) {
            StudyPlan plan;
            plan.study = parse_study(study);
            plan.cells = parse_grid(grid);
            plan.replicates = replicates;
            plan.seed = sim_seed;
            plan.restarts = restarts;
            if (!methods.empty()) {
                plan.methods.clear();
                std::stringstream ss(methods);
                for (std::string m; std::getline(ss, m, ',');) plan.methods.push_back(parse_method(m));
            }
            const StudyReport rep = run_study(plan);
            write_report_csv(rep, report);
            for (const auto& row : rep.rows)
                out << to_string(row.study) << " m=" << row.m << " n=" << row.n << ' ' << row.method
                    << " ARI=" << std::fixed << std::setprecision(4) << row.ari_mean << " (se " << row.ari_se << ")\n";
            return 0;
        }

        if (*sel_cmd) {
            const SelectionTrace trace = read_trace_csv(trace_path).with_penalty(parse_penalty(penalty), sel_d);
            double k_slope = 0.0;
            if (kappa) {
                k_slope = *kappa;
            } else {
                k_slope = estimate_slope_ddse(trace).kappa;
            }
            const int k = select_k(trace, k_slope);
            out << k << '\n';
            err << "kappa = " << k_slope << '\n';
            return 0;
        }

        if (*ari_cmd) {
            const Labels a = read_label_file(ari_a);
            const Labels b = read_label_file(ari_b);
            out << std::fixed << std::setprecision(6) << adjusted_rand_index(a, b) << '\n';
            return 0;
        }

        if (*render_cmd) {
            require(axis.size() == 1, "axis must be x, y or z");
            render_slice(read_cluster_map_civl(civl), axis[0], index, ppm);
            return 0;
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("tsclust");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tsclust
