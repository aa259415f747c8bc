#include "cli.hpp"
#include "tsclust/pipeline.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

using namespace tsclust;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "tsclust_pipeline_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("CSV volume fixture")
{
    const auto p = scratch("tiny.csv");
    spit(p, "x,y,z,t1,t2,t3\n1,0,0,4,5,6\n0,0,0,1,2,3.5\n");
    const VolumeSeries v = load_volume(p, VolumeFormat::Csv);
    CHECK(v.dims == Dims{2, 1, 1});
    CHECK(v.voxels() == 2);
    CHECK(v.grid.size() == 3);
    CHECK(v.grid[2] == 3.0);
    CHECK(v.series(0, 2) == 3.5);
    CHECK(v.series(1, 0) == 4.0);
}

TEST_CASE("CSV volume errors")
{
    const auto p = scratch("bad.csv");
    std::string seven = "x,y,z,t1\n";
    int rows = 0;
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                if (rows++ < 7) seven += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(z) + ",1\n";
    spit(p, seven);
    CHECK_THROWS_WITH_AS(load_volume(p, VolumeFormat::Csv), doctest::Contains("mismatch"), ValidationError);
    spit(p, "x,y,t1\n0,0,1\n");
    CHECK_THROWS_AS(load_volume(p, VolumeFormat::Csv), ValidationError);
    spit(p, "x,y,z,t1\n0,0,0,nan\n");
    CHECK_THROWS_AS(load_volume(p, VolumeFormat::Csv), ValidationError);
    spit(p, "x,y,z,t1\n0,0,0,1\n0,0,0,2\n");
    CHECK_THROWS_AS(load_volume(p, VolumeFormat::Csv), ValidationError);
    CHECK_THROWS_AS(load_volume(scratch("missing.csv"), VolumeFormat::Csv), ValidationError);
}

TEST_CASE("CIVT round trip is bit exact")
{
    VolumeSeries v{Dims{3, 2, 2}, TimeGrid::uniform(0.0, 2.0, 5), Matrix(12, 5)};
    std::mt19937_64 rng(4);
    std::normal_distribution<float> nd;
    for (Eigen::Index i = 0; i < v.series.size(); ++i) v.series.data()[i] = nd(rng);
    const auto a = scratch("rt.civt"), b = scratch("rt2.civt");
    save_volume(v, a, VolumeFormat::Civt);
    const VolumeSeries r = load_volume(a, VolumeFormat::Civt);
    CHECK(r.dims == v.dims);
    CHECK(r.series == v.series);
    CHECK(r.grid.points().back() == 2.0);
    save_volume(r, b, VolumeFormat::Civt);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).size() == 4 + 4 + 16 + 16 + 12 * 5 * 4);

    std::string truncated = slurp(a);
    truncated.pop_back();
    spit(b, truncated);
    CHECK_THROWS_AS(load_volume(b, VolumeFormat::Civt), ValidationError);
    std::string wrong = slurp(a);
    wrong[0] = 'X';
    spit(b, wrong);
    CHECK_THROWS_AS(load_volume(b, VolumeFormat::Civt), ValidationError);
}

TEST_CASE("CSV volume round trip")
{
    VolumeSeries v{Dims{2, 2, 1}, TimeGrid({0.0, 0.25, 1.0}), Matrix(4, 3)};
    for (Eigen::Index i = 0; i < v.series.size(); ++i) v.series.data()[i] = 0.1 * static_cast<double>(i) - 0.3;
    const auto p = scratch("rt.csv");
    save_volume(v, p, VolumeFormat::Csv);
    const VolumeSeries r = load_volume(p, VolumeFormat::Csv);
    CHECK(r.series == v.series);
    CHECK(r.grid.points()[1] == 0.25);
    CHECK_THROWS_AS(save_volume(v, scratch("nonuniform.civt"), VolumeFormat::Civt), ValidationError);
}

TEST_CASE("column normalization")
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    Matrix b(50, 3);
    for (Eigen::Index i = 0; i < 50; ++i) {
        b(i, 0) = 3.0 + 2.0 * nd(rng);
        b(i, 1) = 7.25;
        b(i, 2) = -1.0 + 0.01 * nd(rng);
    }
    const CoefSet n = normalize_columns(CoefSet{b, std::nullopt});
    REQUIRE(n.normalization);
    for (Eigen::Index j : {0, 2}) {
        const auto col = n.values.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / 49.0);
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(sd - 1.0) < 1e-10);
    }
    CHECK(n.values.col(1).isZero(0.0));
    CHECK(n.normalization->scale(1) == 1.0);
    CHECK((denormalize(n.values, *n.normalization) - b).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(normalize_columns(CoefSet{Matrix::Zero(1, 3), std::nullopt}), ValidationError);
}

TEST_CASE("cluster map exports")
{
    ClusterVolume cv{Dims{2, 2, 1}, 4, {1, 2, 3, 4}, {0, 0, 1, 0}};
    const auto csv = scratch("map.csv"), civl = scratch("map.civl");
    export_cluster_map_csv(cv, csv);
    CHECK(slurp(csv) == "x,y,z,label,trimmed\n0,0,0,1,0\n1,0,0,2,0\n0,1,0,3,1\n1,1,0,4,0\n");
    export_cluster_map_civl(cv, civl);
    CHECK(read_cluster_map_civl(civl) == cv);
    CHECK(read_cluster_map_csv(csv) == cv);
    CHECK(slurp(civl).size() == 4 + 4 + 12 + 4 + 4 * 3);

    ClusterVolume bad = cv;
    bad.labels[0] = 5;
    CHECK_THROWS_AS(export_cluster_map_civl(bad, civl), ValidationError);
    CHECK_THROWS_AS(export_cluster_map_csv(bad, csv), ValidationError);
}

TEST_CASE("mean function export")
{
    const BasisSystem s = make_bspline_system(0.0, 1.0, 6);
    const TimeGrid g = TimeGrid::uniform(0.0, 1.0, 9);
    const DesignMatrix x = design_matrix(s, g);
    Matrix coef(2, 6);
    coef << 0, 0, 0, 0, 0, 0, 1.0, -2.0, 0.5, 3.0, 0.0, 1.25;
    const MeanFunctions mf{g, coef, coef * x.matrix().transpose()};
    const auto p = scratch("mu.csv");
    export_mean_functions(mf, p);
    const auto [grid, values] = read_mean_functions(p);
    CHECK(values == mf.values);
    CHECK(values.row(0).isZero(0.0));
    for (std::size_t j = 0; j < g.size(); ++j)
        CHECK(std::abs(values(1, static_cast<Eigen::Index>(j)) - reconstruct(s, coef.row(1).transpose(), g[j])) < 1e-10);
    const auto p2 = scratch("mu2.csv");
    export_mean_functions(MeanFunctions{grid, coef, values}, p2);
    CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("slice rendering")
{
    ClusterVolume one{Dims{1, 1, 1}, 1, {1}, {0}};
    const auto p = scratch("one.ppm");
    render_slice(one, 'z', 0, p);
    const auto pal = slice_palette();
    const std::string expected = std::string("P6\n1 1\n255\n") + static_cast<char>(pal[1][0]) +
                                 static_cast<char>(pal[1][1]) + static_cast<char>(pal[1][2]);
    CHECK(slurp(p) == expected);

    ClusterVolume flat{Dims{3, 2, 2}, 2, std::vector<std::uint16_t>(12, 2), std::vector<std::uint8_t>(12, 0)};
    flat.trimmed[0] = 1;
    const auto q = scratch("flat.ppm"), q2 = scratch("flat2.ppm");
    render_slice(flat, 'z', 1, q);
    const std::string img = slurp(q);
    const std::string header = "P6\n3 2\n255\n";
    REQUIRE(img.size() == header.size() + 18);
    for (std::size_t i = header.size(); i < img.size(); i += 3)
        CHECK(static_cast<std::uint8_t>(img[i]) == pal[2][0]);
    render_slice(flat, 'z', 0, q);
    CHECK(slurp(q).substr(header.size(), 3) == std::string(3, '\0'));
    render_slice(flat, 'z', 0, q2);
    CHECK(slurp(q) == slurp(q2));
    render_slice(flat, 'x', 2, q);
    CHECK(slurp(q).rfind("P6\n2 2\n", 0) == 0);
    CHECK_THROWS_AS(render_slice(flat, 'z', 2, q), ValidationError);
    CHECK_THROWS_AS(render_slice(flat, 'w', 0, q), ValidationError);
}

TEST_CASE("run config parsing")
{
    CHECK(RunConfig::parse_k_set("2..5") == std::vector<int>{2, 3, 4, 5});
    CHECK(RunConfig::parse_k_set("7,3,5") == std::vector<int>{3, 5, 7});
    CHECK_THROWS_AS(RunConfig::parse_k_set("5..2"), ValidationError);
    CHECK_THROWS_AS(RunConfig::parse_k_set("2,2"), ValidationError);
    const auto p = scratch("cfg.json");
    spit(p, R"({"d": 12, "k_set": [2, 3, 4, 5], "alpha": 0.1, "normalize": false, "penalty": "full"})");
    RunConfig cfg;
    apply_json_config(cfg, p);
    CHECK(cfg.d == 12);
    CHECK(cfg.k_set.size() == 4);
    CHECK(cfg.alpha == 0.1);
    CHECK_FALSE(cfg.normalize);
    CHECK(cfg.penalty == Penalty::FullGmm);
    spit(p, R"({"dd": 12})");
    CHECK_THROWS_AS(apply_json_config(cfg, p), ValidationError);
    spit(p, R"({"d": "twelve"})");
    CHECK_THROWS_AS(apply_json_config(cfg, p), ValidationError);
    cfg.alpha = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("single-voxel volume runs end to end")
{
    VolumeSeries v{Dims{1, 1, 1}, TimeGrid::uniform(0.0, 1.0, 12), Matrix(1, 12)};
    for (int j = 0; j < 12; ++j) v.series(0, j) = std::sin(static_cast<double>(j));
    RunConfig cfg;
    cfg.d = 5;
    cfg.k_set = {2};
    const TwoStageResult r = run_two_stage(v, cfg);
    CHECK(r.selected_k == 1);
    CHECK(r.clusters.labels == std::vector<std::uint16_t>{1});
    CHECK(r.alpha == 0.0);
}

TEST_CASE("normalization neutrality for alpha = 0 and fixed k")
{
    // Cluster means on the original scale equal the member averages of the
    // fitted coefficients, so their curves equal the average member curves.
    VolumeSeries v{Dims{30, 1, 1}, TimeGrid::uniform(0.0, 1.0, 40), Matrix(30, 40)};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < 30; ++i)
        for (Eigen::Index j = 0; j < 40; ++j) {
            const double t = v.grid[static_cast<std::size_t>(j)];
            v.series(i, j) = (i < 15 ? std::sin(6 * t) : std::cos(6 * t)) + 0.1 * nd(rng);
        }
    RunConfig cfg;
    cfg.d = 8;
    cfg.k_set = {2};
    cfg.alpha = 0.0;
    cfg.detrend = false;
    const TwoStageResult r = run_two_stage(v, cfg);
    const DesignMatrix x = design_matrix(make_bspline_system(0.0, 1.0, 8), v.grid);
    const CoefSet raw = fit_coefficients(x, v.series);
    for (int c = 1; c <= 2; ++c) {
        Vector avg = Vector::Zero(40);
        int count = 0;
        for (Eigen::Index i = 0; i < 30; ++i)
            if (r.clusters.labels[static_cast<std::size_t>(i)] == c) {
                avg += x.matrix() * raw.values.row(i).transpose();
                ++count;
            }
        REQUIRE(count > 0);
        avg /= count;
        CHECK((r.means.values.row(c - 1).transpose() - avg).cwiseAbs().maxCoeff() < 1e-6);
    }

    cfg.normalize = false;
    const TwoStageResult plain = run_two_stage(v, cfg);
    CHECK(plain.clusters.labels == r.clusters.labels);
    CHECK((plain.means.values - r.means.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("k larger than n is capped and too few candidates are rejected")
{
    VolumeSeries v{Dims{3, 1, 1}, TimeGrid::uniform(0.0, 1.0, 10), Matrix::Random(3, 10)};
    RunConfig cfg;
    cfg.d = 4;
    cfg.k_set = {2, 3};
    CHECK_THROWS_AS(run_two_stage(v, cfg), ValidationError);
    cfg.k_set = {3, 4, 5};
    const TwoStageResult r = run_two_stage(v, cfg);
    CHECK(r.selected_k == 3);
}

TEST_CASE("cli exit codes")
{
    std::ostringstream out, err;
    CHECK(run_cli({"bogus"}, out, err) == 2);
    CHECK(run_cli({"render", "--labels", scratch("nope.civl").string(), "--index", "0", "--out", "x.ppm"}, out, err) == 2);
    CHECK(run_cli({"--help"}, out, err) == 0);

    const auto ta = scratch("a.csv"), tb = scratch("b.csv");
    spit(ta, "label\n1\n1\n1\n2\n2\n2\n");
    spit(tb, "1\n1\n2\n2\n2\n2\n");
    std::ostringstream ari;
    CHECK(run_cli({"ari", "--a", ta.string(), "--b", tb.string()}, ari, err) == 0);
    CHECK(ari.str() == "0.324324\n");

    const auto trace = scratch("trace.csv");
    spit(trace, "k,loglik,pen,seconds\n2,5,0,0\n3,4,0,0\n4,3,0,0\n5,2,0,0\n");
    std::ostringstream sel;
    CHECK(run_cli({"select", "--trace", trace.string(), "--d", "3"}, sel, err) == 3);
    CHECK(run_cli({"select", "--trace", trace.string(), "--d", "3", "--kappa", "0.1"}, sel, err) == 0);
    CHECK(sel.str() == "2\n");
}

TEST_CASE("cli render writes a PPM")
{
    ClusterVolume cv{Dims{2, 2, 1}, 4, {1, 2, 3, 4}, {0, 0, 0, 0}};
    const auto civl = scratch("r.civl"), ppm = scratch("r.ppm");
    export_cluster_map_civl(cv, civl);
    std::ostringstream out, err;
    CHECK(run_cli({"render", "--labels", civl.string(), "--axis", "z", "--index", "0", "--out", ppm.string()}, out, err) ==
          0);
    CHECK(slurp(ppm).size() == std::string("P6\n2 2\n255\n").size() + 12);
}
