#pragma once

// Volume ingestion, the two-stage run over a volume, and exporters.
// Voxels are ordered x fastest, then y, then z, in memory and in every file.

#include "tsclust/basis.hpp"
#include "tsclust/common.hpp"
#include "tsclust/selection.hpp"
#include "tsclust/tclust.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

namespace tsclust {

struct Dims {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nz = 1;

    std::size_t count() const { return nx * ny * nz; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + nx * (y + ny * z); }
    bool operator==(const Dims&) const = default;
};

struct VolumeSeries {
    Dims dims;
    TimeGrid grid;
    Matrix series;  // n x m, voxel-major

    std::size_t voxels() const { return static_cast<std::size_t>(series.rows()); }
    void validate() const;
};

enum class VolumeFormat { Civt, Csv };

VolumeFormat parse_volume_format(std::string_view name);

/// CIVT: "CIVT", u32 version 1, u32 nx ny nz m, f64 t_lo t_hi, then n*m
/// float32 values, time contiguous per voxel. The grid is uniform on [t_lo, t_hi].
/// CSV: header `x,y,z,t_1,...,t_m` where each time cell is a number with an
/// optional leading `t`; one row per voxel. Dims are the largest coordinates + 1.
VolumeSeries load_volume(const std::filesystem::path& path, VolumeFormat format);
void save_volume(const VolumeSeries& volume, const std::filesystem::path& path, VolumeFormat format);

/// Centers every column and divides by its sample SD (scale 1 for constant columns).
CoefSet normalize_columns(const CoefSet& coefs);

/// Maps normalized rows back to the original coefficient scale.
Matrix denormalize(const Matrix& rows, const ColumnStats& stats);

struct RunConfig {
    int d = 100;
    double lambda = 1.0;
    double alpha = 0.9;
    std::vector<int> k_set = range_k(2, 50);
    int restarts = 20;
    int max_iter = 20;
    std::uint64_t seed = 0;
    bool detrend = true;
    bool normalize = true;
    Penalty penalty = Penalty::Spherical;
    std::filesystem::path input;
    VolumeFormat format = VolumeFormat::Civt;
    std::filesystem::path out;

    static std::vector<int> range_k(int lo, int hi);
    /// Parses "a..b" or a comma list such as "2,3,5".
    static std::vector<int> parse_k_set(std::string_view text);

    /// Checks the numeric fields; paths are checked by whoever opens them.
    void validate() const;
};

/// Reads a JSON object whose keys mirror RunConfig fields (d, lambda, alpha,
/// k_set as "a..b" or an array, restarts, max_iter, seed, detrend, normalize,
/// penalty, input, format, out). Missing keys keep their current values;
/// unknown keys are rejected.
void apply_json_config(RunConfig& cfg, const std::filesystem::path& path);

struct ClusterVolume {
    Dims dims;
    int k = 0;
    std::vector<std::uint16_t> labels;  // 1..k
    std::vector<std::uint8_t> trimmed;  // 0 or 1

    void validate() const;
    bool operator==(const ClusterVolume&) const = default;
};

struct MeanFunctions {
    TimeGrid grid;
    Matrix coefficients;  // k x d, original scale
    Matrix values;        // k x m, mu_c(t_j)
};

struct KSweepEntry {
    int k = 0;
    /// Best-objective means on the original coefficient scale.
    Matrix means;
    double objective = 0.0;
};

struct TwoStageResult {
    ClusterVolume clusters;
    MeanFunctions means;
    SelectionTrace trace;
    SlopeEstimate slope;
    std::vector<KSweepEntry> sweep;
    int selected_k = 0;
    /// Trim fraction actually used (forced to 0 when too few points remain).
    double alpha = 0.0;
};

/// Raised when DDSE fails; carries everything computed before selection.
class SelectionError : public NumericalError {
public:
    SelectionError(const std::string& what, SelectionTrace trace, std::vector<KSweepEntry> sweep)
        : NumericalError(what), trace_(std::move(trace)), sweep_(std::move(sweep))
    {
    }
    const SelectionTrace& trace() const { return trace_; }
    const std::vector<KSweepEntry>& sweep() const { return sweep_; }

private:
    SelectionTrace trace_;
    std::vector<KSweepEntry> sweep_;
};

/// Detrend, fit, normalize, sweep k, select by DDSE and the penalized
/// criterion, allocate every voxel and sample the mean curves.
/// Candidates larger than n are capped at n. With a single candidate it is taken
/// as is and no slope is estimated.
TwoStageResult run_two_stage(const VolumeSeries& volume, const RunConfig& cfg);

/// CSV `x,y,z,label,trimmed`.
void export_cluster_map_csv(const ClusterVolume& cv, const std::filesystem::path& path);
/// CIVL: "CIVL", u32 version 1, u32 nx ny nz, u32 k, then per voxel u16 label, u8 trimmed.
void export_cluster_map_civl(const ClusterVolume& cv, const std::filesystem::path& path);
ClusterVolume read_cluster_map_csv(const std::filesystem::path& path);
ClusterVolume read_cluster_map_civl(const std::filesystem::path& path);

/// CSV `t,mu_1,...,mu_k`, one row per grid point.
void export_mean_functions(const MeanFunctions& mf, const std::filesystem::path& path);
/// Returns the grid and the k x m value matrix.
std::pair<TimeGrid, Matrix> read_mean_functions(const std::filesystem::path& path);

/// CSV of a means matrix: header b_1..b_d, one row per cluster.
void write_means_csv(const Matrix& means, const std::filesystem::path& path);
Matrix read_means_csv(const std::filesystem::path& path);

/// 16-colour palette used by render_slice; entry i is {r, g, b}.
std::array<std::array<std::uint8_t, 3>, 16> slice_palette();

/// Binary PPM of one slice. axis z: nx x ny image, axis y: nx x nz, axis x: ny x nz.
/// Pixel colour is palette[label % 16]; trimmed voxels are black.
void render_slice(const ClusterVolume& cv, char axis, std::size_t index, const std::filesystem::path& path);

}  // namespace tsclust
