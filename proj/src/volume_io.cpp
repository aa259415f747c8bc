#include "tsclust/pipeline.hpp"

#include "csv.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace tsclust {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put(std::ostream& out, T value)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& ctx)
{
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) throw ValidationError(ctx + ": truncated file");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

void expect_magic(std::istream& in, const char* magic, const std::string& ctx)
{
    char buf[4];
    if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
        throw ValidationError(ctx + ": missing " + std::string(magic, 4) + " magic");
    const auto version = get<std::uint32_t>(in, ctx);
    if (version != kFormatVersion) throw ValidationError(ctx + ": unsupported version " + std::to_string(version));
}

void expect_end(std::istream& in, const std::string& ctx)
{
    if (in.peek() != std::char_traits<char>::eof()) throw ValidationError(ctx + ": trailing bytes after payload");
}

std::uint32_t to_u32(std::size_t v, const char* what)
{
    if (v > std::numeric_limits<std::uint32_t>::max()) throw ValidationError(std::string(what) + " does not fit in u32");
    return static_cast<std::uint32_t>(v);
}

Dims read_dims(std::istream& in, const std::string& ctx)
{
    Dims dims;
    dims.nx = get<std::uint32_t>(in, ctx);
    dims.ny = get<std::uint32_t>(in, ctx);
    dims.nz = get<std::uint32_t>(in, ctx);
    if (dims.count() == 0) throw ValidationError(ctx + ": zero-sized volume");
    return dims;
}

void write_dims(std::ostream& out, const Dims& dims)
{
    put(out, to_u32(dims.nx, "nx"));
    put(out, to_u32(dims.ny, "ny"));
    put(out, to_u32(dims.nz, "nz"));
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) throw ValidationError("failed writing " + path.string());
}

double parse_time_cell(std::string_view cell, const std::string& ctx)
{
    cell = csv::trim(cell);
    if (!cell.empty() && cell.front() == 't') cell.remove_prefix(1);
    return csv::parse_double(cell, ctx);
}

VolumeSeries load_civt(const std::filesystem::path& path)
{
    const std::string ctx = path.string();
    auto in = csv::open_in(path);
    expect_magic(in, "CIVT", ctx);
    const Dims dims = read_dims(in, ctx);
    const auto m = get<std::uint32_t>(in, ctx);
    if (m == 0) throw ValidationError(ctx + ": m must be positive");
    const auto lo = get<double>(in, ctx);
    const auto hi = get<double>(in, ctx);
    if (!std::isfinite(lo) || !std::isfinite(hi) || (m > 1 && !(hi > lo)))
        throw ValidationError(ctx + ": invalid time range");

    const std::size_t n = dims.count();
    std::vector<float> raw(n * m);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float))))
        throw ValidationError(ctx + ": dims/count mismatch (payload shorter than nx*ny*nz*m values)");
    expect_end(in, ctx);

    VolumeSeries vol{dims, TimeGrid::uniform(lo, hi, m), Matrix(n, m)};
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw[i])) throw ValidationError(ctx + ": non-finite intensity");
        vol.series.data()[i] = raw[i];
    }
    return vol;
}

void save_civt(const VolumeSeries& vol, const std::filesystem::path& path)
{
    if (!vol.grid.is_uniform()) throw ValidationError("CIVT stores uniform time grids only");
    auto out = csv::open_out(path);
    out.write("CIVT", 4);
    put(out, kFormatVersion);
    write_dims(out, vol.dims);
    put(out, to_u32(vol.grid.size(), "m"));
    put(out, vol.grid.front());
    put(out, vol.grid.back());
    for (Eigen::Index i = 0; i < vol.series.size(); ++i) put(out, static_cast<float>(vol.series.data()[i]));
    finish(out, path);
}

VolumeSeries load_csv(const std::filesystem::path& path)
{
    const std::string ctx = path.string();
    auto in = csv::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(ctx + ": empty volume file");
    const auto header = csv::split(line);
    if (header.size() < 4 || csv::trim(header[0]) != "x" || csv::trim(header[1]) != "y" || csv::trim(header[2]) != "z")
        throw ValidationError(ctx + ": header must be x,y,z,t_1,...,t_m");
    std::vector<double> times;
    for (std::size_t j = 3; j < header.size(); ++j) times.push_back(parse_time_cell(header[j], ctx));
    TimeGrid grid(std::move(times));
    const std::size_t m = grid.size();

    struct Row {
        std::size_t x, y, z;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    Dims dims{0, 0, 0};
    while (std::getline(in, line)) {
        if (csv::trim(line).empty() || csv::trim(line) == "\r") continue;
        const auto cells = csv::split(line);
        if (cells.size() != m + 3) throw ValidationError(ctx + ": row " + std::to_string(rows.size() + 1) + " has wrong field count");
        Row row;
        const long long x = csv::parse_int(cells[0], ctx);
        const long long y = csv::parse_int(cells[1], ctx);
        const long long z = csv::parse_int(cells[2], ctx);
        if (x < 0 || y < 0 || z < 0) throw ValidationError(ctx + ": negative voxel coordinate");
        row.x = static_cast<std::size_t>(x);
        row.y = static_cast<std::size_t>(y);
        row.z = static_cast<std::size_t>(z);
        for (std::size_t j = 0; j < m; ++j) {
            const double v = csv::parse_double(cells[j + 3], ctx);
            if (!std::isfinite(v)) throw ValidationError(ctx + ": non-finite intensity");
            row.values.push_back(v);
        }
        dims.nx = std::max(dims.nx, row.x + 1);
        dims.ny = std::max(dims.ny, row.y + 1);
        dims.nz = std::max(dims.nz, row.z + 1);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(ctx + ": no voxel rows");
    if (rows.size() != dims.count())
        throw ValidationError(ctx + ": dims/count mismatch (" + std::to_string(dims.nx) + "x" + std::to_string(dims.ny) +
                              "x" + std::to_string(dims.nz) + " needs " + std::to_string(dims.count()) + " rows, found " +
                              std::to_string(rows.size()) + ")");

    VolumeSeries vol{dims, std::move(grid), Matrix(dims.count(), m)};
    std::vector<std::uint8_t> seen(dims.count(), 0);
    for (const Row& row : rows) {
        const std::size_t i = dims.index(row.x, row.y, row.z);
        if (seen[i]) throw ValidationError(ctx + ": duplicate voxel coordinate");
        seen[i] = 1;
        for (std::size_t j = 0; j < m; ++j) vol.series(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row.values[j];
    }
    return vol;
}

void save_csv(const VolumeSeries& vol, const std::filesystem::path& path)
{
    auto out = csv::open_out(path);
    out << "x,y,z";
    for (double t : vol.grid.points()) out << ",t" << csv::format(t);
    out << '\n';
    const Dims& d = vol.dims;
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const auto i = static_cast<Eigen::Index>(d.index(x, y, z));
                out << x << ',' << y << ',' << z;
                for (Eigen::Index j = 0; j < vol.series.cols(); ++j) out << ',' << csv::format(vol.series(i, j));
                out << '\n';
            }
    finish(out, path);
}

}  // namespace

void VolumeSeries::validate() const
{
    require(dims.count() >= 1, "volume must have at least one voxel");
    require(static_cast<std::size_t>(series.rows()) == dims.count(), "series rows must equal nx*ny*nz");
    require(static_cast<std::size_t>(series.cols()) == grid.size(), "series columns must equal the grid size");
    require(series.allFinite(), "volume contains non-finite values");
}

VolumeFormat parse_volume_format(std::string_view name)
{
    if (name == "civt") return VolumeFormat::Civt;
    if (name == "csv") return VolumeFormat::Csv;
    throw ValidationError("unknown volume format '" + std::string(name) + "' (expected civt or csv)");
}

VolumeSeries load_volume(const std::filesystem::path& path, VolumeFormat format)
{
    return format == VolumeFormat::Civt ? load_civt(path) : load_csv(path);
}

void save_volume(const VolumeSeries& volume, const std::filesystem::path& path, VolumeFormat format)
{
    volume.validate();
    if (format == VolumeFormat::Civt)
        save_civt(volume, path);
    else
        save_csv(volume, path);
}

void ClusterVolume::validate() const
{
    require(dims.count() >= 1, "cluster volume must have at least one voxel");
    require(k >= 1 && k <= std::numeric_limits<std::uint16_t>::max(), "cluster count out of range");
    require(labels.size() == dims.count() && trimmed.size() == dims.count(), "label count must equal nx*ny*nz");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 1 || labels[i] > k)
            throw ValidationError("label " + std::to_string(labels[i]) + " outside 1.." + std::to_string(k));
        require(trimmed[i] <= 1, "trimmed flags must be 0 or 1");
    }
}

void export_cluster_map_csv(const ClusterVolume& cv, const std::filesystem::path& path)
{
    cv.validate();
    auto out = csv::open_out(path);
    out << "x,y,z,label,trimmed\n";
    const Dims& d = cv.dims;
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const std::size_t i = d.index(x, y, z);
                out << x << ',' << y << ',' << z << ',' << cv.labels[i] << ',' << int{cv.trimmed[i]} << '\n';
            }
    finish(out, path);
}

void export_cluster_map_civl(const ClusterVolume& cv, const std::filesystem::path& path)
{
    cv.validate();
    auto out = csv::open_out(path);
    out.write("CIVL", 4);
    put(out, kFormatVersion);
    write_dims(out, cv.dims);
    put(out, static_cast<std::uint32_t>(cv.k));
    for (std::size_t i = 0; i < cv.labels.size(); ++i) {
        put(out, cv.labels[i]);
        put(out, cv.trimmed[i]);
    }
    finish(out, path);
}

ClusterVolume read_cluster_map_civl(const std::filesystem::path& path)
{
    const std::string ctx = path.string();
    auto in = csv::open_in(path);
    expect_magic(in, "CIVL", ctx);
    ClusterVolume cv;
    cv.dims = read_dims(in, ctx);
    const auto k = get<std::uint32_t>(in, ctx);
    if (k < 1 || k > std::numeric_limits<std::uint16_t>::max()) throw ValidationError(ctx + ": cluster count out of range");
    cv.k = static_cast<int>(k);
    const std::size_t n = cv.dims.count();
    cv.labels.resize(n);
    cv.trimmed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        cv.labels[i] = get<std::uint16_t>(in, ctx);
        cv.trimmed[i] = get<std::uint8_t>(in, ctx);
    }
    expect_end(in, ctx);
    cv.validate();
    return cv;
}

ClusterVolume read_cluster_map_csv(const std::filesystem::path& path)
{
    const std::string ctx = path.string();
    auto in = csv::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(ctx + ": empty cluster map");
    const auto header = csv::split(line);
    if (header.size() != 5 || header[0] != "x" || header[1] != "y" || header[2] != "z" || header[3] != "label" ||
        header[4] != "trimmed")
        throw ValidationError(ctx + ": header must be x,y,z,label,trimmed");
    struct Row {
        std::size_t x, y, z;
        long long label, trimmed;
    };
    std::vector<Row> rows;
    Dims dims{0, 0, 0};
    long long max_label = 0;
    while (std::getline(in, line)) {
        if (csv::trim(line).empty()) continue;
        const auto c = csv::split(line);
        if (c.size() != 5) throw ValidationError(ctx + ": cluster map rows need 5 fields");
        const long long x = csv::parse_int(c[0], ctx), y = csv::parse_int(c[1], ctx), z = csv::parse_int(c[2], ctx);
        if (x < 0 || y < 0 || z < 0) throw ValidationError(ctx + ": negative voxel coordinate");
        Row r{static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z),
              csv::parse_int(c[3], ctx), csv::parse_int(c[4], ctx)};
        if (r.label < 1 || r.label > std::numeric_limits<std::uint16_t>::max() || r.trimmed < 0 || r.trimmed > 1)
            throw ValidationError(ctx + ": label or trimmed flag out of range");
        max_label = std::max(max_label, r.label);
        dims.nx = std::max(dims.nx, r.x + 1);
        dims.ny = std::max(dims.ny, r.y + 1);
        dims.nz = std::max(dims.nz, r.z + 1);
        rows.push_back(r);
    }
    if (rows.empty() || rows.size() != dims.count()) throw ValidationError(ctx + ": dims/count mismatch");
    ClusterVolume cv;
    cv.dims = dims;
    // The CSV does not carry k; the largest label stands in for it.
    cv.k = static_cast<int>(max_label);
    cv.labels.assign(dims.count(), 0);
    cv.trimmed.assign(dims.count(), 0);
    std::vector<std::uint8_t> seen(dims.count(), 0);
    for (const Row& r : rows) {
        const std::size_t i = dims.index(r.x, r.y, r.z);
        if (seen[i]) throw ValidationError(ctx + ": duplicate voxel coordinate");
        seen[i] = 1;
        cv.labels[i] = static_cast<std::uint16_t>(r.label);
        cv.trimmed[i] = static_cast<std::uint8_t>(r.trimmed);
    }
    return cv;
}

void export_mean_functions(const MeanFunctions& mf, const std::filesystem::path& path)
{
    require(mf.values.rows() >= 1, "mean functions need at least one curve");
    require(static_cast<std::size_t>(mf.values.cols()) == mf.grid.size(), "mean functions must be sampled on the grid");
    auto out = csv::open_out(path);
    out << 't';
    for (Eigen::Index c = 0; c < mf.values.rows(); ++c) out << ",mu_" << c + 1;
    out << '\n';
    for (std::size_t j = 0; j < mf.grid.size(); ++j) {
        out << csv::format(mf.grid[j]);
        for (Eigen::Index c = 0; c < mf.values.rows(); ++c)
            out << ',' << csv::format(mf.values(c, static_cast<Eigen::Index>(j)));
        out << '\n';
    }
    finish(out, path);
}

std::pair<TimeGrid, Matrix> read_mean_functions(const std::filesystem::path& path)
{
    const std::string ctx = path.string();
    auto in = csv::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(ctx + ": empty mean-function file");
    const auto header = csv::split(line);
    if (header.size() < 2 || header[0] != "t") throw ValidationError(ctx + ": header must be t,mu_1,...,mu_k");
    const std::size_t k = header.size() - 1;
    for (std::size_t c = 0; c < k; ++c)
        if (header[c + 1] != "mu_" + std::to_string(c + 1)) throw ValidationError(ctx + ": header must be t,mu_1,...,mu_k");
    std::vector<double> times;
    std::vector<std::vector<double>> cols(k);
    while (std::getline(in, line)) {
        if (csv::trim(line).empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != k + 1) throw ValidationError(ctx + ": wrong field count");
        times.push_back(csv::parse_double(cells[0], ctx));
        for (std::size_t c = 0; c < k; ++c) cols[c].push_back(csv::parse_double(cells[c + 1], ctx));
    }
    TimeGrid grid(std::move(times));
    Matrix values(k, grid.size());
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < grid.size(); ++j) values(c, j) = cols[c][j];
    return {std::move(grid), std::move(values)};
}

void write_means_csv(const Matrix& means, const std::filesystem::path& path)
{
    auto out = csv::open_out(path);
    for (Eigen::Index j = 0; j < means.cols(); ++j) out << (j ? "," : "") << "b_" << j + 1;
    out << '\n';
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        for (Eigen::Index j = 0; j < means.cols(); ++j) out << (j ? "," : "") << csv::format(means(c, j));
        out << '\n';
    }
    finish(out, path);
}

Matrix read_means_csv(const std::filesystem::path& path)
{
    const std::string ctx = path.string();
    auto in = csv::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(ctx + ": empty means file");
    const std::size_t d = csv::split(line).size();
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (csv::trim(line).empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != d) throw ValidationError(ctx + ": wrong field count");
        std::vector<double> row;
        for (auto cell : cells) row.push_back(csv::parse_double(cell, ctx));
        rows.push_back(std::move(row));
    }
    Matrix means(rows.size(), d);
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (std::size_t j = 0; j < d; ++j) means(c, j) = rows[c][j];
    return means;
}

std::array<std::array<std::uint8_t, 3>, 16> slice_palette()
{
    return {{{{0x80, 0x80, 0x80}},
             {{0xE6, 0x19, 0x4B}},
             {{0x3C, 0xB4, 0x4B}},
             {{0xFF, 0xE1, 0x19}},
             {{0x43, 0x63, 0xD8}},
             {{0xF5, 0x82, 0x31}},
             {{0x91, 0x1E, 0xB4}},
             {{0x46, 0xF0, 0xF0}},
             {{0xF0, 0x32, 0xE6}},
             {{0xBC, 0xF6, 0x0C}},
             {{0xFA, 0xBE, 0xBE}},
             {{0x00, 0x80, 0x80}},
             {{0xE6, 0xBE, 0xFF}},
             {{0x9A, 0x63, 0x24}},
             {{0xFF, 0xFA, 0xC8}},
             {{0x80, 0x00, 0x00}}}};
}

void render_slice(const ClusterVolume& cv, char axis, std::size_t index, const std::filesystem::path& path)
{
    cv.validate();
    const Dims& d = cv.dims;
    std::size_t width = 0, height = 0, depth = 0;
    switch (axis) {
    case 'x': width = d.ny; height = d.nz; depth = d.nx; break;
    case 'y': width = d.nx; height = d.nz; depth = d.ny; break;
    case 'z': width = d.nx; height = d.ny; depth = d.nz; break;
    default: throw ValidationError(std::string("slice axis must be x, y or z, got '") + axis + "'");
    }
    if (index >= depth)
        throw ValidationError("slice index " + std::to_string(index) + " outside 0.." + std::to_string(depth - 1));

    const auto palette = slice_palette();
    auto out = csv::open_out(path);
    out << "P6\n" << width << ' ' << height << "\n255\n";
    for (std::size_t row = 0; row < height; ++row)
        for (std::size_t col = 0; col < width; ++col) {
            std::size_t i = 0;
            if (axis == 'x') i = d.index(index, col, row);
            else if (axis == 'y') i = d.index(col, index, row);
            else i = d.index(col, row, index);
            std::array<std::uint8_t, 3> rgb{0, 0, 0};
            if (!cv.trimmed[i]) rgb = palette[cv.labels[i] % 16];
            out.write(reinterpret_cast<const char*>(rgb.data()), 3);
        }
    finish(out, path);
}

}  // namespace tsclust
