#pragma once

// Small CSV helpers shared by the exporters.

#include "tsclust/common.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

namespace tsclust::csv {

/// Shortest representation that parses back to the same double.
inline std::string format(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split(std::string_view line)
{
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view cell, const std::string& context)
{
    cell = trim(cell);
    double value = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw ValidationError(context + ": cannot parse number '" + std::string(cell) + "'");
    return value;
}

inline long long parse_int(std::string_view cell, const std::string& context)
{
    cell = trim(cell);
    long long value = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw ValidationError(context + ": cannot parse integer '" + std::string(cell) + "'");
    return value;
}

inline std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string() + " for reading");
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace tsclust::csv
