#pragma once

// CSV output for time series and Wigner grids, plus the run manifest.
// Numbers are written in shortest round-trip form so re-reading a file
// reproduces the doubles exactly.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "optocat/analysis.hpp"
#include "optocat/errors.hpp"
#include "optocat/evolve.hpp"

namespace optocat::io {

class IoError : public Error {
public:
    using Error::Error;
};

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Parses a whole token as a double; nullopt on trailing garbage.
inline std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (;;) {
        const size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

inline double number_at(std::string_view tok, const std::filesystem::path& path, size_t line) {
    const auto v = parse_double(tok);
    if (!v) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" + std::string(tok) + "'");
    }
    return *v;
}

}  // namespace detail

/// Header `t,<channel>...`, then one row per sample.
inline void write_series_csv(const std::filesystem::path& path, const TimeSeries& series) {
    auto out = detail::open_out(path);
    out << 't';
    for (const auto& name : series.names()) out << ',' << name;
    out << '\n';
    for (size_t i = 0; i < series.size(); ++i) {
        out << format_double(series.times()[i]);
        for (size_t c = 0; c < series.names().size(); ++c) out << ',' << format_double(series.column(c)[i]);
        out << '\n';
    }
    detail::finish(out, path);
}

inline TimeSeries read_series_csv(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw IoError(path.string() + ": missing header");
    const auto header = split(lines[0], ',');
    if (header.empty() || header[0] != "t") throw IoError(path.string() + ": header must start with 't'");
    TimeSeries series;
    for (size_t c = 1; c < header.size(); ++c) series.add_channel(std::string(header[c]));
    std::vector<double> row(header.size() - 1);
    for (size_t l = 1; l < lines.size(); ++l) {
        if (lines[l].empty()) continue;
        const auto toks = split(lines[l], ',');
        if (toks.size() != header.size()) {
            throw IoError(path.string() + ":" + std::to_string(l + 1) + ": expected " +
                          std::to_string(header.size()) + " fields");
        }
        const double t = detail::number_at(toks[0], path, l + 1);
        for (size_t c = 1; c < toks.size(); ++c) row[c - 1] = detail::number_at(toks[c], path, l + 1);
        series.append(t, row);
    }
    return series;
}

/// Four header lines (real extent, imaginary extent, step, shape), then one CSV row per Im zeta.
inline void write_wigner_csv(const std::filesystem::path& path, const WignerGrid& grid) {
    auto out = detail::open_out(path);
    const GridSpec& s = grid.spec;
    out << "re_extent," << format_double(s.re_min) << ',' << format_double(s.re_max) << '\n';
    out << "im_extent," << format_double(s.im_min) << ',' << format_double(s.im_max) << '\n';
    out << "step," << format_double(s.step) << '\n';
    out << "shape," << grid.rows << ',' << grid.cols << '\n';
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            if (c > 0) out << ',';
            out << format_double(grid.at(r, c));
        }
        out << '\n';
    }
    detail::finish(out, path);
}

inline WignerGrid read_wigner_csv(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.size() < 4) throw IoError(path.string() + ": truncated header");
    auto field = [&](size_t l, std::string_view key, size_t count) {
        const auto toks = split(lines[l], ',');
        if (toks.size() != count + 1 || toks[0] != key) {
            throw IoError(path.string() + ":" + std::to_string(l + 1) + ": expected '" + std::string(key) + "'");
        }
        std::vector<double> v;
        for (size_t i = 1; i < toks.size(); ++i) v.push_back(detail::number_at(toks[i], path, l + 1));
        return v;
    };
    WignerGrid grid;
    const auto re = field(0, "re_extent", 2), im = field(1, "im_extent", 2), step = field(2, "step", 1),
               shape = field(3, "shape", 2);
    grid.spec = {re[0], re[1], im[0], im[1], step[0]};
    grid.rows = static_cast<int>(shape[0]);
    grid.cols = static_cast<int>(shape[1]);
    for (size_t l = 4; l < lines.size(); ++l) {
        if (lines[l].empty()) continue;
        const auto toks = split(lines[l], ',');
        if (static_cast<int>(toks.size()) != grid.cols) {
            throw IoError(path.string() + ":" + std::to_string(l + 1) + ": expected " + std::to_string(grid.cols) +
                          " fields");
        }
        for (auto tok : toks) grid.values.push_back(detail::number_at(tok, path, l + 1));
    }
    if (grid.values.size() != static_cast<size_t>(grid.rows) * grid.cols) {
        throw IoError(path.string() + ": row count does not match shape");
    }
    return grid;
}

struct NamedSeries {
    std::string name;
    TimeSeries series;
};

struct NamedGrid {
    std::string name;
    WignerGrid grid;
};

/// Writes `<name>.csv` for every series and grid; returns the file names relative to `dir`.
inline std::vector<std::string> emit_outputs(const std::vector<NamedSeries>& series,
                                             const std::vector<NamedGrid>& grids,
                                             const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::string> files;
    for (const auto& s : series) {
        files.push_back(s.name + ".csv");
        write_series_csv(dir / files.back(), s.series);
    }
    for (const auto& g : grids) {
        files.push_back(g.name + ".csv");
        write_wigner_csv(dir / files.back(), g.grid);
    }
    return files;
}

/// Writes through a temporary file and renames it into place.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        auto out = detail::open_out(tmp);
        out << text;
        detail::finish(out, tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace optocat::io
