#pragma once

// CSV readers for calibration pairs (x,u), single samples (y) and grouped
// samples (group,y). Files start with a header naming the columns; blank
// lines and lines starting with '#' are skipped. Errors report the line
// number within the file.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "calib/errors.hpp"
#include "calib/model.hpp"

namespace calib::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    for (;;) {
        const auto c = line.find(',');
        out.push_back(trim(line.substr(0, c)));
        if (c == std::string_view::npos) break;
        line.remove_prefix(c + 1);
    }
    return out;
}

inline double number(std::string_view field, std::size_t line, std::string_view column) {
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || end != field.data() + field.size() || !std::isfinite(v))
        throw parse_error("column '" + std::string(column) + "': '" + std::string(field) +
                              "' is not a finite number",
                          line);
    return v;
}

/// Calls row(fields, line) for every data line after checking the header.
template <class Row>
void read_table(std::istream& in, const std::vector<std::string_view>& header, Row&& row) {
    std::string text;
    std::size_t line = 0;
    bool seen_header = false;
    while (std::getline(in, text)) {
        ++line;
        const std::string_view t = trim(text);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = split(t);
        if (!seen_header) {
            if (fields != header) {
                std::string want;
                for (auto h : header) want += (want.empty() ? "" : ",") + std::string(h);
                throw parse_error("expected header '" + want + "'", line);
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != header.size())
            throw parse_error("expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()),
                              line);
        row(fields, line);
    }
    if (!seen_header) throw parse_error("file is empty", 0);
}

inline std::ifstream open(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open '" + path + "'", 0);
    return in;
}

}  // namespace detail

inline std::vector<CalibrationPair> read_pairs(std::istream& in) {
    std::vector<CalibrationPair> out;
    detail::read_table(in, {"x", "u"}, [&](const auto& f, std::size_t line) {
        out.push_back({detail::number(f[0], line, "x"), detail::number(f[1], line, "u")});
    });
    if (out.empty()) throw parse_error("no data rows", 0);
    return out;
}

inline std::vector<double> read_sample(std::istream& in) {
    std::vector<double> out;
    detail::read_table(in, {"y"}, [&](const auto& f, std::size_t line) {
        out.push_back(detail::number(f[0], line, "y"));
    });
    if (out.empty()) throw parse_error("no data rows", 0);
    return out;
}

struct GroupedSample {
    std::vector<std::string> labels;  ///< in order of first appearance
    std::vector<std::vector<double>> groups;
};

inline GroupedSample read_groups(std::istream& in) {
    GroupedSample out;
    std::map<std::string, std::size_t, std::less<>> index;
    detail::read_table(in, {"group", "y"}, [&](const auto& f, std::size_t line) {
        if (f[0].empty()) throw parse_error("empty group label", line);
        const double v = detail::number(f[1], line, "y");
        auto it = index.find(f[0]);
        if (it == index.end()) {
            it = index.emplace(std::string(f[0]), out.labels.size()).first;
            out.labels.emplace_back(f[0]);
            out.groups.emplace_back();
        }
        out.groups[it->second].push_back(v);
    });
    if (out.groups.empty()) throw parse_error("no data rows", 0);
    return out;
}

inline std::vector<CalibrationPair> read_pairs(const std::string& path) {
    auto in = detail::open(path);
    return read_pairs(in);
}
inline std::vector<double> read_sample(const std::string& path) {
    auto in = detail::open(path);
    return read_sample(in);
}
inline GroupedSample read_groups(const std::string& path) {
    auto in = detail::open(path);
    return read_groups(in);
}

}  // namespace calib::io
