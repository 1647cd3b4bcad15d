#pragma once

// Self-describing command output: a list of named tables rendered as CSV
// blocks or as one JSON document. Numbers are formatted once, with %.10g, and
// the JSON values are parsed back from those same strings so both formats
// carry identical numeric content.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace calib::cli {

using json = nlohmann::ordered_json;
using Cell = std::variant<double, std::string>;

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    Table& row(std::vector<Cell> r) {
        rows.push_back(std::move(r));
        return *this;
    }
};

/// Two-column table of named quantities.
struct Quantities {
    Table table;
    explicit Quantities(std::string name) : table{std::move(name), {"quantity", "value"}, {}} {}
    Quantities& add(std::string key, Cell value) {
        table.rows.push_back({std::move(key), std::move(value)});
        return *this;
    }
};

struct Report {
    std::string command;
    json config;
    std::vector<Table> tables;

    void add(Table t) { tables.push_back(std::move(t)); }
    void add(Quantities q) { tables.push_back(std::move(q.table)); }
};

namespace detail {

inline std::string cell_text(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return format_number(*d);
    return std::get<std::string>(c);
}

inline json cell_json(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) {
        if (!std::isfinite(*d)) return format_number(*d);
        return json::parse(format_number(*d));
    }
    return std::get<std::string>(c);
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

}  // namespace detail

inline void write_csv(std::ostream& os, const Report& r) {
    os << "# command: " << r.command << "\n";
    os << "# config: " << r.config.dump() << "\n";
    for (const Table& t : r.tables) {
        os << "\n# table: " << t.name << "\n";
        for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << detail::csv_field(t.columns[i]);
        os << "\n";
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                os << (i ? "," : "") << detail::csv_field(detail::cell_text(row[i]));
            os << "\n";
        }
    }
}

inline json to_json(const Report& r) {
    json tables = json::object();
    for (const Table& t : r.tables) {
        json rows = json::array();
        for (const auto& row : t.rows) {
            json jr = json::array();
            for (const Cell& c : row) jr.push_back(detail::cell_json(c));
            rows.push_back(std::move(jr));
        }
        tables[t.name] = {{"columns", t.columns}, {"rows", std::move(rows)}};
    }
    return {{"command", r.command}, {"config", r.config}, {"tables", std::move(tables)}};
}

inline void write_json(std::ostream& os, const Report& r) { os << to_json(r).dump(2) << "\n"; }

}  // namespace calib::cli
