#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Run run(const std::string& args) {
    const fs::path err = fs::temp_directory_path() / "calib_cli_test.err";
    const std::string cmd = std::string(CALIB_CLI_PATH) + " " + args + " 2>" + err.string();
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    for (std::size_t got; (got = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, got);
    const int raw = pclose(pipe);
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out, slurp(err)};
}

std::string data(const std::string& name) { return std::string(CALIB_TEST_DATA) + "/" + name; }

// CSV report: table name -> rows of raw fields (header row first)
std::map<std::string, std::vector<std::vector<std::string>>> parse_csv(const std::string& text) {
    std::map<std::string, std::vector<std::vector<std::string>>> out;
    std::istringstream in(text);
    std::string line, current;
    while (std::getline(in, line)) {
        if (line.rfind("# table: ", 0) == 0) {
            current = line.substr(9);
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
        out[current].push_back(fields);
    }
    return out;
}

double quantity(const json& report, const std::string& table, const std::string& name) {
    for (const auto& row : report.at("tables").at(table).at("rows"))
        if (row.at(0) == name) return row.at(1).get<double>();
    FAIL("missing quantity " << table << "/" << name);
    return 0;
}

}  // namespace

TEST_CASE("mean and variance regions for the octane parameters") {
    const Run mean = run("region --preset octane --dist mean --interval 86.184,88.376 --format json");
    REQUIRE(mean.status == 0);
    const json m = json::parse(mean.out);
    CHECK_THAT(quantity(m, "region", "lower"), WithinAbs(86.037, 0.001));
    CHECK_THAT(quantity(m, "region", "upper"), WithinAbs(88.526, 0.001));
    CHECK(m.at("config").at("schema_version") == 1);
    CHECK(m.at("config").at("command") == "region");

    const Run var = run("region --config " + data("octane_region.json") + " --format json");
    REQUIRE(var.status == 0);
    const json v = json::parse(var.out);
    CHECK_THAT(quantity(v, "region", "lower"), WithinAbs(10.8, 0.108));
    CHECK_THAT(quantity(v, "region", "upper"), WithinAbs(336.5, 3.365));
    CHECK_THAT(quantity(v, "region", "s2_lower"), WithinAbs(0.368, 0.001));
    CHECK_THAT(quantity(v, "region", "s2_upper"), WithinAbs(11.46, 0.01));
}

TEST_CASE("power table and fit") {
    const Run p = run("power-table --nu 10 --delta 0,9 --lambda 1,9 --cross-check");
    REQUIRE(p.status == 0);
    const auto t = parse_csv(p.out).at("power");
    REQUIRE(t.size() == 5);
    CHECK(t[0] == std::vector<std::string>{"delta", "lambda", "critical", "nonrejection", "rejection",
                                           "nonrejection_signed"});
    CHECK_THAT(std::stod(t[3][3]), WithinAbs(0.329, 0.005));
    CHECK_THAT(std::stod(t[4][3]), WithinAbs(0.799, 0.005));
    CHECK_THAT(std::stod(t[1][2]), WithinAbs(4.9646, 1e-4));

    const Run f = run("fit --input " + data("octane.csv") + " --format json");
    REQUIRE(f.status == 0);
    const json j = json::parse(f.out);
    CHECK_THAT(quantity(j, "fit", "beta0_hat"), WithinAbs(87.1, 1e-9));
    CHECK_THAT(quantity(j, "fit", "beta1_hat"), WithinAbs(1.1273, 1e-4));
    CHECK_THAT(quantity(j, "fit", "sigmaU_hat"), WithinAbs(0.7395, 1e-4));
}

TEST_CASE("exit codes") {
    const Run usage = run("region --dist nope");
    CHECK(usage.status == 1);
    CHECK(run("no-such-command").status == 1);
    CHECK(run("").status == 1);
    const Run invalid = run("region --preset unit --coverage 1.5");
    CHECK(invalid.status == 1);
    CHECK_THAT(invalid.err, ContainsSubstring("coverage"));

    const Run parse = run("fit --input " + data("malformed.csv"));
    CHECK(parse.status == 2);
    CHECK_THAT(parse.err, ContainsSubstring("row 4: column 'u'"));
    const Run field = run("region --config " + data("bad_field.json"));
    CHECK(field.status == 2);
    CHECK_THAT(field.err, ContainsSubstring("unknown field /params/slope"));
    CHECK(run("region --config /nonexistent.json").status == 2);

    const fs::path cfg = fs::temp_directory_path() / "calib_cli_accuracy.json";
    std::ofstream(cfg) << R"({"schema_version":1,"quad":{"max_intervals":10,"abs_tol":1e-15,"rel_tol":1e-15},)"
                       << R"("args":{"dist":"mean"}})";
    const Run acc = run("region --config " + cfg.string());
    CHECK(acc.status == 3);
    CHECK_THAT(acc.err, ContainsSubstring("did not converge"));
}

TEST_CASE("flags override config values and say so") {
    const Run r = run("region --config " + data("octane_region.json") + " --coverage 0.9 --format json");
    REQUIRE(r.status == 0);
    CHECK_THAT(r.err, ContainsSubstring("--coverage = 0.9 overrides config value 0.95"));
    CHECK(json::parse(r.out).at("config").at("args").at("coverage") == 0.9);
}

TEST_CASE("CSV and JSON carry the same tables") {
    const std::vector<std::string> commands{"moments --preset octane", "anova --input " + data("groups.csv"),
                                            "simulate --preset unit --replications 3000 --statistic functionals"};
    for (const std::string& args : commands) {
        const Run c = run(args);
        const Run j = run(args + " --format json");
        REQUIRE(c.status == 0);
        REQUIRE(j.status == 0);
        const auto csv = parse_csv(c.out);
        const json rep = json::parse(j.out);
        CHECK(rep.at("tables").size() == csv.size());
        for (const auto& [name, rows] : csv) {
            const json& t = rep.at("tables").at(name);
            CHECK(t.at("columns").size() == rows.front().size());
            REQUIRE(t.at("rows").size() == rows.size() - 1);
            for (std::size_t i = 1; i < rows.size(); ++i)
                for (std::size_t k = 0; k < rows[i].size(); ++k) {
                    const json& cell = t.at("rows").at(i - 1).at(k);
                    if (cell.is_number())
                        CHECK(cell.get<double>() == std::stod(rows[i][k]));
                    else if (cell.is_boolean())
                        CHECK((cell.get<bool>() ? "true" : "false") == rows[i][k]);
                    else
                        CHECK(cell.get<std::string>() == rows[i][k]);
                }
        }
    }
}

TEST_CASE("reruns are byte-identical and written files match standard output") {
    const std::string args = "simulate --preset octane --replications 4000 --statistic tsq --mu0 86.5";
    const Run a = run(args), b = run(args + " --workers 3");
    REQUIRE(a.status == 0);
    // the worker count is echoed in the config, so compare everything after it
    CHECK(a.out.substr(a.out.find("# table:")) == b.out.substr(b.out.find("# table:")));
    CHECK(run(args).out == a.out);

    const fs::path out = fs::temp_directory_path() / "calib_cli_out.json";
    const Run w = run("case-study --format json --output " + out.string());
    REQUIRE(w.status == 0);
    CHECK(w.out.empty());
    const Run s = run("case-study --format json");
    CHECK(slurp(out) == s.out);
    const json cs = json::parse(s.out);
    CHECK_THAT(quantity(cs, "operating_characteristic", "nonrejection"), WithinAbs(0.90, 0.005));
}
