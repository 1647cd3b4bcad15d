#pragma once

// Run configuration: every command starts from a tree of defaults, then
// applies a named parameter preset, then a JSON config file, then command-line
// flags. Flags win over the file and each such override is logged to stderr.
// The file may only contain keys present in the defaults tree.

#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "calib/errors.hpp"
#include "calib/mixtures.hpp"
#include "calib/model.hpp"
#include "calib/simulate.hpp"

namespace calib::cli {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

/// Printed octane parameters used by the case study and the `octane` preset.
inline json octane_params() {
    return {{"n", 11},          {"beta0", 87.2818}, {"sigma0", 0.1846}, {"muZ", 0.0},
            {"sigmaZ", 1.0},    {"beta1", 1.8546},  {"sigma1", 0.5837}, {"known", false}};
}

inline json unit_params() {
    return {{"n", 10},       {"beta0", 1.0}, {"sigma0", 1.0}, {"muZ", 1.0},
            {"sigmaZ", 1.0}, {"beta1", 1.0}, {"sigma1", 1.0}, {"known", false}};
}

inline json quad_defaults() {
    const QuadSpec q;
    return {{"abs_tol", q.abs_tol},
            {"rel_tol", q.rel_tol},
            {"mixing_range_sigmas", q.mixing_range_sigmas},
            {"mixing_tail", q.mixing_tail},
            {"series_terms_outer", q.series_terms_outer},
            {"series_terms_inner", q.series_terms_inner},
            {"series_terms_signed", q.series_terms_signed},
            {"max_series_terms", q.max_series_terms},
            {"max_intervals", q.max_intervals}};
}

inline json mc_defaults() {
    const mc::McConfig c;
    return {{"replications", c.replications},
            {"seed", c.seed},
            {"mode", "coefficient"},
            {"design_x", json::array()},
            {"sigmaU", 1.0},
            {"workers", c.workers},
            {"block_size", c.block_size}};
}

/// A config file that does not fit the schema.
class config_error : public parse_error {
public:
    explicit config_error(const std::string& what) : parse_error("config: " + what, 0) {}
};

namespace detail {

// Null defaults mark optional settings and accept any value; the command
// checks those when it reads them.
inline void check_against(const json& def, const json& given, const std::string& path) {
    if (def.is_null()) return;
    if (def.is_object()) {
        if (!given.is_object()) throw config_error(path + " must be an object");
        for (auto it = given.begin(); it != given.end(); ++it) {
            if (!def.contains(it.key())) throw config_error("unknown field " + path + "/" + it.key());
            check_against(def[it.key()], it.value(), path + "/" + it.key());
        }
        return;
    }
    const bool ok = (def.is_number() && given.is_number()) || (def.is_string() && given.is_string()) ||
                    (def.is_boolean() && given.is_boolean()) || (def.is_array() && given.is_array());
    if (!ok) throw config_error(path + " has the wrong type");
}

inline void merge_into(json& target, const json& given) {
    for (auto it = given.begin(); it != given.end(); ++it) {
        if (it.value().is_object() && target.contains(it.key()) && target[it.key()].is_object())
            merge_into(target[it.key()], it.value());
        else
            target[it.key()] = it.value();
    }
}

}  // namespace detail

/// Defaults, flag bindings and resolution for one subcommand.
class CommandConfig {
public:
    CommandConfig(CLI::App* app, std::string name, json defaults)
        : app_(app), name_(std::move(name)), defaults_(std::move(defaults)) {
        app_->add_option("--config", config_path_, "JSON config file (schema_version " +
                                                       std::to_string(schema_version) + ")");
        if (defaults_.contains("params"))
            app_->add_option("--preset", preset_, "parameter preset: unit or octane")
                ->check(CLI::IsMember({"unit", "octane"}));
    }

    /// Binds --flag to the config entry at `path` (a JSON pointer).
    template <class T>
    CLI::Option* bind(const std::string& flag, const std::string& path, const std::string& help) {
        auto holder = std::make_shared<T>();
        CLI::Option* opt = app_->add_option(flag, *holder, help);
        if constexpr (requires { holder->begin(); } && !std::is_same_v<T, std::string>) opt->delimiter(',');
        bindings_.push_back({opt, json::json_pointer(path), [holder] { return json(*holder); }});
        return opt;
    }

    CLI::Option* bind_flag(const std::string& flag, const std::string& path, const std::string& help) {
        auto holder = std::make_shared<bool>(false);
        CLI::Option* opt = app_->add_flag(flag, *holder, help);
        bindings_.push_back({opt, json::json_pointer(path), [holder] { return json(*holder); }});
        return opt;
    }

    void bind_params() {
        for (const char* k : {"n", "beta0", "sigma0", "muZ", "sigmaZ", "beta1", "sigma1"})
            bind<double>(std::string("--") + k, std::string("/params/") + k, std::string("parameter ") + k);
        bind_flag("--known", "/params/known", "calibration coefficients are known exactly");
    }

    void bind_quad() {
        bind<double>("--abs-tol", "/quad/abs_tol", "absolute quadrature tolerance");
        bind<double>("--rel-tol", "/quad/rel_tol", "relative quadrature tolerance");
    }

    void bind_mc() {
        bind<std::uint64_t>("--replications", "/mc/replications", "Monte Carlo replications");
        bind<std::uint64_t>("--seed", "/mc/seed", "64-bit seed");
        bind<std::string>("--mode", "/mc/mode", "coefficient or full-calibration")
            ->check(CLI::IsMember({"coefficient", "full-calibration"}));
        bind<std::vector<double>>("--design-x", "/mc/design_x", "calibration design settings");
        bind<double>("--sigmaU", "/mc/sigmaU", "calibration error sd (full-calibration)");
        bind<unsigned>("--workers", "/mc/workers", "worker threads (0: all cores)");
    }

    /// The fully resolved configuration.
    json resolve() const {
        json out = defaults_;
        json file = json::object();
        if (!config_path_.empty()) {
            std::ifstream in(config_path_);
            if (!in) throw config_error("cannot open '" + config_path_ + "'");
            try {
                file = json::parse(in);
            } catch (const json::parse_error& e) {
                throw config_error(std::string("invalid JSON: ") + e.what());
            }
            if (!file.is_object()) throw config_error("top level must be an object");
            if (!file.contains("schema_version") || file["schema_version"] != schema_version)
                throw config_error("schema_version must be " + std::to_string(schema_version));
            if (file.contains("command") && file["command"] != name_)
                throw config_error("file is for command '" + file["command"].dump() + "'");
            file.erase("schema_version");
            file.erase("command");
        }
        std::string preset = preset_;
        if (file.contains("preset")) {
            if (!defaults_.contains("params") || !file["preset"].is_string())
                throw config_error("preset must be a string naming unit or octane");
            const std::string fp = file["preset"];
            if (fp != "unit" && fp != "octane") throw config_error("unknown preset '" + fp + "'");
            if (!preset.empty() && preset != fp)
                std::cerr << "note: --preset " << preset << " overrides config preset " << fp << "\n";
            if (preset.empty()) preset = fp;
            file.erase("preset");
        }
        if (!preset.empty()) out["params"] = preset == "octane" ? octane_params() : unit_params();
        detail::check_against(defaults_, file, "");
        detail::merge_into(out, file);
        for (const Binding& b : bindings_) {
            if (b.option->count() == 0) continue;
            const json v = b.value();
            if (file.contains(b.path) && file.at(b.path) != v)
                std::cerr << "note: " << b.option->get_name() << " = " << v.dump()
                          << " overrides config value " << file.at(b.path).dump() << "\n";
            out[b.path] = v;
        }
        if (!preset.empty()) out["preset"] = preset;
        return out;
    }

    const std::string& name() const { return name_; }

private:
    struct Binding {
        CLI::Option* option;
        json::json_pointer path;
        std::function<json()> value;
    };

    CLI::App* app_;
    std::string name_;
    json defaults_;
    std::string config_path_;
    std::string preset_;
    std::vector<Binding> bindings_;
};

// ---- typed views of a resolved configuration ----

inline MixtureParams params_of(const json& c) {
    const json& p = c.at("params");
    MixtureParams m{p.at("n").get<double>(),      p.at("beta0").get<double>(), p.at("sigma0").get<double>(),
                    p.at("muZ").get<double>(),    p.at("sigmaZ").get<double>(), p.at("beta1").get<double>(),
                    p.at("sigma1").get<double>(), p.at("known").get<bool>()};
    if (m.known) {
        m.sigma0 = 0;
        m.sigma1 = 0;
    }
    m.validate();
    return m;
}

inline QuadSpec quad_of(const json& c) {
    const json& q = c.at("quad");
    QuadSpec s;
    s.abs_tol = q.at("abs_tol");
    s.rel_tol = q.at("rel_tol");
    s.mixing_range_sigmas = q.at("mixing_range_sigmas");
    s.mixing_tail = q.at("mixing_tail");
    s.series_terms_outer = q.at("series_terms_outer");
    s.series_terms_inner = q.at("series_terms_inner");
    s.series_terms_signed = q.at("series_terms_signed");
    s.max_series_terms = q.at("max_series_terms");
    s.max_intervals = q.at("max_intervals");
    s.validate();
    return s;
}

inline mc::McConfig mc_of(const json& c) {
    const json& m = c.at("mc");
    mc::McConfig cfg;
    cfg.replications = m.at("replications");
    cfg.seed = m.at("seed");
    const std::string mode = m.at("mode");
    if (mode == "coefficient") {
        cfg.mode = mc::SamplingMode::coefficient_level;
    } else if (mode == "full-calibration") {
        cfg.mode = mc::SamplingMode::full_calibration;
        cfg.design = mc::CalibrationDesign{m.at("design_x").get<std::vector<double>>(), m.at("sigmaU")};
    } else {
        throw invalid_argument("mc mode must be coefficient or full-calibration");
    }
    cfg.workers = m.at("workers");
    cfg.block_size = m.at("block_size");
    cfg.validate();
    return cfg;
}

inline std::optional<double> optional_number(const json& c, const char* key) {
    const json& v = c.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) throw config_error(std::string(key) + " must be a number");
    return v.get<double>();
}

}  // namespace calib::cli
