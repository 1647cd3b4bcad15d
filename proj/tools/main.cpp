// calib: command-line front end for the calibration toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 input or parse error,
// 3 numerical accuracy failure.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "calib/diagnostics.hpp"
#include "calib/errors.hpp"
#include "calib/io.hpp"
#include "calib/mixtures.hpp"
#include "calib/model.hpp"
#include "calib/moments.hpp"
#include "calib/oneway.hpp"
#include "calib/power.hpp"
#include "calib/simulate.hpp"
#include "calib/special.hpp"
#include "config.hpp"
#include "report.hpp"

namespace calib::cli {
namespace {

// ---- laws selected by --dist ----

struct Law {
    std::unique_ptr<MixtureDistribution> dist;
    Quantities info{"law"};
    std::optional<double> s2_per_unit;  ///< S² per unit of νS²/(σ1²σZ²), when known
};

Law law_of(const json& c) {
    const json& a = c.at("args");
    const std::string kind = a.at("dist");
    const QuadSpec q = quad_of(c);
    const MixtureParams p = params_of(c);
    const DerivedParams d = derive_params(p, optional_number(a, "mu0"));
    Law law;
    law.info.add("dist", kind);
    if (kind == "mean") {
        law.dist = std::make_unique<MeanMixture>(p, q);
        law.info.add("mean", d.muY).add("variance", d.varYbar);
        return law;
    }
    const auto nu_flag = optional_number(a, "nu");
    const auto lambda_flag = optional_number(a, "lambda");
    const auto delta_flag = optional_number(a, "delta");
    const double nu = nu_flag.value_or(d.nu);
    if (!lambda_flag && !d.lambda) throw invalid_argument("this law needs calibration error (known is set)");
    const double lambda = lambda_flag.value_or(d.lambda.value_or(0));
    law.info.add("nu", nu).add("lambda", lambda);
    if (kind == "variance") {
        law.dist = std::make_unique<VarianceMixture>(nu, lambda, q);
        if (!nu_flag && !lambda_flag) law.s2_per_unit = p.sigma1 * p.sigma1 * p.sigmaZ * p.sigmaZ / nu;
        return law;
    }
    if (!delta_flag && !d.delta) throw invalid_argument("this law needs --delta or --mu0");
    const double delta = delta_flag.value_or(d.delta.value_or(0));
    law.info.add("delta", delta);
    if (kind == "tsq") {
        law.dist = std::make_unique<TsqMixture>(nu, delta, lambda, q);
        return law;
    }
    if (kind == "signed-t") {
        double sign = 1;
        if (!delta_flag && optional_number(a, "mu0")) sign = d.muY >= *optional_number(a, "mu0") ? 1 : -1;
        law.info.add("delta0", sign * std::sqrt(delta)).add("lambda0", std::sqrt(lambda));
        law.dist = std::make_unique<SignedTMixture>(nu, sign * std::sqrt(delta), std::sqrt(lambda), q);
        return law;
    }
    throw invalid_argument("unknown --dist '" + kind + "'");
}

json law_args() {
    return {{"dist", "mean"}, {"mu0", nullptr}, {"nu", nullptr}, {"delta", nullptr}, {"lambda", nullptr}};
}

void bind_law(CommandConfig& cc) {
    cc.bind<std::string>("--dist", "/args/dist", "law: mean, variance, tsq or signed-t")
        ->check(CLI::IsMember({"mean", "variance", "tsq", "signed-t"}));
    cc.bind<double>("--mu0", "/args/mu0", "null value of the mean (tsq, signed-t)");
    cc.bind<double>("--nu", "/args/nu", "degrees of freedom (default n - 1)");
    cc.bind<double>("--delta", "/args/delta", "noncentrality delta (default from --mu0)");
    cc.bind<double>("--lambda", "/args/lambda", "noncentrality lambda (default beta1^2/sigma1^2)");
}

Quantities params_table(const MixtureParams& p, const char* name = "params") {
    Quantities t(name);
    t.add("n", p.n).add("beta0", p.beta0).add("sigma0", p.sigma0).add("muZ", p.muZ);
    t.add("sigmaZ", p.sigmaZ).add("beta1", p.beta1).add("sigma1", p.sigma1);
    t.add("known", p.known ? "true" : "false");
    return t;
}

Quantities fit_table(const CalibrationFit& f) {
    Quantities t("fit");
    t.add("n0", static_cast<double>(f.n0)).add("xbar", f.xbar).add("sxx", f.sxx);
    t.add("beta0_hat", f.beta0_hat).add("beta1_hat", f.beta1_hat).add("sigmaU_hat", f.sigmaU_hat);
    t.add("sigma0", f.sigma0).add("sigma1", f.sigma1);
    t.add("lambda_hat", f.beta1_hat * f.beta1_hat / (f.sigma1 * f.sigma1));
    return t;
}

Quantities moments_table(const MixtureParams& p, const QuadSpec& q) {
    const MomentSummary m = mean_moments(p, q);
    const SampleVarianceExpectation e = expected_sample_variance(p);
    const DerivedParams d = derive_params(p);
    Quantities t("moments");
    t.add("mean", m.mean).add("variance", m.variance).add("skewness", m.skewness).add("kurtosis", m.kurtosis);
    t.add("quadrature_mean", m.quadrature_mean).add("quadrature_variance", m.quadrature_variance);
    t.add("variance_limit", d.shared).add("kappa2", d.kappa2);
    t.add("expected_s2", e.expected).add("var_y", e.var_y).add("s2_bias", e.bias);
    t.add("correlation", correlation_params(p).unconditional);
    if (d.lambda) t.add("lambda", *d.lambda);
    return t;
}

Table power_rows(const std::vector<PowerCell>& cells, bool cross) {
    Table t{"power", {"delta", "lambda", "critical", "nonrejection", "rejection"}, {}};
    if (cross) t.columns.push_back("nonrejection_signed");
    for (const PowerCell& c : cells) {
        std::vector<Cell> r{c.delta, c.lambda, c.critical, c.nonrejection_prob, c.rejection_prob};
        if (cross) r.push_back(*c.nonrejection_signed);
        t.row(std::move(r));
    }
    return t;
}

Quantities ks_table(const char* name, const mc::KsResult& k) {
    Quantities t(name);
    t.add("distance_lower", k.lower).add("distance_upper", k.upper).add("band", k.band);
    t.add("within_band", k.within() ? "true" : "false");
    return t;
}

// ---- commands ----

Report run_fit(const json& c) {
    const json& a = c.at("args");
    if (!a.at("input").is_string()) throw invalid_argument("fit needs --input");
    const auto data = io::read_pairs(a.at("input").get<std::string>());
    const CalibrationFit f = fit_calibration(data);
    Report r;
    r.add(fit_table(f));
    if (const auto n = optional_number(a, "n"))
        r.add(params_table(params_from_fit(f, *n, a.at("muZ"), a.at("sigmaZ"))));
    return r;
}

Report run_density(const json& c) {
    const json& a = c.at("args");
    Law law = law_of(c);
    const MixtureDistribution& d = *law.dist;
    const double from = optional_number(a, "from").value_or(d.quantile(1e-4));
    const double to = optional_number(a, "to").value_or(d.quantile(1 - 1e-4));
    const int points = a.at("points");
    if (!(from < to) || points < 2) throw invalid_argument("density grid needs from < to and points >= 2");
    Table curve{"curve", {"u", "pdf", "cdf"}, {}};
    for (int i = 0; i < points; ++i) {
        const double u = from + (to - from) * i / (points - 1);
        curve.row({u, d.pdf(u), d.cdf(u)});
    }
    Report r;
    r.add(std::move(law.info));
    r.add(std::move(curve));
    return r;
}

Report run_moments(const json& c) {
    Report r;
    const MixtureParams p = params_of(c);
    r.add(params_table(p));
    r.add(moments_table(p, quad_of(c)));
    return r;
}

Report run_region(const json& c) {
    const json& a = c.at("args");
    Law law = law_of(c);
    const ProbRegion reg = probability_region(*law.dist, a.at("coverage"));
    Quantities t("region");
    t.add("coverage", reg.coverage).add("lower", reg.lower).add("upper", reg.upper).add("achieved", reg.achieved);
    if (law.s2_per_unit) t.add("s2_lower", reg.lower * *law.s2_per_unit).add("s2_upper", reg.upper * *law.s2_per_unit);
    Report r;
    r.add(std::move(law.info));
    r.add(std::move(t));
    if (!a.at("interval").is_null()) {
        const auto iv = a.at("interval").get<std::vector<double>>();
        if (iv.size() != 2) throw invalid_argument("--interval needs two values lo,hi");
        Quantities ic("interval");
        ic.add("lower", iv[0]).add("upper", iv[1]).add("probability", interval_coverage(*law.dist, iv[0], iv[1]));
        r.add(std::move(ic));
    }
    return r;
}

Report run_power_table(const json& c) {
    const json& a = c.at("args");
    const bool cross = a.at("cross_check");
    Report r;
    r.add(power_rows(power_table(a.at("nu"), a.at("delta").get<std::vector<double>>(),
                                 a.at("lambda").get<std::vector<double>>(), a.at("alpha"), quad_of(c), cross),
                     cross));
    return r;
}

MixtureParams effective_params(const MixtureParams& p, const mc::McConfig& cfg) {
    if (cfg.mode == mc::SamplingMode::full_calibration && !p.known) return mc::params_for_design(p, *cfg.design);
    return p;
}

void dump_sample(const json& a, const std::vector<double>& v) {
    if (!a.at("dump").is_string()) return;
    std::ofstream out(a.at("dump").get<std::string>());
    if (!out) throw parse_error("cannot write '" + a.at("dump").get<std::string>() + "'", 0);
    out << "value\n";
    for (double x : v) out << format_number(x) << "\n";
}

Report run_simulate(const json& c) {
    const json& a = c.at("args");
    const mc::McConfig cfg = mc_of(c);
    const MixtureParams p = params_of(c);
    const MixtureParams pe = effective_params(p, cfg);
    const std::string stat = a.at("statistic");
    Report r;
    Quantities rng("rng");
    rng.add("generator", std::string(mc::rng_id)).add("seed", format_number(static_cast<double>(cfg.seed)));
    rng.add("replications", static_cast<double>(cfg.replications));
    r.add(std::move(rng));
    if (stat == "functionals") {
        const DerivedParams d = derive_params(pe);
        const mc::SampleFunctionals f = mc::mc_sample_functionals(p, cfg);
        Table t{"functionals", {"name", "estimate", "std_error", "theoretical", "z"}, {}};
        auto row = [&](const mc::McSummary& s, double th) {
            t.row({std::string(s.name), s.estimate, s.std_error, th, (s.estimate - th) / s.std_error});
        };
        row(f.mean_ybar, d.muY);
        row(f.var_ybar, d.varYbar);
        row(f.mean_s2, d.kappa2 * pe.sigmaZ * pe.sigmaZ);
        row(f.var_y, d.varY);
        row(f.corr_y12, correlation_params(pe).unconditional);
        r.add(std::move(t));
        return r;
    }
    if (stat == "inconsistency") {
        const auto curve = mc::mc_inconsistency_curve(p, a.at("n_grid").get<std::vector<double>>(), cfg);
        Table t{"inconsistency", {"n", "var_ybar", "std_error", "theoretical", "z"}, {}};
        for (const auto& pt : curve) {
            MixtureParams pn = pe;
            pn.n = pt.n;
            const double th = derive_params(pn).varYbar;
            t.row({pt.n, pt.var_ybar.estimate, pt.var_ybar.std_error, th, (pt.var_ybar.estimate - th) / pt.var_ybar.std_error});
        }
        r.add(std::move(t));
        return r;
    }
    const std::map<std::string, std::pair<mc::Statistic, const char*>> stats{
        {"mean", {mc::Statistic::mean, "mean"}},
        {"scaled-variance", {mc::Statistic::scaled_variance, "variance"}},
        {"tsq", {mc::Statistic::tsq, "tsq"}},
        {"signed-t", {mc::Statistic::signed_t, "signed-t"}}};
    const auto it = stats.find(stat);
    if (it == stats.end()) throw invalid_argument("unknown --statistic '" + stat + "'");
    const auto mu0 = optional_number(a, "mu0");
    const std::vector<double> sample = mc::mc_statistic_distribution(p, it->second.first, cfg, mu0);
    dump_sample(a, sample);

    json lc = c;
    lc["params"]["sigma0"] = pe.sigma0;
    lc["params"]["sigma1"] = pe.sigma1;
    lc["args"] = law_args();
    lc["args"]["dist"] = it->second.second;
    lc["args"]["mu0"] = a.at("mu0");
    Law law = law_of(lc);
    const std::size_t points = a.at("ks_points");
    const mc::KsResult ks = mc::ks_test_bracketed(sample, [&](double u) { return law.dist->cdf(u); }, points);
    mc::MomentAccumulator m;
    for (double v : sample) m.add(v);
    Quantities s("sample");
    s.add("statistic", stat).add("mean", m.mean()).add("mean_std_error", m.mean_std_error());
    s.add("variance", m.variance()).add("skewness", m.skewness()).add("kurtosis", m.kurtosis());
    r.add(std::move(law.info));
    r.add(std::move(s));
    r.add(ks_table("ks", ks));
    return r;
}

Report run_diagnose(const json& c) {
    const json& a = c.at("args");
    Report r;
    if (a.at("input").is_string()) {
        const auto y = io::read_sample(a.at("input").get<std::string>());
        const diag::DiagnosticReport d = diag::diagnose(y);
        const diag::ResidualSet rs = diag::residual_diagnostics(y);
        Quantities s("summary");
        s.add("n", static_cast<double>(y.size())).add("sample_sd", rs.sample_sd);
        s.add("von_neumann_ratio", d.von_neumann_ratio).add("shapiro_type_W", d.shapiro_type_W);
        s.add("b1", d.b1).add("b2", d.b2);
        r.add(std::move(s));
        Table pts{"points", {"index", "y", "residual", "studentized", "r_student"}, {}};
        for (std::size_t i = 0; i < y.size(); ++i)
            pts.row({static_cast<double>(i + 1), y[i], rs.residuals[i], rs.studentized[i], rs.r_student[i]});
        r.add(std::move(pts));
    }
    if (a.at("blindness").get<bool>()) {
        const diag::BlindnessReport b = diag::blindness_suite(params_of(c), mc_of(c));
        Table id{"identities", {"statistic", "max_relative_deviation"}, {}};
        id.row({"von_neumann_ratio", b.max_dev_U}).row({"shapiro_type_W", b.max_dev_W});
        id.row({"b1", b.max_dev_b1}).row({"b2", b.max_dev_b2});
        id.row({"studentized", b.max_dev_studentized}).row({"r_student", b.max_dev_r_student});
        r.add(std::move(id));
        Table ks{"blindness_ks", {"statistic", "distance", "band", "within_band"}, {}};
        for (auto [name, k] : {std::pair{"von_neumann_ratio", b.ks_U}, {"shapiro_type_W", b.ks_W},
                               {"b1", b.ks_b1}, {"b2", b.ks_b2}})
            ks.row({name, k.upper, k.band, k.within() ? "true" : "false"});
        r.add(std::move(ks));
        Quantities s("blindness");
        s.add("replications", static_cast<double>(b.replications)).add("n", static_cast<double>(b.n));
        s.add("negative_slope_draws", static_cast<double>(b.negative_slope_draws));
        s.add("identities_hold", b.identities_hold() ? "true" : "false");
        r.add(std::move(s));
    }
    if (r.tables.empty()) throw invalid_argument("diagnose needs --input and/or --blindness");
    return r;
}

Report run_anova(const json& c) {
    const json& a = c.at("args");
    const double alpha = a.at("alpha");
    Report r;
    if (a.at("input").is_string()) {
        const io::GroupedSample g = io::read_groups(a.at("input").get<std::string>());
        const oneway::AnovaDecomposition d = oneway::decompose(g.groups);
        Table groups{"groups", {"group", "n", "mean", "variance"}, {}};
        std::vector<std::size_t> sizes;
        for (std::size_t i = 0; i < g.groups.size(); ++i) {
            sizes.push_back(g.groups[i].size());
            groups.row({g.labels[i], static_cast<double>(g.groups[i].size()), d.group_means[i], d.group_variances[i]});
        }
        r.add(std::move(groups));
        const double df1 = static_cast<double>(d.k - 1), df2 = static_cast<double>(d.n - d.k);
        Quantities t("anova");
        t.add("ss0", d.ss0).add("ss1", d.ss1).add("ss2", d.ss2).add("total", d.total);
        t.add("df1", df1).add("df2", df2).add("f_statistic", d.f_statistic);
        t.add("p_value", 1 - special::f_cdf(d.f_statistic, df1, df2));
        t.add("critical", oneway::f_critical(df1, df2, alpha));
        r.add(std::move(t));
        const oneway::VarianceTests vt = oneway::variance_tests(d.group_variances, sizes);
        Quantities v("variance_tests");
        v.add("bartlett", vt.bartlett_stat).add("bartlett_p_value", 1 - special::chi2_cdf(vt.bartlett_stat, df1));
        v.add("cochran", vt.cochran_stat).add("hartley_fmax", vt.hartley_fmax);
        r.add(std::move(v));
    }
    const auto sizes = a.at("sizes").get<std::vector<double>>();
    if (!sizes.empty()) {
        oneway::OneWayDesign design;
        for (double s : sizes) {
            if (s < 0 || s != std::floor(s)) throw invalid_argument("--sizes must be whole numbers");
            design.sizes.push_back(static_cast<std::size_t>(s));
        }
        design.means = a.at("means").get<std::vector<double>>();
        design.sds = a.at("sds").get<std::vector<double>>();
        design.validate();
        const MixtureParams p = params_of(c);
        if (design.homoscedastic()) {
            const oneway::FPower fp = oneway::f_power(design, alpha);
            Quantities t("f_power");
            t.add("lambda_F", fp.lambda).add("df1", fp.df1).add("df2", fp.df2);
            t.add("critical", fp.critical).add("power", fp.power);
            r.add(std::move(t));
        }
        Table bias{"group_bias", {"group", "expected_s2", "var_y", "bias"}, {}};
        const auto gb = oneway::group_variance_bias(design, p);
        for (std::size_t i = 0; i < gb.size(); ++i)
            bias.row({static_cast<double>(i + 1), gb[i].expected_s2, gb[i].var_y, gb[i].bias});
        r.add(std::move(bias));
        const auto h = oneway::homoscedasticity_condition(design, p);
        Table pairs{"homoscedasticity", {"i", "j", "omega_diff", "c_times_mu_diff", "holds"}, {}};
        for (const auto& pr : h.pairs)
            pairs.row({static_cast<double>(pr.i + 1), static_cast<double>(pr.j + 1), pr.lhs, pr.rhs,
                       pr.holds ? "true" : "false"});
        r.add(std::move(pairs));
        Quantities hs("homoscedasticity_summary");
        hs.add("c", h.c).add("holds", h.holds ? "true" : "false");
        r.add(std::move(hs));
        if (a.at("simulate").get<bool>()) {
            const oneway::OneWayMcReport m = oneway::mc_oneway(design, p, mc_of(c), alpha);
            Quantities s("oneway_mc");
            s.add("replications", static_cast<double>(m.replications));
            s.add("max_f_deviation", m.max_f_deviation).add("rejection_rate", m.rejection_rate);
            if (m.ks_f) s.add("ks_f_upper", m.ks_f->upper).add("ks_f_band", m.ks_f->band);
            s.add("ks_bartlett", m.ks_bartlett.upper).add("ks_cochran", m.ks_cochran.upper);
            s.add("ks_hartley", m.ks_hartley.upper).add("ks_two_sample_band", m.ks_bartlett.band);
            r.add(std::move(s));
            Table g{"oneway_mc_groups", {"group", "mean_s2", "mean_s2_se", "var_y", "var_y_se"}, {}};
            for (std::size_t i = 0; i < m.mean_s2.size(); ++i)
                g.row({static_cast<double>(i + 1), m.mean_s2[i].estimate, m.mean_s2[i].std_error,
                       m.var_y[i].estimate, m.var_y[i].std_error});
            r.add(std::move(g));
        }
    }
    if (r.tables.empty()) throw invalid_argument("anova needs --input and/or a design (--sizes, --means, --sds)");
    return r;
}

// Percent purity (x) and octane number (u) of eleven production runs.
const std::vector<CalibrationPair> octane_data{
    {99.8, 88.6}, {99.7, 86.4}, {99.6, 87.2}, {99.5, 88.4}, {99.4, 87.2}, {99.3, 86.8},
    {99.2, 86.1}, {99.1, 87.3}, {99.0, 86.4}, {98.9, 86.6}, {98.8, 87.1}};

Report run_case_study(const json& c) {
    const json& a = c.at("args");
    const QuadSpec q = quad_of(c);
    const MixtureParams p = params_of(c);
    const double coverage = a.at("coverage"), alpha = a.at("alpha");
    const DerivedParams d = derive_params(p);
    Report r;

    // the fit of the embedded data, and the printed parameters used below
    r.add(fit_table(fit_calibration(octane_data)));
    r.add(params_table(p));
    r.add(moments_table(p, q));

    const MeanMixture mean_law(p, q);
    const ProbRegion mreg = probability_region(mean_law, coverage);
    const double z = special::normal_quantile(0.5 + 0.5 * coverage);
    const double half = z * std::abs(p.beta1) * p.sigmaZ / std::sqrt(p.n);
    Quantities mt("mean_region");
    mt.add("coverage", coverage).add("lower", mreg.lower).add("upper", mreg.upper);
    mt.add("naive_lower", d.muY - half).add("naive_upper", d.muY + half);
    mt.add("naive_coverage", mean_law.probability(d.muY - half, d.muY + half));
    r.add(std::move(mt));

    // νS²/(σ1²σZ²) ~ variance mixture; the naive interval treats β̂1 as fixed
    const VarianceMixture var_law(d.nu, *d.lambda, q);
    const ProbRegion vreg = probability_region(var_law, coverage);
    const double per_unit = p.sigma1 * p.sigma1 * p.sigmaZ * p.sigmaZ / d.nu;
    const double chi_lo = quad::invert_increasing([&](double x) { return special::chi2_cdf(x, d.nu); },
                                                  0.5 - 0.5 * coverage, 0.0, d.nu, 1e-12, 0.0);
    const double chi_hi = quad::invert_increasing([&](double x) { return special::chi2_cdf(x, d.nu); },
                                                  0.5 + 0.5 * coverage, 0.0, d.nu, 1e-12, 0.0);
    const double naive_per_chi = p.beta1 * p.beta1 * p.sigmaZ * p.sigmaZ / d.nu;
    Quantities vt("variance_region");
    vt.add("expected_s2", expected_sample_variance(p).expected);
    vt.add("expected_scaled", var_law.mean());
    vt.add("scaled_lower", vreg.lower).add("scaled_upper", vreg.upper);
    vt.add("s2_lower", vreg.lower * per_unit).add("s2_upper", vreg.upper * per_unit);
    vt.add("naive_s2_lower", chi_lo * naive_per_chi).add("naive_s2_upper", chi_hi * naive_per_chi);
    vt.add("naive_coverage", var_law.probability(chi_lo * naive_per_chi / per_unit, chi_hi * naive_per_chi / per_unit));
    r.add(std::move(vt));

    // power at a unit squared shift of the mean
    const double shift2 = a.at("mean_shift_squared");
    const double delta = shift2 / (p.sigma1 * p.sigma1 * p.sigmaZ * p.sigmaZ);
    const PowerCell oc = operating_characteristics(d.nu, delta, *d.lambda, alpha, q, true);
    Quantities ot("operating_characteristic");
    ot.add("nu", d.nu).add("delta", delta).add("lambda", *d.lambda).add("alpha", alpha);
    ot.add("critical", oc.critical).add("nonrejection", oc.nonrejection_prob).add("rejection", oc.rejection_prob);
    ot.add("nonrejection_signed", *oc.nonrejection_signed);
    r.add(std::move(ot));

    r.add(power_rows(power_table(d.nu, {0, 1, 4, 9}, {1, 4, 9}, alpha, q, true), true));
    return r;
}

json with_sections(json args, bool params, bool quad, bool mc) {
    json out = json::object();
    if (params) out["params"] = unit_params();
    if (quad) out["quad"] = quad_defaults();
    if (mc) out["mc"] = mc_defaults();
    out["args"] = std::move(args);
    return out;
}

struct Command {
    std::unique_ptr<CommandConfig> config;
    Report (*run)(const json&);
};

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Calibration-error toolkit: mixture laws, regions, power and simulation", "calib"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string format = "csv", output;
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--output", output, "output file (default: standard output)");

    std::vector<Command> commands;
    auto add = [&](const char* name, const char* help, json defaults, Report (*fn)(const json&)) -> CommandConfig& {
        CLI::App* sub = app.add_subcommand(name, help);
        commands.push_back({std::make_unique<CommandConfig>(sub, name, std::move(defaults)), fn});
        return *commands.back().config;
    };

    {
        auto& cc = add("fit", "least-squares calibration fit of an x,u CSV file",
                       with_sections({{"input", nullptr}, {"n", nullptr}, {"muZ", 0.0}, {"sigmaZ", 1.0}}, false,
                                     false, false),
                       run_fit);
        cc.bind<std::string>("--input", "/args/input", "CSV with header x,u");
        cc.bind<double>("--n", "/args/n", "sample size for the derived parameter bundle");
        cc.bind<double>("--muZ", "/args/muZ", "mean of future readings");
        cc.bind<double>("--sigmaZ", "/args/sigmaZ", "sd of future readings");
    }
    {
        json args = law_args();
        args["from"] = nullptr;
        args["to"] = nullptr;
        args["points"] = 101;
        auto& cc = add("density", "pdf and cdf of a mixture law on a grid", with_sections(args, true, true, false),
                       run_density);
        cc.bind_params();
        cc.bind_quad();
        bind_law(cc);
        cc.bind<double>("--from", "/args/from", "grid start (default: 1e-4 quantile)");
        cc.bind<double>("--to", "/args/to", "grid end (default: 1 - 1e-4 quantile)");
        cc.bind<int>("--points", "/args/points", "grid points");
    }
    {
        auto& cc = add("moments", "moments of the calibrated sample mean and E(S^2)",
                       with_sections(json::object(), true, true, false), run_moments);
        cc.bind_params();
        cc.bind_quad();
    }
    {
        json args = law_args();
        args["coverage"] = 0.95;
        args["interval"] = nullptr;
        auto& cc = add("region", "equal-tail probability region of a mixture law",
                       with_sections(args, true, true, false), run_region);
        cc.bind_params();
        cc.bind_quad();
        bind_law(cc);
        cc.bind<double>("--coverage", "/args/coverage", "probability content");
        cc.bind<std::vector<double>>("--interval", "/args/interval", "lo,hi: also report its probability");
    }
    {
        json args{{"nu", 10.0}, {"delta", {0.0, 1.0, 4.0, 9.0}}, {"lambda", {1.0, 4.0, 9.0}}, {"alpha", 0.05},
                  {"cross_check", false}};
        auto& cc = add("power-table", "nonrejection probabilities of the t-squared test",
                       with_sections(args, false, true, false), run_power_table);
        cc.bind_quad();
        cc.bind<double>("--nu", "/args/nu", "degrees of freedom");
        cc.bind<std::vector<double>>("--delta", "/args/delta", "delta values");
        cc.bind<std::vector<double>>("--lambda", "/args/lambda", "lambda values");
        cc.bind<double>("--alpha", "/args/alpha", "test level");
        cc.bind_flag("--cross-check", "/args/cross_check", "also integrate the signed-t law");
    }
    {
        json args{{"statistic", "scaled-variance"}, {"mu0", nullptr}, {"n_grid", {10.0, 100.0, 10000.0}},
                  {"ks_points", 400}, {"dump", nullptr}};
        auto& cc = add("simulate", "Monte Carlo checks against the exact laws", with_sections(args, true, true, true),
                       run_simulate);
        cc.bind_params();
        cc.bind_quad();
        cc.bind_mc();
        cc.bind<std::string>("--statistic", "/args/statistic",
                             "mean, scaled-variance, tsq, signed-t, functionals or inconsistency")
            ->check(CLI::IsMember({"mean", "scaled-variance", "tsq", "signed-t", "functionals", "inconsistency"}));
        cc.bind<double>("--mu0", "/args/mu0", "null value of the mean (tsq, signed-t)");
        cc.bind<std::vector<double>>("--n-grid", "/args/n_grid", "sample sizes for the inconsistency curve");
        cc.bind<int>("--ks-points", "/args/ks_points", "cdf evaluations used to bracket the KS distance");
        cc.bind<std::string>("--dump", "/args/dump", "write the sorted sample to this CSV file");
    }
    {
        auto& cc = add("diagnose", "residual diagnostics of a y CSV file, or the blindness experiment",
                       with_sections({{"input", nullptr}, {"blindness", false}}, true, false, true), run_diagnose);
        cc.bind_params();
        cc.bind_mc();
        cc.bind<std::string>("--input", "/args/input", "CSV with header y");
        cc.bind_flag("--blindness", "/args/blindness", "compare diagnostics on Y and Z by simulation");
    }
    {
        json args{{"input", nullptr}, {"alpha", 0.05},      {"sizes", json::array()},
                  {"means", json::array()}, {"sds", json::array()}, {"simulate", false}};
        auto& cc = add("anova", "one-way analysis of a group,y CSV file, or of a design",
                       with_sections(args, true, false, true), run_anova);
        cc.bind_params();
        cc.bind_mc();
        cc.bind<std::string>("--input", "/args/input", "CSV with header group,y");
        cc.bind<double>("--alpha", "/args/alpha", "test level");
        cc.bind<std::vector<double>>("--sizes", "/args/sizes", "group sizes");
        cc.bind<std::vector<double>>("--means", "/args/means", "group means of the raw readings");
        cc.bind<std::vector<double>>("--sds", "/args/sds", "group sds of the raw readings");
        cc.bind_flag("--simulate", "/args/simulate", "Monte Carlo check of the design");
    }
    {
        json d = with_sections({{"coverage", 0.95}, {"alpha", 0.05}, {"mean_shift_squared", 1.0}}, true, true, false);
        d["params"] = octane_params();
        auto& cc = add("case-study", "octane calibration example end to end", d, run_case_study);
        cc.bind_params();
        cc.bind_quad();
        cc.bind<double>("--coverage", "/args/coverage", "probability content of the regions");
        cc.bind<double>("--alpha", "/args/alpha", "test level");
        cc.bind<double>("--mean-shift-squared", "/args/mean_shift_squared", "(muY - muY0)^2 for the power");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        for (const Command& cmd : commands) {
            if (!app.got_subcommand(cmd.config->name())) continue;
            json resolved = cmd.config->resolve();
            Report rep;
            try {
                rep = cmd.run(resolved);
            } catch (const json::exception& e) {
                throw config_error(e.what());
            }
            rep.command = cmd.config->name();
            json echo{{"schema_version", schema_version}, {"command", rep.command}};
            for (auto it = resolved.begin(); it != resolved.end(); ++it) echo[it.key()] = it.value();
            rep.config = std::move(echo);
            std::ostringstream os;
            if (format == "json")
                write_json(os, rep);
            else
                write_csv(os, rep);
            if (output.empty()) {
                std::cout << os.str();
            } else {
                std::ofstream out(output, std::ios::binary);
                if (!out) throw parse_error("cannot write '" + output + "'", 0);
                out << os.str();
            }
        }
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const accuracy_error& e) {
        std::cerr << "error: numerical accuracy: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace calib::cli

int main(int argc, char** argv) { return calib::cli::run(argc, argv); }
