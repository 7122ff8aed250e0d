#pragma once

// Command-line front end. Kept in a header so tests can drive run_cli in-process.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmtlab/cauchy.hpp"
#include "rmtlab/contour.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/functions.hpp"
#include "rmtlab/montecarlo.hpp"

namespace rmtlab::cli {

inline constexpr const char* tool_version = "0.1.0";

using json = nlohmann::ordered_json;
using Settings = std::map<std::string, std::string>;

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

inline std::string normalize_key(std::string key)
{
    key = detail::trim(key);
    for (char& c : key) {
        if (c == '-') c = '_';
    }
    return key;
}

/// Flat `key = value` file; `#` starts a comment.
inline Settings read_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::config_error, "cannot open config file '" + path.string() + "'");
    }
    Settings out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::config_error, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        out[normalize_key(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& text)
{
    const std::string s = detail::trim(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        throw Error(Errc::config_error, "invalid number for '" + key + "': '" + text + "'");
    }
    return v;
}

inline long long parse_integer(const std::string& key, const std::string& text)
{
    const std::string s = detail::trim(text);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        throw Error(Errc::config_error, "invalid integer for '" + key + "': '" + text + "'");
    }
    return v;
}

inline std::uint64_t parse_seed(const std::string& text)
{
    const std::string s = detail::trim(text);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 0);
    if (s.empty() || s.front() == '-' || end != s.c_str() + s.size() || errno == ERANGE) {
        throw Error(Errc::config_error, "invalid seed '" + text + "'");
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
    const std::string s = detail::trim(text);
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw Error(Errc::config_error, "invalid boolean for '" + key + "': '" + text + "'");
}

/// Accepts "a", "bi", "a+bi", "a-bi", "i", "-i" (j also accepted for the imaginary unit).
inline cplx parse_complex(const std::string& text)
{
    std::string s;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    }
    if (s.empty()) throw Error(Errc::config_error, "empty complex number");
    const auto bad = [&] { return Error(Errc::config_error, "invalid complex number '" + text + "'"); };
    if (s.back() != 'i' && s.back() != 'j') {
        return {parse_double("z", s), 0.0};
    }
    s.pop_back();
    std::size_t split = std::string::npos;
    for (std::size_t k = s.size(); k-- > 1;) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    const std::string re_part = split == std::string::npos ? "" : s.substr(0, split);
    std::string im_part = split == std::string::npos ? s : s.substr(split);
    if (im_part.empty() || im_part == "+") im_part = "1";
    if (im_part == "-") im_part = "-1";
    try {
        return {re_part.empty() ? 0.0 : parse_double("z", re_part), parse_double("z", im_part)};
    } catch (const Error&) {
        throw bad();
    }
}

inline std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',' || c == ';') {
            if (!detail::trim(cur).empty()) out.push_back(detail::trim(cur));
            cur.clear();
        } else if (c != '[' && c != ']') {
            cur.push_back(c);
        }
    }
    if (!detail::trim(cur).empty()) out.push_back(detail::trim(cur));
    return out;
}

inline std::vector<cplx> parse_complex_list(const std::string& text)
{
    std::vector<cplx> out;
    for (const auto& item : split_list(text)) out.push_back(parse_complex(item));
    return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& text)
{
    std::vector<int> out;
    for (const auto& item : split_list(text)) out.push_back(static_cast<int>(parse_integer(key, item)));
    return out;
}

inline std::string format_double(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_complex(cplx z)
{
    std::ostringstream os;
    os << format_double(z.real()) << (z.imag() < 0 ? "-" : "+") << format_double(std::abs(z.imag())) << "i";
    return os.str();
}

inline std::string utc_timestamp()
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Settings -> configs
// ---------------------------------------------------------------------------

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(Errc::config_error, what) {}
};

inline const std::string* lookup(const Settings& s, const std::string& key)
{
    const auto it = s.find(key);
    return it == s.end() ? nullptr : &it->second;
}

inline std::uint64_t resolve_seed(const Settings& s)
{
    if (const auto* v = lookup(s, "seed")) return parse_seed(*v);
    if (const char* env = std::getenv("RMTLAB_SEED"); env && *env) return parse_seed(env);
    return 1;
}

inline ModelConfig model_config(const Settings& s, bool require_n = true)
{
    ModelConfig cfg;
    if (const auto* v = lookup(s, "n")) {
        cfg.n = static_cast<int>(parse_integer("n", *v));
    } else if (require_n) {
        throw UsageError("--n is required (flag or config file)");
    }
    if (const auto* v = lookup(s, "beta")) cfg.beta = parse_double("beta", *v);
    if (const auto* v = lookup(s, "scale")) cfg.scale = parse_double("scale", *v);
    if (const auto* v = lookup(s, "p")) cfg.p = static_cast<int>(parse_integer("p", *v));
    if (const auto* v = lookup(s, "q_factor")) cfg.q_factor = static_cast<int>(parse_integer("q_factor", *v));
    if (const auto* v = lookup(s, "m_factor")) cfg.m_factor = static_cast<int>(parse_integer("m_factor", *v));
    if (const auto* v = lookup(s, "gamma_kind")) cfg.gamma_kind = parse_gamma_kind(*v);
    if (const auto* v = lookup(s, "u_kind")) cfg.u_kind = parse_u_kind(*v);
    if (const auto* v = lookup(s, "dist")) cfg.dist = parse_distribution(*v);
    if (const auto* v = lookup(s, "mu_mode")) {
        const std::string mode = detail::trim(*v);
        if (mode == "zero") {
            cfg.mu_mode = MuMode::zero;
        } else if (mode.rfind("constant:", 0) == 0) {
            cfg.mu_mode = MuMode::constant;
            cfg.mu_value = parse_double("mu_mode", mode.substr(9));
        } else {
            throw Error(Errc::config_error, "mu_mode must be zero or constant:<value>");
        }
    }
    cfg.seed = resolve_seed(s);
    return cfg;
}

inline ContourConfig contour_config(const Settings& s)
{
    ContourConfig c;
    if (const auto* v = lookup(s, "delta")) c.delta = parse_double("delta", *v);
    if (const auto* v = lookup(s, "v0")) c.v0 = parse_double("v0", *v);
    if (const auto* v = lookup(s, "nq")) c.nq = static_cast<int>(parse_integer("nq", *v));
    if (const auto* v = lookup(s, "vartheta")) c.vartheta = parse_double("vartheta", *v);
    return c;
}

inline EntryHook parse_hook(const std::string& name)
{
    const std::string s = detail::trim(name);
    if (s == "none") return EntryHook::none;
    if (s == "zero") return EntryHook::zero;
    if (s == "identity_design" || s == "identity") return EntryHook::identity_design;
    throw Error(Errc::config_error, "unknown hook '" + name + "'");
}

inline ExperimentConfig experiment_config(const Settings& s)
{
    ExperimentConfig cfg;
    cfg.model = model_config(s);
    if (const auto* v = lookup(s, "f")) cfg.f = *v;
    if (const auto* v = lookup(s, "g")) cfg.g = *v;
    if (const auto* v = lookup(s, "reps")) cfg.reps = static_cast<int>(parse_integer("reps", *v));
    if (const auto* v = lookup(s, "z")) cfg.z_points = parse_complex_list(*v);
    cfg.contour = contour_config(s);
    if (const auto* v = lookup(s, "truncation")) cfg.truncation = parse_truncation_mode(*v);
    if (const auto* v = lookup(s, "resample_degenerate")) cfg.resample_degenerate = parse_bool("resample_degenerate", *v);
    if (const auto* v = lookup(s, "threads")) cfg.threads = static_cast<int>(parse_integer("threads", *v));
    if (const auto* v = lookup(s, "hook")) cfg.hook = parse_hook(*v);
    if (cfg.threads < 0) throw Error(Errc::config_error, "threads must be >= 0");
    validate(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

class RunManifest {
public:
    RunManifest(std::filesystem::path dir, std::string command, const Settings& settings, std::uint64_t seed)
        : dir_(std::move(dir))
    {
        std::filesystem::create_directories(dir_);
        doc_["tool"] = "rmtlab";
        doc_["version"] = tool_version;
        doc_["command"] = std::move(command);
        doc_["start"] = utc_timestamp();
        doc_["master_seed"] = seed;
        doc_["config"] = settings;
        doc_["outputs"] = json::array();
        write();
    }

    std::filesystem::path add_output(const std::string& name)
    {
        doc_["outputs"].push_back(name);
        return dir_ / name;
    }

    void finish()
    {
        doc_["end"] = utc_timestamp();
        write();
    }

private:
    void write() const
    {
        std::ofstream out(dir_ / "manifest.json");
        out << doc_.dump(2) << "\n";
        if (!out) throw Error(Errc::config_error, "cannot write manifest in '" + dir_.string() + "'");
    }

    std::filesystem::path dir_;
    json doc_;
};

inline void write_per_rep_csv(const std::filesystem::path& path, const MonteCarloReport& report)
{
    std::ofstream out(path);
    out << "rep,X_n,Y_n,norm_sq,lambda_min,lambda_max";
    for (std::size_t k = 0; k < report.config.z_points.size(); ++k) out << ",Xz_re_" << k << ",Xz_im_" << k;
    out << "\n";
    for (const auto& r : report.per_rep) {
        out << r.rep << ',' << format_double(r.X_n) << ',' << format_double(r.Y_n) << ',' << format_double(r.norm_sq)
            << ',' << format_double(r.lambda_min) << ',' << format_double(r.lambda_max);
        for (const cplx& x : r.Xz) out << ',' << format_double(x.real()) << ',' << format_double(x.imag());
        out << "\n";
    }
    if (!out) throw Error(Errc::config_error, "cannot write '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const json& doc)
{
    std::ofstream out(path);
    out << doc.dump(2) << "\n";
    if (!out) throw Error(Errc::config_error, "cannot write '" + path.string() + "'");
}

inline json to_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline json to_json(const Eigen::Matrix2d& m)
{
    return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

inline json to_json(const NormalityRecord& rec)
{
    json out = json::array();
    for (const auto& d : rec.directions) {
        json item{{"direction", {d.direction[0], d.direction[1]}}, {"singular", d.singular}};
        if (!d.singular) {
            item["target_variance"] = d.target_variance;
            item["skewness"] = d.skewness;
            item["excess_kurtosis"] = d.excess_kurtosis;
            item["ks_statistic"] = d.ks_statistic;
            item["ks_pvalue"] = d.ks_pvalue;
        }
        out.push_back(item);
    }
    return out;
}

class CriteriaTable {
public:
    void range(const std::string& name, double value, double lo, double hi)
    {
        add(name, value, value >= lo && value <= hi, json{{"lo", lo}, {"hi", hi}});
    }

    void relative(const std::string& name, cplx value, cplx target, double tol)
    {
        const double err = std::abs(value - target) / std::abs(target);
        add(name, err, err <= tol, json{{"relative_error_max", tol}, {"value", to_json(value)}, {"target", to_json(target)}});
    }

    void at_most(const std::string& name, double value, double hi) { add(name, value, value <= hi, json{{"hi", hi}}); }
    void at_least(const std::string& name, double value, double lo) { add(name, value, value >= lo, json{{"lo", lo}}); }

    bool all_pass() const noexcept { return all_pass_; }
    const json& doc() const noexcept { return doc_; }

    void print(std::ostream& os) const
    {
        for (const auto& c : doc_) {
            os << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " = "
               << format_double(c["statistic"].get<double>()) << "\n";
        }
    }

private:
    void add(const std::string& name, double stat, bool pass, json bounds)
    {
        json c{{"name", name}, {"statistic", stat}, {"pass", pass}};
        c.update(bounds);
        doc_.push_back(c);
        all_pass_ = all_pass_ && pass;
    }

    json doc_ = json::array();
    bool all_pass_ = true;
};

inline json config_echo(const ExperimentConfig& cfg, const Dimensions& dims)
{
    json z = json::array();
    for (const cplx& p : cfg.z_points) z.push_back(to_json(p));
    return json{{"n", dims.n},
                {"p", dims.p},
                {"q", dims.q},
                {"m", dims.m},
                {"c_n", dims.c_n},
                {"beta", cfg.model.beta},
                {"gamma_kind", to_string(cfg.model.gamma_kind)},
                {"u_kind", to_string(cfg.model.u_kind)},
                {"dist", to_string(cfg.model.dist.kind)},
                {"seed", cfg.model.seed},
                {"reps", cfg.reps},
                {"f", cfg.f},
                {"g", cfg.g},
                {"z", z},
                {"contour", {{"delta", cfg.contour.delta}, {"v0", cfg.contour.v0}, {"nq", cfg.contour.nq},
                             {"vartheta", cfg.contour.vartheta}}},
                {"truncation", to_string(cfg.truncation)},
                {"threads", cfg.threads}};
}

/// Resolvent-mean checks are only meaningful where the spectrum cannot reach z.
inline bool resolvent_checkable(cplx z) noexcept { return std::abs(z.imag()) >= 0.5 || (z.imag() == 0.0 && z.real() <= 0.0); }

inline json clt_report_json(const MonteCarloReport& report, CriteriaTable& criteria)
{
    const auto fg = make_function_pair(parse_test_function(report.config.f), parse_outer_function(report.config.g));
    json doc;
    doc["config"] = config_echo(report.config, report.dims);
    doc["targets"] = {{"gamma1", to_json(report.gamma1_target)}};
    json kernel = json::array();
    json resolvent = json::array();
    for (std::size_t k = 0; k < report.kernel.size(); ++k) {
        const auto& pm = report.kernel[k];
        kernel.push_back({{"z", to_json(pm.z)},
                          {"target_xx", to_json(pm.target_xx)},
                          {"target_xy", to_json(pm.target_xy)},
                          {"empirical_xx", to_json(pm.empirical_xx)},
                          {"empirical_xy", to_json(pm.empirical_xy)},
                          {"mean_scaled_xx", to_json(pm.mean_scaled_xx)},
                          {"mean_scaled_xy", to_json(pm.mean_scaled_xy)}});
        const ResolventMeanCheck rc = resolvent_mean_check(report, k);
        resolvent.push_back({{"z", to_json(pm.z)},
                             {"empirical_mean", to_json(rc.empirical_mean)},
                             {"target", to_json(rc.target)},
                             {"scaled_gap", rc.scaled_gap}});
        const std::string tag = "_z" + std::to_string(k);
        criteria.relative("process_xx" + tag, pm.empirical_xx, pm.target_xx, 0.25);
        criteria.relative("process_xy" + tag, pm.empirical_xy, pm.target_xy, 0.25);
        if (resolvent_checkable(pm.z)) criteria.at_most("resolvent_scaled_gap" + tag, rc.scaled_gap, 0.5);
    }
    doc["kernel"] = kernel;
    doc["resolvent_mean"] = resolvent;
    doc["empirical"] = {{"mean", {report.empirical_mean(0), report.empirical_mean(1)}},
                        {"cov", to_json(report.empirical_cov)},
                        {"mean_scaled_cov", to_json(report.mean_scaled_cov)}};
    json diag;
    if (report.normality) diag["normality"] = to_json(*report.normality);
    if (report.mean_scaled_normality) diag["mean_scaled_normality"] = to_json(*report.mean_scaled_normality);
    diag["concentration"] = {{"q50", report.concentration.q50},
                             {"q95", report.concentration.q95},
                             {"q99", report.concentration.q99},
                             {"q100", report.concentration.q100}};
    diag["f2_mass_outside_0.7_1.3"] = report.f2_mass_outside_mean;
    diag["fraction_truncated"] = report.fraction_truncated_mean;
    diag["resample_count"] = report.resample_count;
    diag["wall_time_seconds"] = report.wall_time_seconds;
    doc["diagnostics"] = diag;

    const double var_y = 2.0 * fg.g_prime_at_0 * fg.g_prime_at_0;
    const double var_x = 2.0 * fg.f_at_1 * fg.f_at_1;
    const double cov_xy = 2.0 * fg.g_prime_at_0 * fg.f_at_1;
    criteria.range("Y_variance", report.empirical_cov(1, 1), 0.85 * var_y, 1.15 * var_y);
    if (report.normality && !report.normality->directions[1].singular) {
        criteria.at_least("Y_ks_pvalue", report.normality->directions[1].ks_pvalue, 0.01);
    }
    criteria.relative("X_variance", report.empirical_cov(0, 0), var_x, 0.25);
    criteria.relative("XY_covariance", report.empirical_cov(0, 1), cov_xy, 0.25);
    return doc;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommandContext {
    Settings settings;
    std::filesystem::path out_dir = "rmtlab_out";
    bool check = false;
    std::ostream* out = &std::cout;
};

inline int finish_command(RunManifest& manifest, const CriteriaTable& criteria, const CommandContext& ctx)
{
    criteria.print(*ctx.out);
    manifest.finish();
    return ctx.check && !criteria.all_pass() ? 3 : 0;
}

inline int cmd_clt(const CommandContext& ctx)
{
    const ExperimentConfig cfg = experiment_config(ctx.settings);
    RunManifest manifest(ctx.out_dir, "clt", ctx.settings, cfg.model.seed);
    const MonteCarloReport report = run_clt_experiment(cfg);
    write_per_rep_csv(manifest.add_output("per_rep.csv"), report);
    CriteriaTable criteria;
    json doc = clt_report_json(report, criteria);
    doc["criteria"] = criteria.doc();
    write_json(manifest.add_output("report.json"), doc);
    *ctx.out << "n=" << report.dims.n << " p=" << report.dims.p << " reps=" << cfg.reps << "\n"
             << "cov(X_n,Y_n) = [[" << format_double(report.empirical_cov(0, 0)) << ", "
             << format_double(report.empirical_cov(0, 1)) << "], [" << format_double(report.empirical_cov(1, 0))
             << ", " << format_double(report.empirical_cov(1, 1)) << "]]\n";
    return finish_command(manifest, criteria, ctx);
}

inline int cmd_process(const CommandContext& ctx)
{
    const ExperimentConfig cfg = experiment_config(ctx.settings);
    if (cfg.z_points.empty()) throw Error(Errc::config_error, "process needs --z");
    RunManifest manifest(ctx.out_dir, "process", ctx.settings, cfg.model.seed);
    const ProcessReport report = run_process_experiment(cfg);
    write_per_rep_csv(manifest.add_output("per_rep.csv"), report.base);
    CriteriaTable criteria;
    json doc = clt_report_json(report.base, criteria);
    json pairs = json::array();
    for (const auto& pm : report.pairs) {
        pairs.push_back({{"z1", to_json(pm.z1)},
                         {"z2", to_json(pm.z2)},
                         {"target", to_json(pm.target)},
                         {"empirical", to_json(pm.empirical)},
                         {"mean_scaled", to_json(pm.mean_scaled)}});
        criteria.relative("pair_" + std::to_string(pm.i) + "_" + std::to_string(pm.j), pm.empirical, pm.target, 0.25);
        *ctx.out << "E[X(" << format_complex(pm.z1) << ")X(" << format_complex(pm.z2)
                 << ")] = " << format_complex(pm.empirical) << "  target " << format_complex(pm.target) << "\n";
    }
    doc["pairs"] = pairs;
    doc["criteria"] = criteria.doc();
    write_json(manifest.add_output("report.json"), doc);
    return finish_command(manifest, criteria, ctx);
}

inline int cmd_eigen(const CommandContext& ctx)
{
    ExperimentConfig cfg = experiment_config(ctx.settings);
    RunManifest manifest(ctx.out_dir, "eigen", ctx.settings, cfg.model.seed);
    const MonteCarloReport report = run_clt_experiment(cfg);
    write_per_rep_csv(manifest.add_output("per_rep.csv"), report);
    const auto& c = report.concentration;
    CriteriaTable criteria;
    criteria.at_most("eigen_q99", c.q99, 0.3);
    json doc;
    doc["config"] = config_echo(cfg, report.dims);
    doc["concentration"] = {{"q50", c.q50}, {"q95", c.q95}, {"q99", c.q99}, {"q100", c.q100}};
    doc["criteria"] = criteria.doc();
    write_json(manifest.add_output("report.json"), doc);
    *ctx.out << "quantiles of max|lambda-1|: q50=" << format_double(c.q50) << " q95=" << format_double(c.q95)
             << " q99=" << format_double(c.q99) << " q100=" << format_double(c.q100) << "\n";
    return finish_command(manifest, criteria, ctx);
}

inline int cmd_scaling(const CommandContext& ctx)
{
    const Settings& s = ctx.settings;
    ModelConfig base = model_config(s, false);
    const auto* grid_text = lookup(s, "n_grid");
    if (!grid_text) throw UsageError("--n-grid is required for scaling");
    const std::vector<int> grid = parse_int_list("n_grid", *grid_text);
    const int reps = lookup(s, "reps") ? static_cast<int>(parse_integer("reps", *lookup(s, "reps"))) : 200;
    const int threads = lookup(s, "threads") ? static_cast<int>(parse_integer("threads", *lookup(s, "threads"))) : 0;
    std::vector<ScalingQuantity> quantities{ScalingQuantity::mean_norm_dev, ScalingQuantity::cross_qform,
                                            ScalingQuantity::mean_qform};
    if (const auto* q = lookup(s, "quantity"); q && detail::trim(*q) != "all") {
        quantities.clear();
        for (const auto& item : split_list(*q)) quantities.push_back(parse_scaling_quantity(item));
    }
    validate_grid(grid);
    RunManifest manifest(ctx.out_dir, "scaling", s, base.seed);
    const auto rows = scaling_table(grid, base.beta, reps, base, threads);

    std::ofstream csv(manifest.add_output("scaling.csv"));
    csv << "n,p,mean_norm_dev,cross_qform,mean_qform,se_mean_norm_dev,se_cross_qform,se_mean_qform\n";
    for (const auto& r : rows) {
        csv << r.n << ',' << r.p;
        for (double v : r.second_moment) csv << ',' << format_double(v);
        for (double v : r.std_error) csv << ',' << format_double(v);
        csv << "\n";
    }
    csv.close();

    CriteriaTable criteria;
    json fits = json::array();
    for (ScalingQuantity q : quantities) {
        const ScalingResult fit = fit_scaling_exponent(q, rows, base.beta);
        fits.push_back({{"quantity", to_string(q)},
                        {"slope", fit.slope},
                        {"intercept", fit.intercept},
                        {"r2", fit.r2},
                        {"expected_slope", fit.expected_slope}});
        criteria.range("slope_" + std::string(to_string(q)), fit.slope, fit.expected_slope - 0.15,
                       fit.expected_slope + 0.15);
        *ctx.out << to_string(q) << ": slope " << format_double(fit.slope) << " (expected "
                 << format_double(fit.expected_slope) << ", r2 " << format_double(fit.r2) << ")\n";
    }
    json doc{{"beta", base.beta}, {"reps", reps}, {"n_grid", grid}, {"fits", fits}, {"criteria", criteria.doc()}};
    write_json(manifest.add_output("report.json"), doc);
    return finish_command(manifest, criteria, ctx);
}

inline int cmd_contour_check(const CommandContext& ctx)
{
    const Settings& s = ctx.settings;
    const ModelConfig mcfg = model_config(s);
    const ContourConfig ccfg = contour_config(s);
    const int instances = lookup(s, "reps") ? static_cast<int>(parse_integer("reps", *lookup(s, "reps"))) : 5;
    if (instances < 1) throw Error(Errc::config_error, "reps must be >= 1");
    std::vector<TestFunction> fs;
    if (const auto* f = lookup(s, "f")) {
        fs.push_back(parse_test_function(*f));
    } else {
        fs = registry_test_functions();
    }
    const ContourSpec contour = build_contour(ccfg.delta, ccfg.v0, ccfg.nq, ccfg.vartheta);
    RunManifest manifest(ctx.out_dir, "contour-check", s, mcfg.seed);
    const ModelSpec model = build_model(mcfg);

    std::ostream& os = *ctx.out;
    CriteriaTable criteria;
    json cauchy = json::array();
    double max_cauchy_gap = 0.0;
    os << "instance  f  lhs  rhs  gap\n";
    for (int i = 0; i < instances; ++i) {
        RandomStream rng(replication_seed(mcfg.seed, static_cast<std::uint64_t>(i), 0));
        const SampleAnalysis a = analyze(sample_batch(model, mcfg.dist, rng), model);
        for (const auto& f : fs) {
            const CauchyCheck c = cauchy_functional(a, f, contour);
            max_cauchy_gap = std::max(max_cauchy_gap, c.gap);
            os << i << "  " << f.spec() << "  " << format_double(c.lhs) << "  " << format_complex(c.rhs) << "  "
               << format_double(c.gap) << "\n";
            cauchy.push_back({{"instance", i}, {"f", f.spec()}, {"lhs", c.lhs}, {"rhs", to_json(c.rhs)}, {"gap", c.gap}});
        }
    }
    criteria.at_most("cauchy_gap_max", max_cauchy_gap, 1e-6);

    json integrals = json::array();
    double max_integral_gap = 0.0;
    os << "f  g  var_X_gap  cov_XY_gap  var_Y_gap\n";
    for (const auto& f : fs) {
        for (const auto& g : registry_outer_functions()) {
            const double f1 = std::real(f(cplx{1.0, 0.0}));
            const double g1 = g.derivative_at_zero();
            const LimitVarianceIntegrals li = limit_variance_integrals(f, g1, contour);
            const double gx = std::abs(li.var_X - 2.0 * f1 * f1);
            const double gxy = std::abs(li.cov_XY - 2.0 * g1 * f1);
            const double gy = std::abs(li.var_Y - 2.0 * g1 * g1);
            max_integral_gap = std::max({max_integral_gap, gx, gxy, gy});
            os << f.spec() << "  " << g.spec() << "  " << format_double(gx) << "  " << format_double(gxy) << "  "
               << format_double(gy) << "\n";
            integrals.push_back({{"f", f.spec()},
                                 {"g", g.spec()},
                                 {"var_X", li.var_X},
                                 {"cov_XY", li.cov_XY},
                                 {"var_Y", li.var_Y},
                                 {"gaps", {gx, gxy, gy}}});
        }
    }
    criteria.at_most("variance_integral_gap_max", max_integral_gap, 1e-8);

    // (1/2πi)∮ dz/(z − 1) = 1
    const cplx residue = contour.integrate([](cplx z) { return 1.0 / (z - 1.0); }) / cplx{0.0, 2.0 * std::numbers::pi};
    const double residue_error = std::abs(residue - 1.0);
    os << "residue error (nq=" << ccfg.nq << "): " << format_double(residue_error) << "\n";

    json doc{{"n", model.dims.n},
             {"p", model.dims.p},
             {"nq", ccfg.nq},
             {"delta", ccfg.delta},
             {"v0", ccfg.v0},
             {"cauchy", cauchy},
             {"variance_integrals", integrals},
             {"residue_error", residue_error},
             {"criteria", criteria.doc()}};
    write_json(manifest.add_output("report.json"), doc);
    return finish_command(manifest, criteria, ctx);
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

struct SubcommandOptions {
    CLI::App* app = nullptr;
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::string config;
    std::string out = "rmtlab_out";
    bool check = false;
};

inline void add_setting(SubcommandOptions& sub, const std::string& key, const std::string& help)
{
    std::string flag = "--" + key;
    for (char& c : flag) {
        if (c == '_') c = '-';
    }
    sub.options.emplace_back(key, sub.app->add_option(flag, sub.values[key], help));
}

inline void add_common_settings(SubcommandOptions& sub)
{
    sub.app->add_option("--config", sub.config, "flat key = value config file");
    sub.app->add_option("--out", sub.out, "output directory");
    sub.app->add_flag("--check", sub.check, "exit 3 when an acceptance threshold fails");
    add_setting(sub, "n", "sample size");
    add_setting(sub, "beta", "dimension exponent, p = floor(scale * n^beta)");
    add_setting(sub, "scale", "dimension prefactor");
    add_setting(sub, "p", "explicit dimension p (overrides beta)");
    add_setting(sub, "q_factor", "q = q_factor * p");
    add_setting(sub, "m_factor", "m = m_factor * q");
    add_setting(sub, "gamma_kind", "identity_padded | gaussian_random");
    add_setting(sub, "u_kind", "coordinate_selection | random_semi_orthogonal");
    add_setting(sub, "dist", "gaussian | rademacher | uniform_unit_var | centered_exponential");
    add_setting(sub, "mu_mode", "zero | constant:<value>");
    add_setting(sub, "seed", "master seed (falls back to RMTLAB_SEED, then 1)");
    add_setting(sub, "reps", "replications");
    add_setting(sub, "threads", "worker threads (0 = available parallelism)");
}

inline void add_experiment_settings(SubcommandOptions& sub)
{
    add_setting(sub, "f", "test function, poly:[c0,c1,...] or expaff:a,c");
    add_setting(sub, "g", "outer function, identity | poly2 | expm1");
    add_setting(sub, "z", "comma separated complex points, e.g. -1,1+1i,1-1i");
    add_setting(sub, "delta", "contour half width");
    add_setting(sub, "v0", "contour half height");
    add_setting(sub, "nq", "Gauss-Legendre nodes per side");
    add_setting(sub, "vartheta", "gap exponent of rho_n = n^-vartheta");
    add_setting(sub, "truncation", "off | per_row | uniform_sigma");
    add_setting(sub, "resample_degenerate", "resample draws with zero mean vector");
    add_setting(sub, "hook", "none | zero | identity_design (test hooks)");
}

inline Settings merged_settings(const SubcommandOptions& sub)
{
    Settings s = sub.config.empty() ? Settings{} : read_config_file(sub.config);
    for (const auto& [key, opt] : sub.options) {
        if (opt->count() > 0) s[key] = sub.values.at(key);
    }
    return s;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"rmtlab: Monte Carlo checks for spectral statistics of high-dimensional sample means"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    std::map<std::string, SubcommandOptions> subs;
    const auto make = [&](const std::string& name, const std::string& desc) -> SubcommandOptions& {
        SubcommandOptions& sub = subs[name];
        sub.app = app.add_subcommand(name, desc);
        add_common_settings(sub);
        return sub;
    };
    add_experiment_settings(make("clt", "joint CLT of (X_n, Y_n) and process moments"));
    add_experiment_settings(make("process", "second moments of the truncated process"));
    add_experiment_settings(make("eigen", "concentration of the eigenvalues of the whitened sample covariance"));
    add_experiment_settings(make("contour-check", "Cauchy functional identity and limit variance integrals"));
    {
        SubcommandOptions& sub = make("scaling", "log-log scaling exponents of the mean-vector quantities");
        add_setting(sub, "quantity", "mean_norm_dev | cross_qform | mean_qform | all");
        add_setting(sub, "n_grid", "comma separated sample sizes");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    for (auto& [name, sub] : subs) {
        if (!sub.app->parsed()) continue;
        try {
            CommandContext ctx;
            ctx.settings = merged_settings(sub);
            ctx.out_dir = sub.out;
            ctx.check = sub.check;
            ctx.out = &out;
            if (name == "clt") return cmd_clt(ctx);
            if (name == "process") return cmd_process(ctx);
            if (name == "eigen") return cmd_eigen(ctx);
            if (name == "scaling") return cmd_scaling(ctx);
            return cmd_contour_check(ctx);
        } catch (const UsageError& e) {
            err << "error: " << e.what() << "\n\n" << sub.app->help();
            return 1;
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return is_numerical(e.code()) ? 2 : 1;
        } catch (const std::filesystem::filesystem_error& e) {
            err << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}

} // namespace rmtlab::cli
