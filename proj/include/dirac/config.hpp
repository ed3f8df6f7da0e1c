#pragma once

#include "dirac/denoise.hpp"
#include "dirac/sampler.hpp"
#include "dirac/schedule.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <map>
#include <set>

namespace dirac {

/// Raised for malformed or out-of-range configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ProcessConfig {
    std::string kind = "blur";  // blur | inpaint | blending
    double w_min = 0.3;
    double w_max = 3.0;
    int kernel_size = 0;  // 0 = derived from w_max
    KernelShape kernel_shape = KernelShape::discrete;
    int k = 4;
    double w1 = 0.0;  // 0 = 0.2 x image side
    std::filesystem::path schedule_file;
    std::filesystem::path anchor_file;  // blending anchor; blurred prior draw when empty
};

struct PriorConfig {
    std::size_t height = 16;
    std::size_t width = 16;
    double length_scale = 2.0;
    double jitter = 1e-4;
    double mean = 0.5;
    double amplitude = 1.0;
    std::uint64_t seed = 1;
};

struct ScheduleConfig {
    std::size_t candidates = 101;
    std::size_t knots = 20;
    std::string metric = "rmse";
    std::size_t dataset = 64;
    std::uint64_t seed = 2;
};

struct TrainingConfig {
    TrainConfig train;
    std::size_t bins = 8;
    std::uint64_t seed = 3;
};

struct SamplerSection {
    std::string denoiser = "oracle";  // oracle | affine | ground_truth
    std::filesystem::path model_file;
    std::filesystem::path measurement_file;
    std::filesystem::path truth_file;
    SamplerConfig sampler;
    std::uint64_t measurement_seed = 4;
    std::size_t runs = 30;
    bool dump_images = false;
};

struct VerifyConfig {
    std::vector<std::string> suites;  // empty = all
    std::uint64_t seed = 5;
    std::size_t tweedie_trials = 20;
    std::size_t dc_seeds = 256;
    double dc_delta_t = 0.05;
    std::size_t bound_trials = 200;
    double bound_delta_t = 0.05;
    std::vector<double> epsilons{0.0, 0.05, 0.1};
    std::size_t transitivity_triples = 50;
    std::size_t curve_runs = 30;
    std::size_t robustness_runs = 10;
    std::size_t scheduler_candidates = 12;
    double tamper_transition = 1.0;
};

struct ExperimentConfig {
    ProcessConfig process;
    PriorConfig prior;
    double sigma_min = 0.01;
    double sigma_max = 0.05;
    ScheduleConfig schedule;
    TrainingConfig training;
    SamplerSection sampler;
    VerifyConfig verify;
    std::filesystem::path output_dir = "out";

    Shape shape() const { return Shape::grid(prior.height, prior.width); }
    NoiseSchedule noise() const { return NoiseSchedule(sigma_min, sigma_max); }
};

inline const std::vector<std::string>& verify_suite_names() {
    static const std::vector<std::string> names{"tweedie",  "thm34",      "thm36",    "transitivity",
                                                "pd-curve", "robustness", "scheduler"};
    return names;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Reads one section, rejecting keys that no field consumed.
class SectionReader {
public:
    SectionReader(std::string name, const boost::property_tree::ptree* tree) : name_(std::move(name)), tree_(tree) {
        if (!tree_) return;
        for (const auto& [key, child] : *tree_) {
            if (!child.empty()) throw ConfigError("[" + name_ + "] " + key + ": nested values are not supported");
            if (!values_.emplace(key, trim(child.data())).second) throw ConfigError("[" + name_ + "] duplicate key " + key);
        }
    }

    void real(const std::string& key, double& out, double lo, double hi) {
        auto v = take(key);
        if (!v) return;
        double x = 0.0;
        const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
        if (ec != std::errc() || ptr != v->data() + v->size() || !std::isfinite(x)) bad(key, *v, "a finite number");
        if (x < lo || x > hi) range(key, *v, lo, hi);
        out = x;
    }

    template <class Int>
    void integer(const std::string& key, Int& out, Int lo, Int hi) {
        auto v = take(key);
        if (!v) return;
        Int x{};
        const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
        if (ec != std::errc() || ptr != v->data() + v->size()) bad(key, *v, "an integer");
        if (x < lo || x > hi) range(key, *v, static_cast<double>(lo), static_cast<double>(hi));
        out = x;
    }

    void boolean(const std::string& key, bool& out) {
        auto v = take(key);
        if (!v) return;
        if (*v == "true" || *v == "1") out = true;
        else if (*v == "false" || *v == "0") out = false;
        else bad(key, *v, "true or false");
    }

    void choice(const std::string& key, std::string& out, const std::set<std::string>& allowed) {
        auto v = take(key);
        if (!v) return;
        if (!allowed.count(*v)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            bad(key, *v, "one of: " + list);
        }
        out = *v;
    }

    void text(const std::string& key, std::string& out) {
        if (auto v = take(key)) out = *v;
    }

    void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
        auto v = take(key);
        if (!v || v->empty()) return;
        std::filesystem::path p(*v);
        if (p.is_relative()) p = base / p;
        out = p;
    }

    void finish() const {
        for (const auto& [key, value] : values_) {
            if (!used_.count(key)) throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
        }
    }

private:
    std::optional<std::string> take(const std::string& key) {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }
    [[noreturn]] void bad(const std::string& key, const std::string& v, const std::string& expected) const {
        throw ConfigError("[" + name_ + "] " + key + " = '" + v + "': expected " + expected);
    }
    [[noreturn]] void range(const std::string& key, const std::string& v, double lo, double hi) const {
        throw ConfigError("[" + name_ + "] " + key + " = " + v + " outside [" + io::format_real(lo) + ", " +
                          io::format_real(hi) + "]");
    }

    std::string name_;
    const boost::property_tree::ptree* tree_;
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

}  // namespace detail

/// Parses INI text. Relative paths resolve against `base_dir`; every file the
/// config names must exist.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }

    static const std::set<std::string> sections{"process", "noise", "prior", "schedule", "training",
                                                "sampler", "verify", "output"};
    for (const auto& [name, child] : tree) {
        if (!sections.count(name)) {
            throw ConfigError(child.empty() ? "top-level key '" + name + "' outside any section" : "unknown section [" + name + "]");
        }
    }
    auto section = [&](const std::string& name) {
        const auto it = tree.find(name);
        return detail::SectionReader(name, it == tree.not_found() ? nullptr : &it->second);
    };
    constexpr double big = 1e12;
    ExperimentConfig c;

    auto p = section("process");
    p.choice("kind", c.process.kind, {"blur", "inpaint", "blending"});
    p.real("w_min", c.process.w_min, 0.0, 1e3);
    p.real("w_max", c.process.w_max, 0.0, 1e3);
    p.integer<int>("kernel_size", c.process.kernel_size, 0, 1001);
    std::string kshape = to_string(c.process.kernel_shape);
    p.choice("kernel_shape", kshape, {"sampled", "discrete"});
    c.process.kernel_shape = kshape == "sampled" ? KernelShape::sampled : KernelShape::discrete;
    p.integer<int>("k", c.process.k, 1, 64);
    p.real("w1", c.process.w1, 0.0, 1e3);
    p.path("schedule_file", c.process.schedule_file, base_dir);
    p.path("anchor_file", c.process.anchor_file, base_dir);
    p.finish();

    auto n = section("noise");
    n.real("sigma_min", c.sigma_min, 0.0, 10.0);
    n.real("sigma_max", c.sigma_max, 0.0, 10.0);
    n.finish();

    auto pr = section("prior");
    pr.integer<std::size_t>("height", c.prior.height, 1, 32);
    pr.integer<std::size_t>("width", c.prior.width, 1, 32);
    pr.real("length_scale", c.prior.length_scale, 1e-3, 1e3);
    pr.real("jitter", c.prior.jitter, 0.0, 1.0);
    pr.real("mean", c.prior.mean, -big, big);
    pr.real("amplitude", c.prior.amplitude, 1e-6, 1e6);
    pr.integer<std::uint64_t>("seed", c.prior.seed, 0, std::numeric_limits<std::uint64_t>::max());
    pr.finish();

    auto s = section("schedule");
    s.integer<std::size_t>("candidates", c.schedule.candidates, 2, 10000);
    s.integer<std::size_t>("knots", c.schedule.knots, 0, 10000);
    s.choice("metric", c.schedule.metric, {"rmse", "mse"});
    s.integer<std::size_t>("dataset", c.schedule.dataset, 1, 100000);
    s.integer<std::uint64_t>("seed", c.schedule.seed, 0, std::numeric_limits<std::uint64_t>::max());
    s.finish();

    auto tr = section("training");
    std::string loss = "denoising";
    double loss_dt = 0.0;
    tr.choice("loss", loss, {"denoising", "incremental"});
    tr.real("delta_t", loss_dt, 0.0, 1.0);
    c.training.train.loss = loss == "denoising" ? LossKind::denoising() : LossKind::incremental(loss_dt);
    tr.integer<std::size_t>("bins", c.training.bins, 1, 1000);
    tr.integer<std::size_t>("steps", c.training.train.steps, 0, 100'000'000);
    tr.real("step_size", c.training.train.step_size, 1e-12, 1e3);
    tr.integer<std::size_t>("batch", c.training.train.batch_size, 1, 100000);
    std::string opt = to_string(c.training.train.optimizer);
    tr.choice("optimizer", opt, {"sgd", "preconditioned"});
    c.training.train.optimizer = optimizer_from_string(opt);
    tr.integer<std::size_t>("warmup", c.training.train.warmup_per_bin, 1, 10'000'000);
    tr.boolean("average_tail", c.training.train.average_tail);
    tr.integer<std::uint64_t>("seed", c.training.seed, 0, std::numeric_limits<std::uint64_t>::max());
    tr.finish();

    auto sa = section("sampler");
    auto& sc = c.sampler.sampler;
    sa.choice("denoiser", c.sampler.denoiser, {"oracle", "affine", "ground_truth"});
    sa.path("model_file", c.sampler.model_file, base_dir);
    sa.path("measurement_file", c.sampler.measurement_file, base_dir);
    sa.path("truth_file", c.sampler.truth_file, base_dir);
    sa.real("delta_t", sc.delta_t, 1e-6, 1.0);
    sa.real("t_stop", sc.t_stop, 0.0, 1.0 - 1e-12);
    sa.real("eta", sc.eta, 0.0, 1e6);
    std::string guidance = to_string(sc.guidance), output = to_string(sc.output), variant = to_string(sc.variant.kind);
    sa.choice("guidance", guidance, {"none", "std_scaled", "error_scaled"});
    sa.choice("output", output, {"final_iterate", "posterior_mean"});
    sa.choice("variant", variant, {"LA", "SLA", "LB", "SLB"});
    sc.guidance = guidance_from_string(guidance);
    sc.output = output_from_string(output);
    sc.variant.kind = increment_from_string(variant);
    sa.real("small_dt", sc.variant.small_dt, 0.0, 1.0);
    sa.integer<std::uint64_t>("seed", sc.seed, 0, std::numeric_limits<std::uint64_t>::max());
    sa.integer<std::uint64_t>("measurement_seed", c.sampler.measurement_seed, 0, std::numeric_limits<std::uint64_t>::max());
    sa.integer<std::size_t>("runs", c.sampler.runs, 1, 100000);
    sa.boolean("dump_images", c.sampler.dump_images);
    sa.finish();

    auto v = section("verify");
    std::string suites;
    v.text("suites", suites);
    c.verify.suites = detail::split_list(suites);
    for (const auto& name : c.verify.suites) {
        if (std::find(verify_suite_names().begin(), verify_suite_names().end(), name) == verify_suite_names().end()) {
            throw ConfigError("[verify] unknown suite '" + name + "'");
        }
    }
    v.integer<std::uint64_t>("seed", c.verify.seed, 0, std::numeric_limits<std::uint64_t>::max());
    v.integer<std::size_t>("tweedie_trials", c.verify.tweedie_trials, 1, 100000);
    v.integer<std::size_t>("dc_seeds", c.verify.dc_seeds, 1, 1'000'000);
    v.real("dc_delta_t", c.verify.dc_delta_t, 1e-6, 1.0);
    v.integer<std::size_t>("bound_trials", c.verify.bound_trials, 1, 1'000'000);
    v.real("bound_delta_t", c.verify.bound_delta_t, 1e-6, 1.0 - 1e-6);
    std::string eps;
    v.text("epsilons", eps);
    if (!eps.empty()) {
        c.verify.epsilons.clear();
        for (const auto& item : detail::split_list(eps)) {
            double x = 0.0;
            const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
            if (ec != std::errc() || ptr != item.data() + item.size() || !(x >= 0.0 && x <= 1e6)) {
                throw ConfigError("[verify] epsilons: '" + item + "' is not a number in [0, 1e6]");
            }
            c.verify.epsilons.push_back(x);
        }
    }
    v.integer<std::size_t>("transitivity_triples", c.verify.transitivity_triples, 1, 1'000'000);
    v.integer<std::size_t>("curve_runs", c.verify.curve_runs, 1, 1'000'000);
    v.integer<std::size_t>("robustness_runs", c.verify.robustness_runs, 1, 1'000'000);
    v.integer<std::size_t>("scheduler_candidates", c.verify.scheduler_candidates, 3, 16);
    v.real("tamper_transition", c.verify.tamper_transition, 1e-6, 1e6);
    v.finish();

    auto o = section("output");
    o.path("dir", c.output_dir, base_dir);
    o.finish();

    // Cross-field checks.
    try {
        (void)c.noise();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[noise] ") + e.what());
    }
    if (c.process.kind == "blur" && !(c.process.w_min > 0.0 && c.process.w_max >= c.process.w_min)) {
        throw ConfigError("[process] blur needs 0 < w_min <= w_max");
    }
    if (c.process.kernel_size != 0 && (c.process.kernel_size < 3 || c.process.kernel_size % 2 == 0)) {
        throw ConfigError("[process] kernel_size must be 0 (auto) or an odd integer >= 3");
    }
    if (c.training.train.optimizer == Optimizer::preconditioned && c.training.train.warmup_per_bin < c.shape().size() + 1) {
        throw ConfigError("[training] warmup must be at least height * width + 1 for the preconditioned optimizer");
    }
    if (c.schedule.knots + 2 > c.schedule.candidates) throw ConfigError("[schedule] knots must be <= candidates - 2");
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[sampler] ") + e.what());
    }
    for (const auto* f : {&c.process.schedule_file, &c.process.anchor_file, &c.sampler.model_file,
                          &c.sampler.measurement_file, &c.sampler.truth_file}) {
        if (!f->empty() && !std::filesystem::is_regular_file(*f)) {
            throw ConfigError("referenced file does not exist: " + f->string());
        }
    }
    if (c.sampler.denoiser == "affine" && c.sampler.model_file.empty()) {
        throw ConfigError("[sampler] denoiser = affine needs model_file");
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace dirac
