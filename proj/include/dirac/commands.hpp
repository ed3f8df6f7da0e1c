#pragma once

#include "dirac/config.hpp"
#include "dirac/verify.hpp"

#include <iostream>
#include <ostream>

namespace dirac {

struct CommandContext {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
    std::size_t jobs = 1;
};

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_usage = 2 };

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

inline std::shared_ptr<const GaussianPrior> make_prior(const ExperimentConfig& c) {
    return std::make_shared<GaussianPrior>(GaussianPrior::squared_exponential(
        c.shape(), c.prior.length_scale, c.prior.jitter, c.prior.mean, c.prior.amplitude));
}

inline double inpaint_terminal_width(const ExperimentConfig& c) {
    return c.process.w1 > 0.0 ? c.process.w1 : GaussianMaskInpaintProcess::default_terminal_width(c.shape());
}

/// Schedule from the configured file, or linear between the endpoints.
inline SeveritySchedule configured_schedule(const ExperimentConfig& c, const std::string& kind) {
    if (!c.process.schedule_file.empty() && kind == c.process.kind) {
        const auto file = decode_schedule(io::read_text_file(c.process.schedule_file));
        if (file.process != kind) {
            throw ConfigError("schedule file was built for '" + file.process + "', not '" + kind + "'");
        }
        return file.schedule;
    }
    if (kind == "blur") return SeveritySchedule::linear(c.process.w_min, c.process.w_max);
    return SeveritySchedule::linear(0.0, inpaint_terminal_width(c));
}

/// Builds a process of the given kind from the config; `multiplier` scales
/// every operator parameter (blur widths, mask widths).
inline ProcessPtr make_process_of_kind(const ExperimentConfig& c, const std::string& kind, double multiplier = 1.0) {
    const Shape shape = c.shape();
    if (kind == "blur") {
        auto schedule = configured_schedule(c, kind);
        if (multiplier != 1.0) schedule = schedule.scaled(multiplier);
        const int k = c.process.kernel_size > 0 ? c.process.kernel_size : default_kernel_size(schedule.w_max());
        return std::make_shared<GaussianBlurProcess>(shape, schedule, k, c.process.kernel_shape);
    }
    if (kind == "inpaint") {
        auto schedule = configured_schedule(c, kind);
        if (multiplier != 1.0) schedule = schedule.scaled(multiplier);
        return std::make_shared<GaussianMaskInpaintProcess>(shape, schedule, c.process.k);
    }
    if (kind == "blending") {
        if (multiplier != 1.0) throw std::invalid_argument("blending has no operator parameter to perturb");
        Signal anchor;
        if (!c.process.anchor_file.empty()) {
            anchor = io::read_signal(c.process.anchor_file);
            if (!(anchor.shape == shape)) throw ConfigError("anchor file shape does not match the prior shape");
        } else {
            // A blurred prior draw stands in for the conditioning measurement.
            RandomSource rng(c.prior.seed, 0xA2C802);
            const auto prior = make_prior(c);
            const GaussianBlurProcess blur(shape, std::max(c.process.w_min, 1e-3), std::max(c.process.w_max, 1e-3));
            anchor = blur.apply(1.0, prior_sample(*prior, rng));
        }
        return std::make_shared<BlendingProcess>(std::move(anchor));
    }
    throw ConfigError("unknown process kind '" + kind + "'");
}

inline ProcessPtr make_process(const ExperimentConfig& c, double multiplier = 1.0) {
    return make_process_of_kind(c, c.process.kind, multiplier);
}

// ---------------------------------------------------------------------------
// Reporting helpers
// ---------------------------------------------------------------------------

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string summary;
    std::vector<std::pair<std::string, std::string>> files;  // (file name, contents)
};

inline std::string pass_fail(bool ok) { return ok ? "PASS" : "FAIL"; }

inline void write_outputs(const std::filesystem::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
    for (const auto& [name, contents] : files) io::write_text_file(dir / name, contents);
}

// ---------------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------------

/// sigma_t^2 s(y, t) with the oracle against A_t E[x0|y] - y and
/// sigma_t^2 grad log q_t(y), relative error <= 1e-8.
inline SuiteResult suite_tweedie(const ExperimentConfig& c, std::size_t jobs) {
    (void)jobs;
    SuiteResult r{"tweedie", true, "", {}};
    const auto prior = make_prior(c);
    const NoiseSchedule noise = c.noise();
    if (noise.is_noiseless()) {
        r.passed = false;
        r.summary = "needs sigma > 0";
        return r;
    }
    std::string csv = "process,trial,t,rel_err_denoiser,rel_err_score\n";
    double worst = 0.0;
    const std::vector<std::string> kinds{"blur", "inpaint", "blending"};
    for (std::size_t kid = 0; kid < kinds.size(); ++kid) {
        const std::string& kind = kinds[kid];
        const auto model = std::make_shared<LinearGaussianModel>(prior, make_process_of_kind(c, kind), noise);
        const OracleDenoiser den(model);
        RandomSource rng(c.verify.seed, 0x7EED + kid);
        for (std::size_t i = 0; i < c.verify.tweedie_trials; ++i) {
            const double t = rng.uniform();
            const Signal x0 = prior_sample(*prior, rng);
            const Signal y = sdp_sample(model->process(), noise, x0, t, rng);
            const double var = noise.variance(t);
            const Vector lhs = var * score_from_denoiser(den, model->process(), noise, y, t).values;
            const Vector tweedie = model->process().apply(t, den.estimate(y, t)).values - y.values;
            const Vector exact = var * model->marginal_score(y, t).values;
            const double e1 = (lhs - tweedie).norm() / tweedie.norm();
            const double e2 = (lhs - exact).norm() / exact.norm();
            worst = std::max({worst, e1, e2});
            csv += kind + "," + std::to_string(i) + "," + io::format_real(t) + "," + io::format_real(e1) + "," +
                   io::format_real(e2) + "\n";
        }
    }
    r.passed = worst <= 1e-8;
    r.summary = "max relative error " + io::format_real(worst) + " (limit 1e-8)";
    r.files.emplace_back("tweedie.csv", csv);
    return r;
}

inline SuiteResult suite_thm34(const ExperimentConfig& c, std::size_t jobs) {
    SuiteResult r{"thm34", true, "", {}};
    const auto prior = make_prior(c);
    const NoiseSchedule noise = c.noise();
    const std::vector<std::string> kinds{"blur", "inpaint", "blending"};
    struct Job {
        std::string kind;
        double eps;
    };
    std::vector<Job> work;
    for (const auto& k : kinds) {
        for (double e : c.verify.epsilons) work.push_back({k, e});
    }
    std::vector<BoundReport> reports(work.size());
    parallel_for(work.size(), jobs, [&](std::size_t i) {
        const auto model = std::make_shared<LinearGaussianModel>(prior, make_process_of_kind(c, work[i].kind), noise);
        BoundOptions opt;
        opt.delta_t = c.verify.bound_delta_t;
        opt.epsilon = work[i].eps;
        opt.trials = c.verify.bound_trials;
        opt.seed = splitmix64(c.verify.seed + i);
        reports[i] = verify_theorem_bound(*model, opt);
    });
    std::string csv = "process,epsilon,trials,rejected,violations,max_lhs,min_rhs,min_slack\n";
    std::size_t violations = 0;
    for (std::size_t i = 0; i < work.size(); ++i) {
        const auto& b = reports[i];
        violations += b.violations;
        csv += work[i].kind + "," + io::format_real(work[i].eps) + "," + std::to_string(b.trials) + "," +
               std::to_string(b.rejected) + "," + std::to_string(b.violations) + "," + io::format_real(b.max_lhs) + "," +
               io::format_real(b.min_rhs) + "," + io::format_real(b.min_slack) + "\n";
    }
    r.passed = violations == 0;
    r.summary = std::to_string(violations) + " violations over " + std::to_string(work.size()) +
                " (process, epsilon) audits; L_t is a lower estimate";
    r.files.emplace_back("thm34.csv", csv);
    return r;
}

inline SuiteResult suite_thm36(const ExperimentConfig& c, std::size_t jobs) {
    SuiteResult r{"thm36", true, "", {}};
    const auto prior = make_prior(c);
    ProcessPtr proc = make_process_of_kind(c, "inpaint");
    if (c.verify.tamper_transition != 1.0) proc = std::make_shared<TamperedTransitionProcess>(proc, c.verify.tamper_transition);
    RandomSource rng(c.verify.seed, 36);
    const Signal x0 = prior_sample(*prior, rng);
    DcOptions opt;
    opt.delta_t = c.verify.dc_delta_t;
    opt.seeds = c.verify.dc_seeds;
    opt.base_seed = splitmix64(c.verify.seed ^ 36);
    opt.jobs = jobs;
    const auto rep = verify_theorem_dc(*proc, c.noise(), x0, opt);
    std::size_t inconsistent = 0;
    double worst_transition = 0.0;
    for (const auto& row : rep.rows) {
        inconsistent += row.pair_consistent ? 0 : 1;
        worst_transition = std::max(worst_transition, row.transition_residual);
    }
    r.passed = rep.passed;
    r.summary = "max deviation " + io::format_real(rep.max_deviation()) + " (limit " +
                io::format_real(rep.deviation_tolerance) + "), " + std::to_string(inconsistent) +
                " inconsistent pairs, max transition residual " + io::format_real(worst_transition) + " (limit " +
                io::format_real(rep.consistency_tolerance) + ")";
    r.files.emplace_back("thm36.csv", dc_report_csv(rep));
    return r;
}

inline SuiteResult suite_transitivity(const ExperimentConfig& c, std::size_t) {
    SuiteResult r{"transitivity", true, "", {}};
    const auto prior = make_prior(c);
    std::string csv = "process,triples,premises_held,conclusions_held\n";
    const std::vector<std::string> kinds{"inpaint", "blending"};
    for (std::size_t kid = 0; kid < kinds.size(); ++kid) {
        const std::string& kind = kinds[kid];
        RandomSource rng(c.verify.seed, 0x7A + kid);
        const auto rep = verify_transitivity(*make_process_of_kind(c, kind), *prior, c.verify.transitivity_triples, 1e-6, rng);
        r.passed = r.passed && rep.passed;
        csv += kind + "," + std::to_string(rep.triples) + "," + std::to_string(rep.premises_held) + "," +
               std::to_string(rep.conclusions_held) + "\n";
        r.summary += (r.summary.empty() ? "" : "; ") + kind + " " + std::to_string(rep.conclusions_held) + "/" +
                     std::to_string(rep.triples);
    }
    r.files.emplace_back("transitivity.csv", csv);
    return r;
}

inline SuiteResult suite_pd_curve(const ExperimentConfig& c, std::size_t jobs) {
    SuiteResult r{"pd-curve", true, "", {}};
    const auto prior = make_prior(c);
    const NoiseSchedule noise = c.noise();
    const auto model = std::make_shared<LinearGaussianModel>(prior, make_process_of_kind(c, "blur"), noise);
    const OracleDenoiser den(model);
    SamplerConfig cfg = c.sampler.sampler;
    cfg.guidance = GuidanceMode::none;
    cfg.t_stop = 0.0;
    const auto rep = perception_distortion_sweep(den, model->process(), noise, *prior, cfg, c.verify.curve_runs,
                                                 splitmix64(c.verify.seed ^ 0x2F), jobs);
    const auto& peak = rep.points[rep.peak_index];
    r.passed = rep.runs >= 30 && rep.interior_peak && rep.nll_drops_after_peak;
    r.summary = "PSNR peak at t* = " + io::format_real(peak.t) + " (step " + std::to_string(rep.peak_index) + " of " +
                std::to_string(rep.points.size()) + "), nll(t*) = " + io::format_real(peak.nll_mean) +
                ", nll(final) = " + io::format_real(rep.points.back().nll_mean) + ", runs = " + std::to_string(rep.runs);
    r.files.emplace_back("pd_curve.csv", curve_csv(rep));
    return r;
}

inline SuiteResult suite_robustness(const ExperimentConfig& c, std::size_t jobs) {
    SuiteResult r{"robustness", true, "", {}};
    const auto prior = make_prior(c);
    const NoiseSchedule noise = c.noise();
    const auto model = std::make_shared<LinearGaussianModel>(prior, make_process_of_kind(c, "blur"), noise);
    const OracleDenoiser den(model);
    const ProcessFactory factory = [&](double k) { return make_process_of_kind(c, "blur", k); };
    const auto points = robustness_sweep(den, model->process(), noise, *prior, factory, c.sampler.sampler,
                                         c.verify.robustness_runs, splitmix64(c.verify.seed ^ 0x40B),
                                         robustness_multipliers(), robustness_sigmas(), jobs);
    bool finite = true;
    const RobustnessPoint* at_one = nullptr;
    const RobustnessPoint* at_sigma = nullptr;
    for (const auto& p : points) {
        finite = finite && std::isfinite(p.psnr_mean) && std::isfinite(p.nll_mean);
        if (p.axis == "multiplier" && p.value == 1.0) at_one = &p;
        if (p.axis == "sigma" && p.value == noise.sigma(1.0)) at_sigma = &p;
    }
    const bool matches = !at_one || !at_sigma ||
                         (at_one->psnr_mean == at_sigma->psnr_mean && at_one->nll_mean == at_sigma->nll_mean);
    r.passed = finite && matches;
    r.summary = std::to_string(points.size()) + " grid points; unperturbed point " +
                (matches ? "reproduced exactly" : "NOT reproduced");
    r.files.emplace_back("robustness.csv", robustness_csv(points));
    return r;
}

/// Minimum over all m-subsets of interior candidates of the max edge distance.
inline double brute_force_minmax(const DistanceTable& table, std::size_t m) {
    const std::size_t n = table.size();
    std::vector<std::size_t> pick(m);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t depth, std::size_t start) {
        if (depth == m) {
            std::vector<std::size_t> s{0};
            s.insert(s.end(), pick.begin(), pick.end());
            s.push_back(n - 1);
            best = std::min(best, max_edge_distance(table, s));
            return;
        }
        for (std::size_t j = start; j + 1 < n; ++j) {
            pick[depth] = j;
            rec(depth + 1, j + 1);
        }
    };
    rec(0, 1);
    return best;
}

inline SuiteResult suite_scheduler(const ExperimentConfig& c, std::size_t jobs) {
    SuiteResult r{"scheduler", true, "", {}};
    const auto prior = make_prior(c);
    RandomSource rng(c.verify.seed, 0x5C);
    std::vector<Signal> dataset;
    for (std::size_t i = 0; i < 16; ++i) dataset.push_back(prior_sample(*prior, rng));
    const Metric metric = Metric::by_name(c.schedule.metric);
    std::string csv = "process,N,m,greedy,uniform,optimum,trace_non_increasing,local_improvements\n";
    std::size_t mismatches = 0, worse_than_uniform = 0, trace_increases = 0;
    for (const std::string kind : {"blur", "inpaint"}) {
        auto cc = c;
        cc.process.schedule_file.clear();
        const auto proc = make_process_of_kind(cc, kind);
        const std::size_t small_n = c.verify.scheduler_candidates;
        const auto small_table = build_distance_table(*proc, small_n, dataset, metric, jobs);
        const auto large_table = build_distance_table(*proc, c.schedule.candidates, dataset, metric, jobs);
        auto audit = [&](const DistanceTable& table, std::size_t m, bool exhaustive) {
            const auto g = greedy_schedule(table, m);
            const double greedy = max_edge_distance(table, g.selected);
            const double uniform = max_edge_distance(table, uniform_selection(table.size(), m));
            const double optimum = exhaustive ? brute_force_minmax(table, m) : std::numeric_limits<double>::quiet_NaN();
            bool non_inc = true;
            for (std::size_t k = 1; k < g.max_edge_trace.size(); ++k) non_inc = non_inc && g.max_edge_trace[k] <= g.max_edge_trace[k - 1];
            if (exhaustive && greedy != optimum) ++mismatches;
            if (greedy > uniform) ++worse_than_uniform;
            if (!non_inc) ++trace_increases;
            csv += kind + "," + std::to_string(table.size()) + "," + std::to_string(m) + "," + io::format_real(greedy) + "," +
                   io::format_real(uniform) + "," + io::format_real(optimum) + "," + (non_inc ? "1" : "0") + "," +
                   std::to_string(local_improvements(table, g.selected)) + "\n";
        };
        for (std::size_t m = 0; m <= std::min<std::size_t>(3, small_n - 2); ++m) audit(small_table, m, true);
        audit(large_table, c.schedule.knots, false);
    }
    r.passed = mismatches == 0 && worse_than_uniform == 0 && trace_increases == 0;
    r.summary = std::to_string(mismatches) + " greedy/optimum mismatches, " + std::to_string(worse_than_uniform) +
                " tables where greedy is worse than uniform, " + std::to_string(trace_increases) + " increasing traces";
    r.files.emplace_back("scheduler.csv", csv);
    return r;
}

inline SuiteResult run_suite(const std::string& name, const ExperimentConfig& c, std::size_t jobs) {
    if (name == "tweedie") return suite_tweedie(c, jobs);
    if (name == "thm34") return suite_thm34(c, jobs);
    if (name == "thm36") return suite_thm36(c, jobs);
    if (name == "transitivity") return suite_transitivity(c, jobs);
    if (name == "pd-curve") return suite_pd_curve(c, jobs);
    if (name == "robustness") return suite_robustness(c, jobs);
    if (name == "scheduler") return suite_scheduler(c, jobs);
    throw ConfigError("unknown suite '" + name + "'");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_schedule(const ExperimentConfig& c, const CommandContext& ctx) {
    const auto prior = make_prior(c);
    auto cc = c;
    cc.process.schedule_file.clear();
    if (c.process.kind == "blending") throw ConfigError("schedule: blending has no operator parameter to schedule");
    const auto proc = make_process(cc);
    RandomSource rng(c.schedule.seed);
    std::vector<Signal> dataset;
    for (std::size_t i = 0; i < c.schedule.dataset; ++i) dataset.push_back(prior_sample(*prior, rng));
    const auto table = build_distance_table(*proc, c.schedule.candidates, dataset, Metric::by_name(c.schedule.metric), ctx.jobs);
    const auto g = greedy_schedule(table, c.schedule.knots);
    if (g.degenerate) ctx.err << "warning: distance table is all zeros; returning uniform knots\n";
    if (g.non_improving_splits > 0) ctx.err << "warning: " << g.non_improving_splits << " splits did not lower the split edge\n";

    io::write_text_file(c.output_dir / "schedule.txt",
                        encode_schedule(g.schedule, proc->name(), c.schedule.metric, c.schedule.candidates, c.schedule.knots));
    io::write_text_file(c.output_dir / "distance_table.txt", encode_distance_table(table));
    for (std::size_t k = 0; k < g.max_edge_trace.size(); ++k) {
        ctx.out << "insertions " << k << ": max edge " << io::format_real(g.max_edge_trace[k]) << "\n";
    }
    // Knot spacing in t over the lower and upper halves of the parameter range.
    const auto& knots = g.schedule.knots();
    const double w_mid = 0.5 * (knots.front().w + knots.back().w);
    std::size_t below = 0;
    for (const auto& k : knots) below += k.w < w_mid ? 1 : 0;
    ctx.out << "knots with w below the midpoint: " << below << " of " << knots.size() << "\n";
    ctx.out << "wrote " << (c.output_dir / "schedule.txt").string() << "\n";
    return exit_ok;
}

inline int cmd_train(const ExperimentConfig& c, const CommandContext& ctx) {
    if (c.process.kind == "blending") throw ConfigError("train: the blending anchor is per measurement; train on blur or inpaint");
    const auto prior = make_prior(c);
    const auto proc = make_process(c);
    const NoiseSchedule noise = c.noise();
    if (noise.is_noiseless()) throw ConfigError("train: the loss weight 1/sigma^2 needs sigma > 0");
    AffineDenoiser model = AffineDenoiser::initial(c.training.bins, *prior);
    RandomSource rng(c.training.seed);
    const auto report = train_affine(model, *proc, noise, *prior, c.training.train, rng);

    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < report.losses.size(); ++i) csv += std::to_string(i) + "," + io::format_real(report.losses[i]) + "\n";
    io::write_text_file(c.output_dir / "loss.csv", csv);
    if (report.diverged) {
        ctx.err << "training aborted: " << report.message << "\n";
        return exit_failure;
    }
    write_model(c.output_dir / "model.bin", model);
    const std::size_t window = std::min<std::size_t>(100, report.losses.size());
    if (window > 0) {
        double tail = 0.0;
        for (std::size_t i = report.losses.size() - window; i < report.losses.size(); ++i) tail += report.losses[i];
        ctx.out << "steps " << report.steps_completed << ", mean loss over last " << window << " steps "
                << io::format_real(tail / static_cast<double>(window)) << "\n";
    }
    ctx.out << "wrote " << (c.output_dir / "model.bin").string() << "\n";
    return exit_ok;
}

inline DenoiserPtr make_denoiser(const ExperimentConfig& c, const std::shared_ptr<const GaussianPrior>& prior,
                                 const ProcessPtr& proc, const Signal* truth) {
    if (c.sampler.denoiser == "oracle") {
        return std::make_shared<OracleDenoiser>(std::make_shared<LinearGaussianModel>(prior, proc, c.noise()));
    }
    if (c.sampler.denoiser == "affine") return std::make_shared<AffineDenoiser>(read_model(c.sampler.model_file, c.shape()));
    if (!truth) throw ConfigError("denoiser = ground_truth needs a known clean signal");
    return std::make_shared<GroundTruthDenoiser>(*truth);
}

inline int cmd_sample(const ExperimentConfig& c, const CommandContext& ctx) {
    const auto prior = make_prior(c);
    const auto proc = make_process(c);
    const NoiseSchedule noise = c.noise();
    std::optional<Signal> truth;
    Signal measurement;
    if (!c.sampler.measurement_file.empty()) {
        measurement = io::read_signal(c.sampler.measurement_file);
        if (!(measurement.shape == proc->shape())) throw ConfigError("measurement shape does not match the process");
        if (!c.sampler.truth_file.empty()) truth = io::read_signal(c.sampler.truth_file);
    } else {
        RandomSource rng(c.sampler.measurement_seed);
        truth = prior_sample(*prior, rng);
        measurement = sdp_sample(*proc, noise, *truth, 1.0, rng);
    }
    if (truth && !(truth->shape == proc->shape())) throw ConfigError("truth shape does not match the process");
    const auto den = make_denoiser(c, prior, proc, truth ? &*truth : nullptr);
    SamplerConfig cfg = c.sampler.sampler;
    cfg.keep_signals = c.sampler.dump_images;
    const auto traj = dirac_sample(*den, *proc, noise, measurement, cfg, {prior.get(), truth ? &*truth : nullptr});

    io::write_text_file(c.output_dir / "trajectory.csv", trajectory_csv(traj));
    if (traj.aborted) {
        ctx.err << "sampling aborted: " << traj.message << "\n";
        return exit_failure;
    }
    io::write_signal(c.output_dir / "output.sig", traj.output);
    io::write_pgm(c.output_dir / "output.pgm", traj.output);
    io::write_pgm(c.output_dir / "measurement.pgm", measurement);
    if (truth) io::write_pgm(c.output_dir / "truth.pgm", *truth);
    if (c.sampler.dump_images) {
        for (const auto& s : traj.steps) {
            const std::string id = std::to_string(s.step);
            io::write_pgm(c.output_dir / "steps" / ("iterate_" + id + ".pgm"), s.iterate);
            io::write_pgm(c.output_dir / "steps" / ("estimate_" + id + ".pgm"), s.estimate);
        }
    }
    ctx.out << "steps " << traj.steps.size() << "\n";
    if (truth) ctx.out << "psnr " << io::format_real(psnr(traj.output, *truth)) << "\n";
    ctx.out << "prior_nll " << io::format_real(prior_nll(*prior, traj.output)) << "\n";
    ctx.out << "eps_dc " << io::format_real(eps_dc(*proc, measurement, traj.final_estimate)) << "\n";
    return exit_ok;
}

/// Runs the selected suites (all when none are selected) and writes
/// report.txt plus one CSV per suite. Exit 1 when any suite fails.
inline int cmd_verify(const ExperimentConfig& c, const CommandContext& ctx, std::vector<std::string> suites = {}) {
    if (suites.empty()) suites = c.verify.suites;
    if (suites.empty()) suites = verify_suite_names();
    for (const auto& s : suites) {
        if (std::find(verify_suite_names().begin(), verify_suite_names().end(), s) == verify_suite_names().end()) {
            throw ConfigError("unknown suite '" + s + "'");
        }
    }
    std::string report;
    bool all = true;
    for (const auto& name : suites) {
        const auto r = run_suite(name, c, ctx.jobs);
        all = all && r.passed;
        const std::string line = pass_fail(r.passed) + " " + r.name + ": " + r.summary;
        ctx.out << line << "\n" << std::flush;
        report += line + "\n";
        write_outputs(c.output_dir, r.files);
    }
    io::write_text_file(c.output_dir / "report.txt", report);
    return all ? exit_ok : exit_failure;
}

/// Perception-distortion curve for the configured denoiser and process, the
/// implied early-stopping severity, and the robustness sweep.
inline int cmd_sweep(const ExperimentConfig& c, const CommandContext& ctx) {
    const auto prior = make_prior(c);
    const auto proc = make_process(c);
    const NoiseSchedule noise = c.noise();
    if (c.sampler.denoiser == "ground_truth") throw ConfigError("sweep: ground_truth denoiser has no fixed clean signal");
    const auto den = make_denoiser(c, prior, proc, nullptr);
    const auto curve = perception_distortion_sweep(*den, *proc, noise, *prior, c.sampler.sampler, c.sampler.runs,
                                                   c.sampler.measurement_seed, ctx.jobs);
    io::write_text_file(c.output_dir / "pd_curve.csv", curve_csv(curve));
    const double t_star = curve.points[curve.peak_index].t;
    ctx.out << "psnr peak at t* = " << io::format_real(t_star) << " (step " << curve.peak_index << ")\n";
    ctx.out << "suggested DO t_stop = " << io::format_real(std::max(0.0, t_star - 0.5 * c.sampler.sampler.delta_t)) << "\n";
    if (c.process.kind != "blending") {
        const ProcessFactory factory = [&](double k) { return make_process(c, k); };
        const auto points = robustness_sweep(*den, *proc, noise, *prior, factory, c.sampler.sampler, c.sampler.runs,
                                             c.sampler.measurement_seed, robustness_multipliers(), robustness_sigmas(), ctx.jobs);
        io::write_text_file(c.output_dir / "robustness.csv", robustness_csv(points));
        for (const auto& p : points) {
            ctx.out << p.axis << " " << io::format_real(p.value) << ": psnr " << io::format_real(p.psnr_mean) << ", nll "
                    << io::format_real(p.nll_mean) << "\n";
        }
    }
    return exit_ok;
}

}  // namespace dirac
