#pragma once

#include "dirac/sampler.hpp"

#include <functional>

namespace dirac {

// ---------------------------------------------------------------------------
// Data consistency
// ---------------------------------------------------------------------------

struct ConsistencyVerdict {
    bool consistent = false;
    double residual = 0.0;  // per-entry RMS of the stacked residual
    Signal witness;
};

/// Is there one x0 with A_tau(x0) = y_tau and A_tau+(x0) = y_tau+? Solves the
/// stacked least-squares problem for its minimum-norm minimizer and compares
/// the RMS residual with `tolerance`.
inline ConsistencyVerdict check_pair_consistency(const DegradationProcess& proc, double tau, double tau_plus,
                                                 const Signal& y_tau, const Signal& y_tau_plus, double tolerance) {
    detail::require_ordered(tau, tau_plus, "check_pair_consistency");
    require_same_shape(y_tau, y_tau_plus, "check_pair_consistency");
    const Eigen::Index n = y_tau.size();
    Matrix stacked(2 * n, n);
    stacked << proc.as_matrix(tau), proc.as_matrix(tau_plus);
    Vector rhs(2 * n);
    rhs << y_tau.values - proc.offset(tau), y_tau_plus.values - proc.offset(tau_plus);
    // minimum-norm least squares; a ridge would bias the residual where mask entries are tiny
    const Vector x = Eigen::CompleteOrthogonalDecomposition<Matrix>(stacked).solve(rhs);
    if (!x.allFinite()) throw std::runtime_error("check_pair_consistency: non-finite least-squares solution");
    const double ss = (stacked * x - rhs).squaredNorm();
    ConsistencyVerdict v;
    v.residual = std::sqrt(ss / static_cast<double>(2 * y_tau.size()));
    v.consistent = v.residual <= tolerance;
    v.witness = y_tau.with_values(x);
    return v;
}

/// Decorator whose forward transitions are scaled by `factor`; everything
/// else is forwarded. Used as an injected fault.
class TamperedTransitionProcess final : public DegradationProcess {
public:
    TamperedTransitionProcess(ProcessPtr inner, double factor) : inner_(std::move(inner)), factor_(factor) {
        if (!inner_) throw std::invalid_argument("tampered process: null inner process");
    }

    std::string name() const override { return inner_->name(); }
    Shape shape() const override { return inner_->shape(); }
    Signal apply(double t, const Signal& x) const override { return inner_->apply(t, x); }
    Signal transition(double t_from, double t_to, const Signal& y) const override {
        Signal out = inner_->transition(t_from, t_to, y);
        if (t_from != t_to) out.values *= factor_;
        return out;
    }
    double param_of(double t) const override { return inner_->param_of(t); }
    Vector offset(double t) const override { return inner_->offset(t); }
    Vector apply_linear(double t, const Vector& v) const override { return inner_->apply_linear(t, v); }
    Vector apply_adjoint(double t, const Vector& v) const override { return inner_->apply_adjoint(t, v); }
    Matrix as_matrix(double t) const override { return inner_->as_matrix(t); }
    double lipschitz_x(double t) const override { return inner_->lipschitz_x(t); }
    double identity_tolerance() const override { return inner_->identity_tolerance(); }
    double composition_tolerance() const override { return inner_->composition_tolerance(); }

private:
    ProcessPtr inner_;
    double factor_;
};

// ---------------------------------------------------------------------------
// Data consistency over iterations
// ---------------------------------------------------------------------------

struct DcOptions {
    double delta_t = 0.05;
    std::size_t seeds = 256;
    std::uint64_t base_seed = 1;
    std::size_t jobs = 1;
    // Constant added to the ground-truth estimate; non-zero values give a
    // deliberately biased denoiser.
    double bias = 0.0;
};

struct DcRow {
    double tau = 0.0;
    double deviation = 0.0;           // RMS of mean iterate - A_tau(x0)
    double pair_residual = 0.0;       // consistency of (mean iterate, A_1(x0))
    bool pair_consistent = false;
    double transition_residual = 0.0; // RMS of G_{tau->1}(mean iterate) - A_1(x0)
};

struct DcReport {
    std::vector<DcRow> rows;
    double deviation_tolerance = 0.0;
    double consistency_tolerance = 0.0;
    bool passed = false;

    double max_deviation() const {
        double m = 0.0;
        for (const auto& r : rows) m = std::max(m, r.deviation);
        return m;
    }
};

/// Runs S ground-truth trajectories (eta = 0, LA) from independent
/// measurements y_1 = A_1(x0) + sigma_1 z, averages iterates per tau and
/// checks them against A_tau(x0). Passes when every deviation is at most
/// 4 sigma_1 / sqrt(S), and every pair verdict and transition residual is
/// within 5 sigma_1 / sqrt(S).
inline DcReport verify_theorem_dc(const DegradationProcess& proc, const NoiseSchedule& noise, const Signal& x0,
                                  const DcOptions& opt) {
    if (opt.seeds == 0) throw std::invalid_argument("verify_theorem_dc: need at least one seed");
    Signal biased = x0;
    biased.values.array() += opt.bias;
    const GroundTruthDenoiser den(biased);
    SamplerConfig cfg;
    cfg.delta_t = opt.delta_t;
    cfg.t_stop = 0.0;
    cfg.eta = 0.0;
    cfg.guidance = GuidanceMode::none;
    cfg.variant = IncrementVariant::la();
    cfg.output = OutputMode::final_iterate;
    cfg.enable_denoising = !noise.is_noiseless();
    cfg.enable_noise = !noise.is_noiseless();

    const auto grid = reverse_grid(cfg.delta_t, cfg.t_stop);
    const Signal a1 = proc.apply(1.0, x0);
    std::vector<std::vector<Vector>> iterates(opt.seeds);
    parallel_for(opt.seeds, opt.jobs, [&](std::size_t s) {
        RandomSource rng(opt.base_seed, s);
        const Signal y1 = sdp_sample(proc, noise, x0, 1.0, rng);
        SamplerConfig c = cfg;
        c.seed = splitmix64(opt.base_seed ^ splitmix64(s + 0x9E37));
        const auto traj = dirac_sample(den, proc, noise, y1, c);
        // iterate after step k, at severity grid[k].second
        for (std::size_t k = 1; k < traj.steps.size(); ++k) iterates[s].push_back(traj.steps[k].iterate.values);
        iterates[s].push_back(traj.final_iterate.values);
    });

    DcReport report;
    const double root_s = std::sqrt(static_cast<double>(opt.seeds));
    report.deviation_tolerance = 4.0 * noise.sigma(1.0) / root_s;
    report.consistency_tolerance = 5.0 * noise.sigma(1.0) / root_s;
    // Noiseless runs are exact; allow rounding only.
    if (noise.is_noiseless()) {
        report.deviation_tolerance = 1e-10;
        report.consistency_tolerance = 1e-6;
    }
    report.passed = true;
    const double n = static_cast<double>(x0.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Vector mean = Vector::Zero(static_cast<Eigen::Index>(x0.size()));
        for (std::size_t s = 0; s < opt.seeds; ++s) mean += iterates[s].at(k);
        mean /= static_cast<double>(opt.seeds);
        const double tau = grid[k].second;
        const Signal ybar = x0.with_values(mean);
        DcRow row;
        row.tau = tau;
        row.deviation = (mean - proc.apply(tau, x0).values).norm() / std::sqrt(n);
        const auto verdict = check_pair_consistency(proc, tau, 1.0, ybar, a1, report.consistency_tolerance);
        row.pair_residual = verdict.residual;
        row.pair_consistent = verdict.consistent;
        row.transition_residual = (proc.transition(tau, 1.0, ybar).values - a1.values).norm() / std::sqrt(n);
        report.passed = report.passed && row.deviation <= report.deviation_tolerance && row.pair_consistent &&
                        row.transition_residual <= report.consistency_tolerance;
        report.rows.push_back(row);
    }
    return report;
}

inline std::string dc_report_csv(const DcReport& r) {
    std::string out = "tau,deviation,pair_residual,pair_consistent,transition_residual\n";
    for (const auto& row : r.rows) {
        out += io::format_real(row.tau) + "," + io::format_real(row.deviation) + "," + io::format_real(row.pair_residual) +
               "," + (row.pair_consistent ? "1" : "0") + "," + io::format_real(row.transition_residual) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transitivity of data consistency
// ---------------------------------------------------------------------------

struct TransitivityReport {
    std::size_t triples = 0;
    std::size_t premises_held = 0;     // both adjacent pairs consistent
    std::size_t conclusions_held = 0;  // outer pair consistent given the premises
    bool passed = false;
};

/// Triples y_t = A_t(x0), y_t+ = G(y_t), y_t'' = G(y_t+) with t < t+ < t''.
inline TransitivityReport verify_transitivity(const DegradationProcess& proc, const GaussianPrior& prior,
                                              std::size_t triples, double tolerance, RandomSource& rng) {
    TransitivityReport r;
    r.triples = triples;
    for (std::size_t i = 0; i < triples; ++i) {
        std::array<double, 3> ts{rng.uniform(), rng.uniform(), rng.uniform()};
        std::sort(ts.begin(), ts.end());
        const Signal x0 = prior_sample(prior, rng);
        const Signal ya = proc.apply(ts[0], x0);
        const Signal yb = proc.transition(ts[0], ts[1], ya);
        const Signal yc = proc.transition(ts[1], ts[2], yb);
        const bool p1 = check_pair_consistency(proc, ts[0], ts[1], ya, yb, tolerance).consistent;
        const bool p2 = check_pair_consistency(proc, ts[1], ts[2], yb, yc, tolerance).consistent;
        if (!(p1 && p2)) continue;
        ++r.premises_held;
        if (check_pair_consistency(proc, ts[0], ts[2], ya, yc, tolerance).consistent) ++r.conclusions_held;
    }
    r.passed = r.premises_held == triples && r.conclusions_held == r.premises_held;
    return r;
}

// ---------------------------------------------------------------------------
// Incremental-reconstruction error bound
// ---------------------------------------------------------------------------

struct BoundOptions {
    double delta_t = 0.05;
    double epsilon = 0.0;
    std::size_t trials = 200;
    int lipschitz_probes = 16;
    std::uint64_t seed = 7;
};

struct BoundReport {
    std::size_t trials = 0;
    std::size_t rejected = 0;    // x0 or estimates beyond the entry bound
    std::size_t violations = 0;  // LHS > RHS
    double max_lhs = 0.0;
    double min_rhs = std::numeric_limits<double>::infinity();
    double min_slack = std::numeric_limits<double>::infinity();
    bool passed = false;
};

/// For random (x0, t, y_t) with t in [dt, 1), perturbs the oracle estimate by
/// delta = eps u / ||M_t u|| so the score error is exactly eps / sigma_t^2,
/// and compares LHS = ||R_hat - R*|| with
/// RHS = (L_x(t) + L_x(t - dt)) sqrt(n) B + 2 L_t dt + 2 eps.
/// L_t comes from `lipschitz_t_estimate`, which is a lower estimate. Instances
/// whose exact or perturbed estimate leaves the entry box are rejected.
inline BoundReport verify_theorem_bound(const LinearGaussianModel& model, const BoundOptions& opt) {
    const auto& proc = model.process();
    const auto& prior = model.prior();
    if (!(opt.delta_t > 0.0 && opt.delta_t < 1.0)) throw std::invalid_argument("bound audit: delta_t must lie in (0,1)");
    RandomSource rng(opt.seed);
    BoundReport r;
    const double root_n = std::sqrt(static_cast<double>(prior.dim()));
    const double bound = prior.entry_bound();
    while (r.trials < opt.trials) {
        if (r.rejected > 100 * opt.trials + 1000) throw std::runtime_error("bound audit: entry bound rejects almost every instance");
        const Signal x0 = prior_sample(prior, rng);
        if ((x0.values.array().abs() > bound).any()) {
            ++r.rejected;
            continue;
        }
        const double t = rng.uniform(opt.delta_t, 1.0);
        const double tm = detail::snap_severity(t - opt.delta_t);
        const Signal y = sdp_sample(proc, model.noise(), x0, t, rng);
        const Vector u = rng.normal_vector(prior.dim());
        const double mu_norm = proc.apply_linear(t, u).norm();
        const Vector delta = mu_norm > 0.0 ? Vector(opt.epsilon * u / mu_norm) : Vector::Zero(u.size());
        const Signal exact = model.posterior_mean(y, t);
        const Signal perturbed = exact.with_values(exact.values + delta);
        // L_t and B only cover the entry box, so estimates leaving it fall outside the premises
        if ((exact.values.array().abs() > bound).any() || (perturbed.values.array().abs() > bound).any()) {
            ++r.rejected;
            continue;
        }
        const auto la = IncrementVariant::la();
        const Vector r_hat = increment_from_estimate(proc, t, t - tm, perturbed, la).values;
        const Vector r_star = increment_from_estimate(proc, t, t - tm, exact, la).values;
        const double lhs = (r_hat - r_star).norm();
        RandomSource probe = rng.split(r.trials);
        const double lt = lipschitz_t_estimate(proc, tm, t, opt.lipschitz_probes, prior, probe);
        const double rhs = (proc.lipschitz_x(t) + proc.lipschitz_x(tm)) * root_n * bound + 2.0 * lt * opt.delta_t +
                           2.0 * opt.epsilon;
        r.max_lhs = std::max(r.max_lhs, lhs);
        r.min_rhs = std::min(r.min_rhs, rhs);
        r.min_slack = std::min(r.min_slack, rhs - lhs);
        if (lhs > rhs) ++r.violations;
        ++r.trials;
    }
    r.passed = r.violations == 0;
    return r;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct RunSpec {
    Signal x0;
    Signal measurement;
    std::uint64_t sampler_seed = 0;
};

/// Clean signal, measurement and sampler seed of run r.
inline RunSpec make_run(const GaussianPrior& prior, const DegradationProcess& proc, const NoiseSchedule& noise,
                        std::uint64_t seed, std::size_t r) {
    RandomSource rng(seed, r);
    RunSpec spec;
    spec.x0 = prior_sample(prior, rng);
    spec.measurement = sdp_sample(proc, noise, spec.x0, 1.0, rng);
    spec.sampler_seed = splitmix64(seed ^ splitmix64(r + 0x51ED));
    return spec;
}

struct CurvePoint {
    double t = 0.0;
    double psnr_mean = 0.0;
    double psnr_std = 0.0;
    double nll_mean = 0.0;
    double nll_std = 0.0;
    double eps_dc_mean = 0.0;
};

struct CurveReport {
    std::vector<CurvePoint> points;
    std::size_t runs = 0;
    std::size_t peak_index = 0;
    bool interior_peak = false;     // 0 < peak index < last index
    bool nll_drops_after_peak = false;  // nll(final) < nll(t*)
};

/// Mean and standard deviation of per-step metrics over `runs` independent
/// trajectories.
inline CurveReport perception_distortion_sweep(const Denoiser& den, const DegradationProcess& proc,
                                               const NoiseSchedule& noise, const GaussianPrior& prior,
                                               const SamplerConfig& cfg, std::size_t runs, std::uint64_t seed,
                                               std::size_t jobs = 1) {
    if (runs == 0) throw std::invalid_argument("sweep: need at least one run");
    std::vector<Trajectory> trajs(runs);
    parallel_for(runs, jobs, [&](std::size_t r) {
        const RunSpec spec = make_run(prior, proc, noise, seed, r);
        SamplerConfig c = cfg;
        c.seed = spec.sampler_seed;
        c.keep_signals = false;
        trajs[r] = dirac_sample(den, proc, noise, spec.measurement, c, {&prior, &spec.x0});
    });
    CurveReport rep;
    rep.runs = runs;
    const std::size_t steps = trajs.front().steps.size();
    for (const auto& tr : trajs) {
        if (tr.aborted || tr.steps.size() != steps) throw std::runtime_error("sweep: a trajectory aborted");
    }
    const double count = static_cast<double>(runs);
    for (std::size_t k = 0; k < steps; ++k) {
        CurvePoint p;
        p.t = trajs.front().steps[k].t;
        double sp = 0.0, sp2 = 0.0, sn = 0.0, sn2 = 0.0, se = 0.0;
        for (const auto& tr : trajs) {
            const auto& s = tr.steps[k];
            sp += s.psnr;
            sp2 += s.psnr * s.psnr;
            sn += s.prior_nll;
            sn2 += s.prior_nll * s.prior_nll;
            se += s.eps_dc;
        }
        p.psnr_mean = sp / count;
        p.nll_mean = sn / count;
        p.eps_dc_mean = se / count;
        p.psnr_std = std::sqrt(std::max(sp2 / count - p.psnr_mean * p.psnr_mean, 0.0));
        p.nll_std = std::sqrt(std::max(sn2 / count - p.nll_mean * p.nll_mean, 0.0));
        rep.points.push_back(p);
    }
    for (std::size_t k = 1; k < steps; ++k) {
        if (rep.points[k].psnr_mean > rep.points[rep.peak_index].psnr_mean) rep.peak_index = k;
    }
    rep.interior_peak = rep.peak_index > 0 && rep.peak_index + 1 < steps;
    rep.nll_drops_after_peak = rep.points.back().nll_mean < rep.points[rep.peak_index].nll_mean;
    return rep;
}

inline std::string curve_csv(const CurveReport& r) {
    std::string out = "step,t,psnr_mean,psnr_std,nll_mean,nll_std,eps_dc_mean\n";
    for (std::size_t k = 0; k < r.points.size(); ++k) {
        const auto& p = r.points[k];
        out += std::to_string(k) + "," + io::format_real(p.t) + "," + io::format_real(p.psnr_mean) + "," +
               io::format_real(p.psnr_std) + "," + io::format_real(p.nll_mean) + "," + io::format_real(p.nll_std) + "," +
               io::format_real(p.eps_dc_mean) + "\n";
    }
    return out;
}

inline const std::vector<double>& robustness_multipliers() {
    static const std::vector<double> grid{0.6, 0.8, 1.0, 1.2, 1.4};
    return grid;
}
inline const std::vector<double>& robustness_sigmas() {
    static const std::vector<double> grid{0.0, 0.02, 0.04, 0.05, 0.06, 0.08};
    return grid;
}

struct RobustnessPoint {
    std::string axis;  // "multiplier" or "sigma"
    double value = 0.0;
    double psnr_mean = 0.0;
    double nll_mean = 0.0;
    double eps_dc_mean = 0.0;
};

using ProcessFactory = std::function<ProcessPtr(double multiplier)>;

/// Samples with the training process and noise while the measurement comes
/// from a perturbed operator (w multiplied by k) or a perturbed noise level.
/// Every grid point reuses the same clean signals and noise draws.
inline std::vector<RobustnessPoint> robustness_sweep(const Denoiser& den, const DegradationProcess& proc_train,
                                                     const NoiseSchedule& noise_train, const GaussianPrior& prior,
                                                     const ProcessFactory& perturbed, const SamplerConfig& cfg,
                                                     std::size_t runs, std::uint64_t seed,
                                                     std::span<const double> multipliers, std::span<const double> sigmas,
                                                     std::size_t jobs = 1) {
    if (runs == 0) throw std::invalid_argument("robustness sweep: need at least one run");
    struct Job {
        std::string axis;
        double value;
    };
    std::vector<Job> grid;
    for (double k : multipliers) grid.push_back({"multiplier", k});
    for (double s : sigmas) grid.push_back({"sigma", s});

    std::vector<RobustnessPoint> points(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const ProcessPtr meas_proc = grid[g].axis == "multiplier" ? perturbed(grid[g].value) : nullptr;
        const double sigma = grid[g].axis == "sigma" ? grid[g].value : noise_train.sigma(1.0);
        std::vector<std::array<double, 3>> metrics(runs);
        parallel_for(runs, jobs, [&](std::size_t r) {
            RandomSource rng(seed, r);
            const Signal x0 = prior_sample(prior, rng);
            const Vector z = rng.normal_vector(x0.size());
            const DegradationProcess& mp = meas_proc ? *meas_proc : proc_train;
            Signal y = mp.apply(1.0, x0);
            y.values += sigma * z;
            SamplerConfig c = cfg;
            c.seed = splitmix64(seed ^ splitmix64(r + 0x51ED));
            c.keep_signals = false;
            const auto traj = dirac_sample(den, proc_train, noise_train, y, c, {&prior, &x0});
            if (traj.aborted) throw std::runtime_error("robustness sweep: " + traj.message);
            metrics[r] = {psnr(traj.output, x0), prior_nll(prior, traj.output), eps_dc(proc_train, y, traj.final_estimate)};
        });
        RobustnessPoint p{grid[g].axis, grid[g].value, 0.0, 0.0, 0.0};
        for (const auto& m : metrics) {
            p.psnr_mean += m[0];
            p.nll_mean += m[1];
            p.eps_dc_mean += m[2];
        }
        p.psnr_mean /= static_cast<double>(runs);
        p.nll_mean /= static_cast<double>(runs);
        p.eps_dc_mean /= static_cast<double>(runs);
        points[g] = p;
    }
    return points;
}

inline std::string robustness_csv(std::span<const RobustnessPoint> points) {
    std::string out = "axis,value,psnr_mean,nll_mean,eps_dc_mean\n";
    for (const auto& p : points) {
        out += p.axis + "," + io::format_real(p.value) + "," + io::format_real(p.psnr_mean) + "," +
               io::format_real(p.nll_mean) + "," + io::format_real(p.eps_dc_mean) + "\n";
    }
    return out;
}

}  // namespace dirac
