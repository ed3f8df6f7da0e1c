#pragma once

#include "dirac/denoise.hpp"

namespace dirac {

enum class GuidanceMode { none, std_scaled, error_scaled };
enum class OutputMode { final_iterate, posterior_mean };
enum class IncrementKind { LA, SLA, LB, SLB };

inline std::string to_string(GuidanceMode m) {
    switch (m) {
        case GuidanceMode::none: return "none";
        case GuidanceMode::std_scaled: return "std_scaled";
        case GuidanceMode::error_scaled: return "error_scaled";
    }
    return "?";
}
inline GuidanceMode guidance_from_string(const std::string& s) {
    if (s == "none") return GuidanceMode::none;
    if (s == "std_scaled") return GuidanceMode::std_scaled;
    if (s == "error_scaled") return GuidanceMode::error_scaled;
    throw std::invalid_argument("unknown guidance mode '" + s + "'");
}
inline std::string to_string(OutputMode m) { return m == OutputMode::final_iterate ? "final_iterate" : "posterior_mean"; }
inline OutputMode output_from_string(const std::string& s) {
    if (s == "final_iterate") return OutputMode::final_iterate;
    if (s == "posterior_mean") return OutputMode::posterior_mean;
    throw std::invalid_argument("unknown output mode '" + s + "'");
}
inline std::string to_string(IncrementKind k) {
    switch (k) {
        case IncrementKind::LA: return "LA";
        case IncrementKind::SLA: return "SLA";
        case IncrementKind::LB: return "LB";
        case IncrementKind::SLB: return "SLB";
    }
    return "?";
}
inline IncrementKind increment_from_string(const std::string& s) {
    if (s == "LA") return IncrementKind::LA;
    if (s == "SLA") return IncrementKind::SLA;
    if (s == "LB") return IncrementKind::LB;
    if (s == "SLB") return IncrementKind::SLB;
    throw std::invalid_argument("unknown increment variant '" + s + "' (expected LA, SLA, LB or SLB)");
}

/// Incremental reconstruction estimator; `small_dt` is the delta t of the
/// SLA and SLB variants.
struct IncrementVariant {
    IncrementKind kind = IncrementKind::LA;
    double small_dt = 0.0;

    static IncrementVariant la() { return {}; }
    static IncrementVariant lb() { return {IncrementKind::LB, 0.0}; }
    static IncrementVariant sla(double dt) { return {IncrementKind::SLA, dt}; }
    static IncrementVariant slb(double dt) { return {IncrementKind::SLB, dt}; }
};

struct SamplerConfig {
    double delta_t = 0.02;
    double t_stop = 0.0;
    double eta = 0.0;
    GuidanceMode guidance = GuidanceMode::none;
    OutputMode output = OutputMode::posterior_mean;
    IncrementVariant variant;
    std::uint64_t seed = 0;
    bool enable_denoising = true;
    bool enable_noise = true;
    // Keep per-step iterates and estimates in the trajectory.
    bool keep_signals = true;

    void validate() const {
        if (!(delta_t > 0.0 && delta_t <= 1.0)) throw std::invalid_argument("sampler: delta_t must lie in (0,1]");
        if (!(t_stop >= 0.0 && t_stop < 1.0)) throw std::invalid_argument("sampler: t_stop must lie in [0,1)");
        if (!(eta >= 0.0)) throw std::invalid_argument("sampler: eta must be non-negative");
        if (variant.kind == IncrementKind::SLA || variant.kind == IncrementKind::SLB) {
            if (!(variant.small_dt > 0.0 && variant.small_dt < delta_t)) {
                throw std::invalid_argument("sampler: SLA/SLB need 0 < small_dt < delta_t");
            }
        }
    }
};

/// PO preset: run to t = 0 with standard-deviation-scaled guidance.
inline SamplerConfig perception_optimized_config() {
    SamplerConfig c;
    c.delta_t = 0.02;
    c.t_stop = 0.0;
    c.eta = 0.5;
    c.guidance = GuidanceMode::std_scaled;
    c.output = OutputMode::posterior_mean;
    return c;
}

/// DO preset: early stop at `t_stop`, no guidance.
inline SamplerConfig distortion_optimized_config(double t_stop) {
    SamplerConfig c;
    c.delta_t = 0.02;
    c.t_stop = t_stop;
    c.output = OutputMode::posterior_mean;
    return c;
}

struct TrajectoryStep {
    std::size_t step = 0;
    double t = 0.0;    // severity of the iterate at the start of the step
    double tau = 0.0;  // severity reached by the update
    Signal iterate;    // y_t
    Signal estimate;   // x0_hat(y_t, t)
    double eps_dc = 0.0;
    // Metrics of the iterate y_t against the truth and under the prior.
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double prior_nll = std::numeric_limits<double>::quiet_NaN();
    double psnr_estimate = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    Signal output;
    Signal final_iterate;
    Signal final_estimate;
    bool aborted = false;
    std::string message;
};

/// mean((y_tilde - A_1(x0_hat))^2).
inline double eps_dc(const DegradationProcess& proc, const Signal& measurement, const Signal& x0_hat) {
    return mse(measurement, proc.apply(1.0, x0_hat));
}

namespace detail {

inline double snap_severity(double t) {
    if (std::abs(t) < 1e-12) return 0.0;
    if (std::abs(t - 1.0) < 1e-12) return 1.0;
    return t;
}

}  // namespace detail

/// Incremental reconstruction from a precomputed estimate Phi. `delta_t` is
/// clamped so that t - delta_t >= 0.
inline Signal increment_from_estimate(const DegradationProcess& proc, double t, double delta_t, const Signal& phi,
                                      const IncrementVariant& variant) {
    if (!(delta_t >= 0.0)) throw std::invalid_argument("increment: delta_t must be non-negative");
    const double tau = detail::snap_severity(std::max(t - delta_t, 0.0));
    const double dt = t - tau;
    if (dt == 0.0) return Signal::zeros(phi.shape);
    const Vector at = proc.apply(t, phi).values;
    switch (variant.kind) {
        case IncrementKind::LA: return phi.with_values(proc.apply(tau, phi).values - at);
        case IncrementKind::SLA: {
            if (!(variant.small_dt > 0.0)) throw std::invalid_argument("SLA: small_dt must be positive");
            const double back = detail::snap_severity(std::max(t - variant.small_dt, 0.0));
            if (t - back == 0.0) return Signal::zeros(phi.shape);
            return phi.with_values((dt / (t - back)) * (proc.apply(back, phi).values - at));
        }
        case IncrementKind::LB: {
            const double ahead = detail::snap_severity(std::min(t + dt, 1.0));
            return phi.with_values(at - proc.apply(ahead, phi).values);
        }
        case IncrementKind::SLB: {
            if (!(variant.small_dt > 0.0)) throw std::invalid_argument("SLB: small_dt must be positive");
            const double ahead = detail::snap_severity(std::min(t + variant.small_dt, 1.0));
            if (ahead - t == 0.0) return Signal::zeros(phi.shape);
            return phi.with_values((dt / (ahead - t)) * (at - proc.apply(ahead, phi).values));
        }
    }
    throw std::invalid_argument("increment: unknown variant");
}

/// R_hat(t, dt; y_t) with Phi = den.estimate(y_t, t) computed once.
inline Signal incremental_estimate(const Denoiser& den, const DegradationProcess& proc, double t, double delta_t,
                                   const Signal& y, const IncrementVariant& variant) {
    return increment_from_estimate(proc, t, delta_t, den.estimate(y, t), variant);
}

/// y_d = ((sigma_t^2 - sigma_tau^2) / sigma_t^2) (A_t(x0_hat) - y).
inline Signal denoising_term(const DegradationProcess& proc, const NoiseSchedule& noise, double t, double delta_t,
                             const Signal& y, const Signal& x0_hat) {
    const double var = noise.variance(t);
    if (var == 0.0) throw std::domain_error("denoising term: sigma_t = 0");
    const double tau = detail::snap_severity(std::max(t - delta_t, 0.0));
    const double factor = (var - noise.variance(tau)) / var;
    return y.with_values(factor * (proc.apply(t, x0_hat).values - y.values));
}

/// eta_t (sigma_tau^2 - sigma_t^2) grad_y ||y_tilde - A_1(Phi(y, t))||^2.
/// The gradient is -2 J^T M_1^T (y_tilde - A_1(Phi)); eta_t is
/// eta / (2 sigma_1^2) for std_scaled and eta / ||residual|| for error_scaled.
inline Signal guidance_term(const Denoiser& den, const DegradationProcess& proc, const NoiseSchedule& noise, double t,
                            double delta_t, const Signal& y, const Signal& measurement, GuidanceMode mode, double eta) {
    if (mode == GuidanceMode::none) throw std::invalid_argument("guidance term: mode is none");
    if (!den.supports_vjp()) throw std::invalid_argument("guidance needs a denoiser with vector-Jacobian products");
    const double tau = detail::snap_severity(std::max(t - delta_t, 0.0));
    const double dvar = noise.variance(tau) - noise.variance(t);
    if (eta == 0.0 || dvar == 0.0) return Signal::zeros(y.shape);
    const Signal phi = den.estimate(y, t);
    const Vector residual = measurement.values - proc.apply(1.0, phi).values;
    double eta_t = 0.0;
    if (mode == GuidanceMode::std_scaled) {
        eta_t = eta / (2.0 * noise.variance(1.0));
    } else {
        eta_t = eta / std::max(residual.norm(), 1e-12);
    }
    const Signal back = den.vjp(y, t, y.with_values(proc.apply_adjoint(1.0, residual)));
    return y.with_values((eta_t * dvar * -2.0) * back.values);
}

struct SampleContext {
    const GaussianPrior* prior = nullptr;  // enables prior_nll
    const Signal* truth = nullptr;         // enables psnr
};

/// Severities visited by the reverse loop: t_i = 1 - i dt for i < floor(1/dt),
/// stopping once t_i <= t_stop, plus a final partial step to 0 when 1/dt is
/// not integral.
inline std::vector<std::pair<double, double>> reverse_grid(double delta_t, double t_stop) {
    std::vector<std::pair<double, double>> grid;
    const auto count = static_cast<std::size_t>(std::floor(1.0 / delta_t + 1e-9));
    for (std::size_t i = 0; i < count; ++i) {
        const double t = detail::snap_severity(1.0 - delta_t * static_cast<double>(i));
        if (i > 0 && t <= t_stop + 1e-12) return grid;
        grid.emplace_back(t, detail::snap_severity(std::max(t - delta_t, 0.0)));
    }
    const double rest = 1.0 - delta_t * static_cast<double>(count);
    if (rest > 1e-12 && rest > t_stop + 1e-12) grid.emplace_back(rest, 0.0);
    return grid;
}

/// One reverse step: y + y_r + y_d + y_g + sqrt(sigma_t^2 - sigma_tau^2) z.
struct StepTerms {
    Signal estimate;
    Signal increment;
    Signal denoise;
    Signal guidance;
    Signal noise;
};

inline StepTerms reverse_step_terms(const Denoiser& den, const DegradationProcess& proc, const NoiseSchedule& noise,
                                    const Signal& measurement, const SamplerConfig& cfg, double t, double tau,
                                    const Signal& y, RandomSource& rng) {
    const double dt = t - tau;
    StepTerms s;
    s.estimate = den.estimate(y, t);
    s.increment = increment_from_estimate(proc, t, dt, s.estimate, cfg.variant);
    s.denoise = cfg.enable_denoising ? denoising_term(proc, noise, t, dt, y, s.estimate) : Signal::zeros(y.shape);
    s.guidance = cfg.guidance != GuidanceMode::none && cfg.eta > 0.0
                     ? guidance_term(den, proc, noise, t, dt, y, measurement, cfg.guidance, cfg.eta)
                     : Signal::zeros(y.shape);
    s.noise = Signal::zeros(y.shape);
    if (cfg.enable_noise) {
        const double scale = std::sqrt(std::max(noise.variance(t) - noise.variance(tau), 0.0));
        Vector z = rng.normal_vector(y.size());
        if (scale > 0.0) s.noise.values = scale * z;
    }
    return s;
}

/// Reverse sampler. Starts from the measurement at t = 1 and walks the
/// reverse grid; see `reverse_grid`. Deterministic given `cfg.seed`.
inline Trajectory dirac_sample(const Denoiser& den, const DegradationProcess& proc, const NoiseSchedule& noise,
                               const Signal& measurement, const SamplerConfig& cfg, const SampleContext& ctx = {}) {
    cfg.validate();
    if (!(measurement.shape == proc.shape())) throw std::invalid_argument("sampler: measurement shape does not match process");
    if (cfg.guidance != GuidanceMode::none && cfg.eta > 0.0 && !den.supports_vjp()) {
        throw std::invalid_argument("sampler: guidance needs a denoiser with vector-Jacobian products");
    }
    RandomSource rng(cfg.seed);
    Trajectory traj;
    Signal y = measurement;
    Signal last_estimate = measurement;
    const auto grid = reverse_grid(cfg.delta_t, cfg.t_stop);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto [t, tau] = grid[i];
        const StepTerms s = reverse_step_terms(den, proc, noise, measurement, cfg, t, tau, y, rng);
        last_estimate = s.estimate;

        TrajectoryStep rec;
        rec.step = i;
        rec.t = t;
        rec.tau = tau;
        rec.eps_dc = eps_dc(proc, measurement, s.estimate);
        if (ctx.truth) {
            rec.psnr = psnr(y, *ctx.truth);
            rec.psnr_estimate = psnr(s.estimate, *ctx.truth);
        }
        if (ctx.prior) rec.prior_nll = prior_nll(*ctx.prior, y);
        if (cfg.keep_signals) {
            rec.iterate = y;
            rec.estimate = s.estimate;
        }
        y.values += s.increment.values + s.denoise.values + s.guidance.values + s.noise.values;
        traj.steps.push_back(std::move(rec));
        if (!y.all_finite() || !s.estimate.all_finite()) {
            traj.aborted = true;
            traj.message = "non-finite iterate at step " + std::to_string(i) + " (t = " + io::format_real(t) + ")";
            break;
        }
    }
    traj.final_iterate = y;
    traj.final_estimate = last_estimate;
    traj.output = cfg.output == OutputMode::posterior_mean ? last_estimate : y;
    return traj;
}

/// CSV with header `step,t,eps_dc,psnr,prior_nll`, 9 significant digits.
inline std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "step,t,eps_dc,psnr,prior_nll\n";
    for (const auto& s : traj.steps) {
        out += std::to_string(s.step) + "," + io::format_real(s.t) + "," + io::format_real(s.eps_dc) + "," +
               io::format_real(s.psnr) + "," + io::format_real(s.prior_nll) + "\n";
    }
    return out;
}

}  // namespace dirac
