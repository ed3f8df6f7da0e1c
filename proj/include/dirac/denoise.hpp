#pragma once

#include "dirac/io.hpp"
#include "dirac/sdp.hpp"

#include <optional>
#include <span>

namespace dirac {

/// x0_hat = Phi(y, t), optionally with vector-Jacobian products J^T v.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual std::string name() const = 0;
    virtual Signal estimate(const Signal& y, double t) const = 0;
    virtual bool supports_vjp() const { return false; }
    virtual Signal vjp(const Signal& y, double t, const Signal& v) const {
        (void)y;
        (void)t;
        (void)v;
        throw std::logic_error("denoiser '" + name() + "' does not provide vector-Jacobian products");
    }
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

/// Closed-form posterior mean E[x0 | y_t] of the Gaussian model.
class OracleDenoiser final : public Denoiser {
public:
    explicit OracleDenoiser(std::shared_ptr<const LinearGaussianModel> model) : model_(std::move(model)) {
        if (!model_) throw std::invalid_argument("OracleDenoiser: null model");
    }

    std::string name() const override { return "oracle"; }
    const LinearGaussianModel& model() const { return *model_; }

    Signal estimate(const Signal& y, double t) const override { return model_->posterior_mean(y, t); }
    bool supports_vjp() const override { return true; }
    Signal vjp(const Signal& y, double t, const Signal& v) const override {
        require_same_shape(y, v, "oracle vjp");
        return v.with_values(model_->factors(t)->gain.transpose() * v.values);
    }

private:
    std::shared_ptr<const LinearGaussianModel> model_;
};

/// Always returns the true clean signal; its Jacobian is zero.
class GroundTruthDenoiser final : public Denoiser {
public:
    explicit GroundTruthDenoiser(Signal x0) : x0_(std::move(x0)) {}

    std::string name() const override { return "ground_truth"; }
    Signal estimate(const Signal& y, double) const override {
        require_same_shape(y, x0_, "ground-truth estimate");
        return x0_;
    }
    bool supports_vjp() const override { return true; }
    Signal vjp(const Signal& y, double, const Signal& v) const override {
        require_same_shape(y, v, "ground-truth vjp");
        return Signal::zeros(v.shape);
    }

private:
    Signal x0_;
};

/// Per-severity-bin affine map Phi(y, t) = D_b y + c_b with b = bin(t).
class AffineDenoiser final : public Denoiser {
public:
    AffineDenoiser(std::size_t bins, Shape shape) : shape_(shape) {
        if (bins == 0) throw std::invalid_argument("affine denoiser: need at least one bin");
        const auto n = static_cast<Eigen::Index>(shape.size());
        d_.assign(bins, Matrix::Zero(n, n));
        c_.assign(bins, Vector::Zero(n));
    }

    /// D = 0.5 I and c = 0.5 mu in every bin.
    static AffineDenoiser initial(std::size_t bins, const GaussianPrior& prior) {
        AffineDenoiser m(bins, prior.shape());
        const auto n = static_cast<Eigen::Index>(prior.dim());
        for (std::size_t b = 0; b < bins; ++b) {
            m.d_[b] = 0.5 * Matrix::Identity(n, n);
            m.c_[b] = 0.5 * prior.mean().values;
        }
        return m;
    }

    /// Per-bin copy of the oracle's affine map at the bin center.
    static AffineDenoiser from_oracle(std::size_t bins, const LinearGaussianModel& model) {
        AffineDenoiser m(bins, model.prior().shape());
        for (std::size_t b = 0; b < bins; ++b) {
            const auto f = model.factors(m.bin_center(b));
            m.d_[b] = f->gain;
            m.c_[b] = model.prior().mean().values - f->gain * f->mean_y;
        }
        return m;
    }

    std::string name() const override { return "affine"; }
    Shape shape() const { return shape_; }
    std::size_t bins() const { return d_.size(); }
    std::size_t dim() const { return shape_.size(); }

    std::size_t bin_of(double t) const {
        if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("affine denoiser: severity outside [0,1]");
        const auto b = static_cast<std::size_t>(std::floor(static_cast<double>(bins()) * t));
        return std::min(b, bins() - 1);
    }
    double bin_center(std::size_t b) const { return (static_cast<double>(b) + 0.5) / static_cast<double>(bins()); }

    Matrix& d(std::size_t b) { return d_.at(b); }
    const Matrix& d(std::size_t b) const { return d_.at(b); }
    Vector& c(std::size_t b) { return c_.at(b); }
    const Vector& c(std::size_t b) const { return c_.at(b); }

    Signal estimate(const Signal& y, double t) const override {
        check(y);
        const auto b = bin_of(t);
        return y.with_values(d_[b] * y.values + c_[b]);
    }
    bool supports_vjp() const override { return true; }
    Signal vjp(const Signal& y, double t, const Signal& v) const override {
        check(y);
        check(v);
        return v.with_values(d_[bin_of(t)].transpose() * v.values);
    }

private:
    void check(const Signal& s) const {
        if (!(s.shape == shape_)) throw std::invalid_argument("affine denoiser: shape " + s.shape.to_string() + " does not match model");
    }

    Shape shape_;
    std::vector<Matrix> d_;
    std::vector<Vector> c_;
};

/// s(y, t) = (A_t(Phi(y, t)) - y) / sigma_t^2.
inline Signal score_from_denoiser(const Denoiser& den, const DegradationProcess& proc, const NoiseSchedule& noise,
                                  const Signal& y, double t) {
    const double var = noise.variance(t);
    if (var == 0.0) throw std::domain_error("score_from_denoiser: sigma_t = 0");
    return y.with_values((proc.apply(t, den.estimate(y, t)).values - y.values) / var);
}

// ---------------------------------------------------------------------------
// Training losses
// ---------------------------------------------------------------------------

struct TrainingSample {
    Signal x0;
    Signal y;
    double t;
};

inline std::vector<TrainingSample> sample_batch(const GaussianPrior& prior, const DegradationProcess& proc,
                                                const NoiseSchedule& noise, std::size_t size, RandomSource& rng) {
    std::vector<TrainingSample> batch;
    batch.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        const double t = rng.uniform();
        Signal x0 = prior_sample(prior, rng);
        Signal y = sdp_sample(proc, noise, x0, t, rng);
        batch.push_back({std::move(x0), std::move(y), t});
    }
    return batch;
}

/// w(t) = 1 / sigma_t^2.
inline double loss_weight(const NoiseSchedule& noise, double t) {
    const double var = noise.variance(t);
    if (var == 0.0) throw std::domain_error("loss weight: sigma_t = 0");
    return 1.0 / var;
}

inline double lookback_severity(double t, double delta_t) { return std::max(t - delta_t, 0.0); }

/// Batch mean of w(t) ||A_tau(Phi(y_t, t)) - A_tau(x0)||^2 with tau = max(t - dt, 0).
inline double loss_incremental(const Denoiser& den, const DegradationProcess& proc, const NoiseSchedule& noise,
                               double delta_t, std::span<const TrainingSample> batch) {
    if (!(delta_t >= 0.0 && delta_t <= 1.0)) throw std::invalid_argument("loss_incremental: delta_t outside [0,1]");
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    double sum = 0.0;
    for (const auto& s : batch) {
        const double tau = lookback_severity(s.t, delta_t);
        const Vector r = proc.apply(tau, den.estimate(s.y, s.t)).values - proc.apply(tau, s.x0).values;
        sum += loss_weight(noise, s.t) * r.squaredNorm();
    }
    return sum / static_cast<double>(batch.size());
}

/// Batch mean of w(t) ||A_t(Phi(y_t, t)) - A_t(x0)||^2.
inline double loss_denoising(const Denoiser& den, const DegradationProcess& proc, const NoiseSchedule& noise,
                             std::span<const TrainingSample> batch) {
    return loss_incremental(den, proc, noise, 0.0, batch);
}

struct LossKind {
    enum class Kind { denoising, incremental };
    Kind kind = Kind::denoising;
    double delta_t = 0.0;

    static LossKind denoising() { return {}; }
    static LossKind incremental(double delta_t) { return {Kind::incremental, delta_t}; }

    double lookback() const { return kind == Kind::denoising ? 0.0 : delta_t; }
    std::string to_string() const {
        return kind == Kind::denoising ? "denoising" : "incremental(" + io::format_real(delta_t) + ")";
    }
};

inline double evaluate_loss(const Denoiser& den, const DegradationProcess& proc, const NoiseSchedule& noise,
                            const LossKind& kind, std::span<const TrainingSample> batch) {
    return loss_incremental(den, proc, noise, kind.lookback(), batch);
}

struct AffineGradient {
    std::vector<Matrix> d;
    std::vector<Vector> c;

    double squared_norm() const {
        double s = 0.0;
        for (const auto& m : d) s += m.squaredNorm();
        for (const auto& v : c) s += v.squaredNorm();
        return s;
    }
};

/// Analytic gradient of the batch loss with respect to every (D_b, c_b).
/// Per sample: g = 2 w(t) M_tau^T M_tau (D y + c - x0); dD += g y^T, dc += g;
/// summed in batch order and divided by the batch size.
inline AffineGradient affine_loss_gradient(const AffineDenoiser& model, const DegradationProcess& proc,
                                           const NoiseSchedule& noise, const LossKind& kind,
                                           std::span<const TrainingSample> batch) {
    if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
    const auto n = static_cast<Eigen::Index>(model.dim());
    AffineGradient g{std::vector<Matrix>(model.bins(), Matrix::Zero(n, n)), std::vector<Vector>(model.bins(), Vector::Zero(n))};
    for (const auto& s : batch) {
        const auto b = model.bin_of(s.t);
        const double tau = lookback_severity(s.t, kind.lookback());
        const Vector e = model.d(b) * s.y.values + model.c(b) - s.x0.values;
        const Vector gs = 2.0 * loss_weight(noise, s.t) * proc.apply_adjoint(tau, proc.apply_linear(tau, e));
        g.d[b].noalias() += gs * s.y.values.transpose();
        g.c[b] += gs;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& m : g.d) m *= inv;
    for (auto& v : g.c) v *= inv;
    return g;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class Optimizer { sgd, preconditioned };

inline std::string to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "preconditioned"; }

inline Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "preconditioned") return Optimizer::preconditioned;
    throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd or preconditioned)");
}

struct TrainConfig {
    LossKind loss = LossKind::denoising();
    std::size_t steps = 2000;
    double step_size = 1e-2;
    std::size_t batch_size = 32;
    Optimizer optimizer = Optimizer::sgd;
    // Samples per bin used to estimate the input second moment for the
    // preconditioned optimizer.
    std::size_t warmup_per_bin = 512;
    // Relative ridge added to the second-moment estimate.
    double ridge = 1e-6;
    // Average iterates over the second half of training.
    bool average_tail = true;
    double divergence_threshold = 1e6;

    void validate() const {
        if (!(step_size > 0.0)) throw std::invalid_argument("training: step size must be positive");
        if (batch_size == 0) throw std::invalid_argument("training: batch size must be positive");
        if (loss.kind == LossKind::Kind::incremental && !(loss.delta_t >= 0.0 && loss.delta_t <= 1.0)) {
            throw std::invalid_argument("training: delta_t must lie in [0,1]");
        }
        if (optimizer == Optimizer::preconditioned && warmup_per_bin == 0) {
            throw std::invalid_argument("training: preconditioned optimizer needs warm-up samples");
        }
        if (!(ridge >= 0.0)) throw std::invalid_argument("training: ridge must be non-negative");
    }
};

struct TrainingReport {
    std::vector<double> losses;  // batch loss before each update
    std::size_t steps_completed = 0;
    bool diverged = false;
    std::string message;
};

namespace detail {

// Inverse of the per-bin mean of 2 w(t) [y;1][y;1]^T, each estimated from
// fresh samples with t uniform inside the bin.
inline std::vector<Matrix> input_preconditioners(const AffineDenoiser& model, const GaussianPrior& prior,
                                                 const DegradationProcess& proc, const NoiseSchedule& noise,
                                                 const TrainConfig& cfg, RandomSource& rng) {
    const auto n1 = static_cast<Eigen::Index>(model.dim() + 1);
    if (cfg.warmup_per_bin < model.dim() + 1) {
        throw std::invalid_argument("training: preconditioned optimizer needs warmup >= n + 1 = " + std::to_string(model.dim() + 1) +
                                    " samples per bin");
    }
    std::vector<Matrix> out;
    for (std::size_t b = 0; b < model.bins(); ++b) {
        Matrix h = Matrix::Zero(n1, n1);
        const double lo = static_cast<double>(b) / static_cast<double>(model.bins());
        const double hi = static_cast<double>(b + 1) / static_cast<double>(model.bins());
        Vector ya(n1);
        for (std::size_t s = 0; s < cfg.warmup_per_bin; ++s) {
            const double t = std::min(rng.uniform(lo, hi), 1.0);
            const Signal x0 = prior_sample(prior, rng);
            const Signal y = sdp_sample(proc, noise, x0, t, rng);
            ya.head(n1 - 1) = y.values;
            ya[n1 - 1] = 1.0;
            h.selfadjointView<Eigen::Lower>().rankUpdate(ya, 2.0 * loss_weight(noise, t));
        }
        h = h.selfadjointView<Eigen::Lower>();
        h /= static_cast<double>(cfg.warmup_per_bin);
        h.diagonal().array() += cfg.ridge * h.trace() / static_cast<double>(n1);
        Eigen::LLT<Matrix> llt(h);
        if (llt.info() != Eigen::Success) throw std::runtime_error("training: preconditioner is not positive definite");
        out.push_back(llt.solve(Matrix::Identity(n1, n1)));
    }
    return out;
}

}  // namespace detail

/// Minibatch gradient descent on the chosen loss with fresh (x0, t, y_t)
/// draws each step, t ~ U[0,1]. `preconditioned` right-multiplies each bin's
/// gradient [dD dc] by the inverse input second moment; `sgd` uses it as is.
/// Training stops early with `diverged` set when a batch loss exceeds the
/// divergence threshold or is not finite.
inline TrainingReport train_affine(AffineDenoiser& model, const DegradationProcess& proc, const NoiseSchedule& noise,
                                   const GaussianPrior& prior, const TrainConfig& cfg, RandomSource& rng) {
    cfg.validate();
    if (!(model.shape() == prior.shape()) || !(proc.shape() == prior.shape())) {
        throw std::invalid_argument("train_affine: model, process and prior shapes differ");
    }
    TrainingReport report;
    if (cfg.steps == 0) return report;

    RandomSource warm = rng.split(0xC0FFEE);
    std::vector<Matrix> precond;
    if (cfg.optimizer == Optimizer::preconditioned) precond = detail::input_preconditioners(model, prior, proc, noise, cfg, warm);

    const auto n = static_cast<Eigen::Index>(model.dim());
    const std::size_t tail_start = cfg.average_tail ? cfg.steps / 2 : cfg.steps;
    std::vector<Matrix> avg_d(model.bins(), Matrix::Zero(n, n));
    std::vector<Vector> avg_c(model.bins(), Vector::Zero(n));
    std::size_t averaged = 0;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const auto batch = sample_batch(prior, proc, noise, cfg.batch_size, rng);
        const double loss = evaluate_loss(model, proc, noise, cfg.loss, batch);
        report.losses.push_back(loss);
        if (!std::isfinite(loss) || loss > cfg.divergence_threshold) {
            report.diverged = true;
            report.message = "diverged at step " + std::to_string(step) + ": loss " + io::format_real(loss);
            return report;
        }
        const auto g = affine_loss_gradient(model, proc, noise, cfg.loss, batch);
        for (std::size_t b = 0; b < model.bins(); ++b) {
            if (cfg.optimizer == Optimizer::sgd) {
                model.d(b) -= cfg.step_size * g.d[b];
                model.c(b) -= cfg.step_size * g.c[b];
            } else {
                Matrix full(n, n + 1);
                full << g.d[b], g.c[b];
                const Matrix step_dir = full * precond[b];
                model.d(b) -= cfg.step_size * step_dir.leftCols(n);
                model.c(b) -= cfg.step_size * step_dir.col(n);
            }
        }
        report.steps_completed = step + 1;
        if (step >= tail_start) {
            for (std::size_t b = 0; b < model.bins(); ++b) {
                avg_d[b] += model.d(b);
                avg_c[b] += model.c(b);
            }
            ++averaged;
        }
    }
    if (averaged > 0) {
        for (std::size_t b = 0; b < model.bins(); ++b) {
            model.d(b) = avg_d[b] / static_cast<double>(averaged);
            model.c(b) = avg_c[b] / static_cast<double>(averaged);
        }
    }
    return report;
}

/// Expected gradient of the per-sample loss at a fixed severity t, in closed
/// form over the Gaussian model. Used to check stationarity of the oracle.
inline AffineGradient expected_affine_gradient(const AffineDenoiser& model, const LinearGaussianModel& gm,
                                               const LossKind& kind, double t) {
    const auto b = model.bin_of(t);
    const auto f = gm.factors(t);
    const Matrix& sigma = gm.prior().covariance();
    const Vector& mu = gm.prior().mean().values;
    const auto n = static_cast<Eigen::Index>(model.dim());
    const double var = gm.noise().variance(t);
    const double w = 1.0 / var;
    // E[y y^T], E[y], E[x0 y^T]
    Matrix eyy = f->a * sigma * f->a.transpose() + f->mean_y * f->mean_y.transpose();
    eyy.diagonal().array() += var;
    const Vector& ey = f->mean_y;
    const Matrix exy = sigma * f->a.transpose() + mu * ey.transpose();
    // E[e y^T] and E[e] for e = D y + c - x0
    const Matrix eey = model.d(b) * eyy + model.c(b) * ey.transpose() - exy;
    const Vector ee = model.d(b) * ey + model.c(b) - mu;
    const double tau = lookback_severity(t, kind.lookback());
    const Matrix m = gm.process().as_matrix(tau);
    const Matrix mtm = m.transpose() * m;
    AffineGradient g{std::vector<Matrix>(model.bins(), Matrix::Zero(n, n)), std::vector<Vector>(model.bins(), Vector::Zero(n))};
    g.d[b] = 2.0 * w * mtm * eey;
    g.c[b] = 2.0 * w * mtm * ee;
    return g;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelMagic = "DIRACAFF";
inline constexpr std::uint8_t kModelVersion = 1;

/// 8-byte magic "DIRACAFF", version byte, u64 B, u64 n, then per bin D
/// (row-major) and c as little-endian f64.
inline std::string encode_model(const AffineDenoiser& model) {
    std::string out(kModelMagic);
    out.push_back(static_cast<char>(kModelVersion));
    io::put_u64(out, model.bins());
    io::put_u64(out, model.dim());
    const auto n = static_cast<Eigen::Index>(model.dim());
    for (std::size_t b = 0; b < model.bins(); ++b) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) io::put_f64(out, model.d(b)(i, j));
        }
        for (Eigen::Index i = 0; i < n; ++i) io::put_f64(out, model.c(b)[i]);
    }
    return out;
}

/// The file stores n only; `shape` restores the 2-D layout.
inline AffineDenoiser decode_model(std::string_view data, Shape shape) {
    io::ByteReader r(data);
    if (r.bytes(kModelMagic.size()) != kModelMagic) throw std::runtime_error("model file: bad magic");
    if (r.u8() != kModelVersion) throw std::runtime_error("model file: unsupported version");
    const auto bins = r.u64();
    const auto n = r.u64();
    if (n != shape.size()) {
        throw std::runtime_error("model file: dimension " + std::to_string(n) + " does not match shape " + shape.to_string());
    }
    if (bins == 0 || bins > 1'000'000) throw std::runtime_error("model file: implausible bin count");
    AffineDenoiser model(bins, shape);
    const auto ni = static_cast<Eigen::Index>(n);
    for (std::size_t b = 0; b < bins; ++b) {
        for (Eigen::Index i = 0; i < ni; ++i) {
            for (Eigen::Index j = 0; j < ni; ++j) model.d(b)(i, j) = r.f64();
        }
        for (Eigen::Index i = 0; i < ni; ++i) model.c(b)[i] = r.f64();
    }
    if (!r.at_end()) throw std::runtime_error("model file: trailing bytes");
    return model;
}

inline void write_model(const std::filesystem::path& path, const AffineDenoiser& model) {
    io::write_text_file(path, encode_model(model));
}
inline AffineDenoiser read_model(const std::filesystem::path& path, Shape shape) {
    return decode_model(io::read_text_file(path), shape);
}

}  // namespace dirac
