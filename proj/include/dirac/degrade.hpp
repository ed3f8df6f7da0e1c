#pragma once

#include "dirac/core.hpp"
#include "dirac/severity.hpp"

#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace dirac {

namespace detail {

inline void require_severity(double t, const char* what) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::out_of_range(std::string(what) + ": severity " + std::to_string(t) + " outside [0,1]");
    }
}

inline void require_ordered(double t_from, double t_to, const char* what) {
    require_severity(t_from, what);
    require_severity(t_to, what);
    if (t_from > t_to) throw std::invalid_argument(std::string(what) + ": transition requires t' <= t''");
}

}  // namespace detail

/// Largest singular value of a linear map given matrix-free forward and
/// adjoint products. Power iteration on A^T A from the normalized all-ones
/// vector; throws when the Rayleigh estimate has not settled to `tol`
/// (relative) within `iterations` steps.
inline double spectral_norm(std::size_t n, const std::function<Vector(const Vector&)>& forward,
                            const std::function<Vector(const Vector&)>& adjoint, int iterations = 50,
                            double tol = 1e-8) {
    Vector v = Vector::Ones(static_cast<Eigen::Index>(n)) / std::sqrt(static_cast<double>(n));
    double estimate = 0.0;
    for (int k = 0; k < iterations; ++k) {
        const Vector av = forward(v);
        const double next = av.norm();
        if (next == 0.0) return 0.0;
        const Vector w = adjoint(av);
        const double wn = w.norm();
        if (wn == 0.0) return next;
        if (k > 0 && std::abs(next - estimate) <= tol * next) return next;
        estimate = next;
        v = w / wn;
    }
    throw std::runtime_error("spectral_norm: power iteration did not converge");
}

/// A time-indexed family of affine degradation operators A_t(x) = M_t x + b_t
/// over signals of a fixed shape, together with its forward transitions
/// G_{t'->t''} satisfying A_{t''} = G_{t'->t''} o A_{t'}.
class DegradationProcess {
public:
    virtual ~DegradationProcess() = default;

    virtual std::string name() const = 0;
    virtual Shape shape() const = 0;
    std::size_t dim() const { return shape().size(); }

    virtual Signal apply(double t, const Signal& x) const = 0;
    virtual Signal transition(double t_from, double t_to, const Signal& y) const = 0;

    /// Physical operator parameter after scheduling.
    virtual double param_of(double t) const = 0;

    /// Affine offset b_t; zero for linear processes.
    virtual Vector offset(double t) const {
        detail::require_severity(t, "offset");
        return Vector::Zero(static_cast<Eigen::Index>(dim()));
    }

    /// M_t v, the linear part of A_t.
    virtual Vector apply_linear(double t, const Vector& v) const {
        return apply(t, Signal(v, shape())).values - offset(t);
    }

    /// M_t^T v. Defaults to the dense view; symmetric operators override.
    virtual Vector apply_adjoint(double t, const Vector& v) const { return as_matrix(t).transpose() * v; }

    /// Dense n x n view of M_t.
    virtual Matrix as_matrix(double t) const {
        const auto n = static_cast<Eigen::Index>(dim());
        Matrix m(n, n);
        Vector e = Vector::Zero(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            e[j] = 1.0;
            m.col(j) = apply_linear(t, e);
            e[j] = 0.0;
        }
        return m;
    }

    /// Dense view of the linear part of G_{t'->t''}.
    virtual Matrix transition_matrix(double t_from, double t_to) const {
        const auto n = static_cast<Eigen::Index>(dim());
        const Vector base = transition(t_from, t_to, Signal::zeros(shape())).values;
        Matrix m(n, n);
        Vector e = Vector::Zero(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            e[j] = 1.0;
            m.col(j) = transition(t_from, t_to, Signal(e, shape())).values - base;
            e[j] = 0.0;
        }
        return m;
    }

    /// Lipschitz constant of x -> A_t(x): the spectral norm of M_t.
    virtual double lipschitz_x(double t) const {
        return spectral_norm(
            dim(), [&](const Vector& v) { return apply_linear(t, v); },
            [&](const Vector& v) { return apply_adjoint(t, v); });
    }

    /// Declared bound on ||A_0 x - x|| / ||x||.
    virtual double identity_tolerance() const { return 0.0; }
    /// Declared max-norm bound on ||A_{t''} x - G(A_{t'} x)||.
    virtual double composition_tolerance() const { return 1e-12; }
};

using ProcessPtr = std::shared_ptr<const DegradationProcess>;

// ---------------------------------------------------------------------------
// Gaussian blur
// ---------------------------------------------------------------------------

/// Kernel discretization. `sampled` evaluates exp(-i^2/(2 w^2)) at the taps;
/// `discrete` uses the discrete Gaussian e^{-w^2} I_|i|(w^2), whose members
/// compose exactly under convolution (variances add).
enum class KernelShape { sampled, discrete };

inline std::string to_string(KernelShape s) { return s == KernelShape::sampled ? "sampled" : "discrete"; }

/// Normalized symmetric 1-D Gaussian kernel of odd size K with standard
/// deviation w. Widths below 1e-3 give the unit impulse.
inline std::vector<double> blur_kernel(double w, int kernel_size, KernelShape shape = KernelShape::sampled) {
    if (kernel_size < 3 || kernel_size % 2 == 0) throw std::invalid_argument("blur_kernel: size must be odd and >= 3");
    if (!(w > 0.0)) throw std::invalid_argument("blur_kernel: width must be positive");
    const int half = (kernel_size - 1) / 2;
    std::vector<double> k(static_cast<std::size_t>(kernel_size), 0.0);
    if (w < 1e-3) {
        k[static_cast<std::size_t>(half)] = 1.0;
        return k;
    }
    const double variance = w * w;
    for (int i = -half; i <= half; ++i) {
        const double v = shape == KernelShape::sampled
                             ? std::exp(-static_cast<double>(i * i) / (2.0 * variance))
                             : std::exp(-variance) * std::cyl_bessel_i(static_cast<double>(std::abs(i)), variance);
        k[static_cast<std::size_t>(i + half)] = v;
    }
    double sum = 0.0;
    for (double v : k) sum += v;
    for (double& v : k) v /= sum;
    return k;
}

/// Separable circular convolution (rows then columns for 2-D signals).
inline Vector circular_blur(const Vector& x, Shape shape, const std::vector<double>& kernel) {
    const auto h = static_cast<long>(shape.height());
    const auto w = static_cast<long>(shape.width());
    const long half = static_cast<long>(kernel.size() - 1) / 2;
    auto wrap = [](long i, long n) { return ((i % n) + n) % n; };

    Vector tmp(x.size());
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            double acc = 0.0;
            for (long j = 0; j < static_cast<long>(kernel.size()); ++j) {
                acc += kernel[static_cast<std::size_t>(j)] * x[r * w + wrap(c + j - half, w)];
            }
            tmp[r * w + c] = acc;
        }
    }
    if (!shape.is_2d()) return tmp;
    Vector out(x.size());
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            double acc = 0.0;
            for (long j = 0; j < static_cast<long>(kernel.size()); ++j) {
                acc += kernel[static_cast<std::size_t>(j)] * tmp[wrap(r + j - half, h) * w + c];
            }
            out[r * w + c] = acc;
        }
    }
    return out;
}

/// Default kernel size: min(k_max, 2 ceil(4 w_max) + 1).
inline int default_kernel_size(double w_max, int k_max = 61) {
    const int k = 2 * static_cast<int>(std::ceil(4.0 * w_max)) + 1;
    return std::max(3, std::min(k_max, k));
}

class GaussianBlurProcess final : public DegradationProcess {
public:
    GaussianBlurProcess(Shape shape, SeveritySchedule schedule, int kernel_size,
                        KernelShape kernel_shape = KernelShape::discrete)
        : shape_(shape), schedule_(std::move(schedule)), kernel_size_(kernel_size), kernel_shape_(kernel_shape) {
        if (kernel_size_ < 3 || kernel_size_ % 2 == 0) throw std::invalid_argument("blur: kernel size must be odd and >= 3");
        if (!(schedule_.w_min() > 0.0)) throw std::invalid_argument("blur: w_min must be positive");
    }

    GaussianBlurProcess(Shape shape, double w_min, double w_max)
        : GaussianBlurProcess(shape, SeveritySchedule::linear(w_min, w_max), default_kernel_size(w_max)) {}

    std::string name() const override { return "blur"; }
    Shape shape() const override { return shape_; }
    const SeveritySchedule& schedule() const { return schedule_; }
    int kernel_size() const { return kernel_size_; }
    KernelShape kernel_shape() const { return kernel_shape_; }

    double param_of(double t) const override { return schedule_.interpolate(t); }

    std::vector<double> kernel_at(double t) const { return blur_kernel(param_of(t), kernel_size_, kernel_shape_); }

    Signal apply(double t, const Signal& x) const override {
        detail::require_severity(t, "blur apply");
        check(x);
        return x.with_values(circular_blur(x.values, shape_, kernel_at(t)));
    }

    Vector apply_linear(double t, const Vector& v) const override {
        detail::require_severity(t, "blur apply");
        return circular_blur(v, shape_, kernel_at(t));
    }

    // Symmetric kernel under circular padding gives a symmetric matrix.
    Vector apply_adjoint(double t, const Vector& v) const override { return apply_linear(t, v); }

    /// Width of the incremental blur taking severity t' to t''.
    double incremental_width(double t_from, double t_to) const {
        const double a = param_of(t_from);
        const double b = param_of(t_to);
        return std::sqrt(std::max(0.0, b * b - a * a));
    }

    Signal transition(double t_from, double t_to, const Signal& y) const override {
        detail::require_ordered(t_from, t_to, "blur transition");
        check(y);
        const double w = incremental_width(t_from, t_to);
        if (t_from == t_to || w < 1e-3) return y;
        return y.with_values(circular_blur(y.values, shape_, blur_kernel(w, kernel_size_, kernel_shape_)));
    }

    /// Mean of ||A_0 x - x|| / ||x|| over default 16x16 prior samples; single
    /// rough samples can exceed it.
    double identity_tolerance() const override { return 0.05; }
    double composition_tolerance() const override { return 1e-3; }

private:
    void check(const Signal& x) const {
        if (!(x.shape == shape_)) throw std::invalid_argument("blur: signal shape " + x.shape.to_string() + " does not match process");
    }

    Shape shape_;
    SeveritySchedule schedule_;
    int kernel_size_;
    KernelShape kernel_shape_;
};

/// Incremental width between two blur widths (Gaussian widths add in quadrature).
inline double quadrature_increment(double w_from, double w_to) {
    if (w_to < w_from) throw std::invalid_argument("quadrature_increment: widths must be ordered");
    return std::sqrt(w_to * w_to - w_from * w_from);
}

// ---------------------------------------------------------------------------
// Gaussian-mask inpainting
// ---------------------------------------------------------------------------

struct MaskCenter {
    double row;
    double col;
};

inline MaskCenter default_center(Shape shape) {
    return {shape.is_2d() ? static_cast<double>(shape.height() / 2) : 0.0, static_cast<double>(shape.width() / 2)};
}

/// Smooth mask M[p] = (1 - f(p; w) / max f)^k with f an isotropic Gaussian
/// centered at `center`; w = 0 gives the all-ones mask.
inline Signal inpaint_mask(double w, int k, Shape shape, MaskCenter center) {
    if (w < 0.0) throw std::invalid_argument("inpaint_mask: width must be non-negative");
    if (k < 1) throw std::invalid_argument("inpaint_mask: exponent must be >= 1");
    Signal m = Signal::constant(shape, 1.0);
    if (w == 0.0) return m;
    for (std::size_t r = 0; r < shape.height(); ++r) {
        for (std::size_t c = 0; c < shape.width(); ++c) {
            const double dr = shape.is_2d() ? static_cast<double>(r) - center.row : 0.0;
            const double dc = static_cast<double>(c) - center.col;
            const double g = std::exp(-(dr * dr + dc * dc) / (2.0 * w * w));
            m[r * shape.width() + c] = std::pow(1.0 - g, k);
        }
    }
    return m;
}

class GaussianMaskInpaintProcess final : public DegradationProcess {
public:
    GaussianMaskInpaintProcess(Shape shape, SeveritySchedule schedule, int k = 4,
                               std::optional<MaskCenter> center = std::nullopt)
        : shape_(shape), schedule_(std::move(schedule)), k_(k), center_(center.value_or(default_center(shape))) {
        if (k_ < 1) throw std::invalid_argument("inpaint: k must be >= 1");
        if (schedule_.w_min() != 0.0) throw std::invalid_argument("inpaint: the schedule must start at w = 0 (M_0 = I)");
    }

    /// Terminal width defaults to 0.2 x the image side.
    static double default_terminal_width(Shape shape) {
        return 0.2 * static_cast<double>(shape.is_2d() ? std::min(shape.height(), shape.width()) : shape.width());
    }

    std::string name() const override { return "inpaint"; }
    Shape shape() const override { return shape_; }
    const SeveritySchedule& schedule() const { return schedule_; }
    int sharpness() const { return k_; }
    MaskCenter center() const { return center_; }

    double param_of(double t) const override { return schedule_.interpolate(t); }

    Signal mask(double t) const {
        detail::require_severity(t, "inpaint mask");
        return inpaint_mask(param_of(t), k_, shape_, center_);
    }

    Signal apply(double t, const Signal& x) const override {
        check(x);
        return x.with_values(mask(t).values.cwiseProduct(x.values));
    }
    Vector apply_linear(double t, const Vector& v) const override { return mask(t).values.cwiseProduct(v); }
    Vector apply_adjoint(double t, const Vector& v) const override { return apply_linear(t, v); }
    Matrix as_matrix(double t) const override { return mask(t).values.asDiagonal(); }

    Signal transition(double t_from, double t_to, const Signal& y) const override {
        detail::require_ordered(t_from, t_to, "inpaint transition");
        check(y);
        if (t_from == t_to) return y;
        const Signal from = mask(t_from);
        const Signal to = mask(t_to);
        Signal out = y;
        for (std::size_t i = 0; i < y.size(); ++i) {
            out[i] = from[i] > 1e-12 ? y[i] * (to[i] / from[i]) : 0.0;
        }
        return out;
    }

    double lipschitz_x(double t) const override { return mask(t).values.cwiseAbs().maxCoeff(); }

private:
    void check(const Signal& x) const {
        if (!(x.shape == shape_)) throw std::invalid_argument("inpaint: signal shape " + x.shape.to_string() + " does not match process");
    }

    Shape shape_;
    SeveritySchedule schedule_;
    int k_;
    MaskCenter center_;
};

// ---------------------------------------------------------------------------
// Blending
// ---------------------------------------------------------------------------

/// A_t(x; anchor) = t * anchor + (1 - t) * x.
class BlendingProcess final : public DegradationProcess {
public:
    explicit BlendingProcess(Signal anchor) : anchor_(std::move(anchor)) {}

    std::string name() const override { return "blending"; }
    Shape shape() const override { return anchor_.shape; }
    const Signal& anchor() const { return anchor_; }

    double param_of(double t) const override {
        detail::require_severity(t, "blending");
        return t;
    }

    Signal apply(double t, const Signal& x) const override {
        detail::require_severity(t, "blending apply");
        require_same_shape(anchor_, x, "blending apply");
        if (t == 0.0) return x;
        if (t == 1.0) return anchor_;
        return x.with_values(t * anchor_.values + (1.0 - t) * x.values);
    }

    Vector offset(double t) const override {
        detail::require_severity(t, "blending offset");
        return t * anchor_.values;
    }
    Vector apply_linear(double t, const Vector& v) const override {
        detail::require_severity(t, "blending apply");
        return (1.0 - t) * v;
    }
    Vector apply_adjoint(double t, const Vector& v) const override { return apply_linear(t, v); }
    Matrix as_matrix(double t) const override {
        detail::require_severity(t, "blending");
        const auto n = static_cast<Eigen::Index>(dim());
        return (1.0 - t) * Matrix::Identity(n, n);
    }

    Signal transition(double t_from, double t_to, const Signal& y) const override {
        detail::require_ordered(t_from, t_to, "blending transition");
        require_same_shape(anchor_, y, "blending transition");
        if (t_from == t_to) return y;
        // x = (y - t' a) / (1 - t')  =>  A_{t''} x = t'' a + (1 - t'') / (1 - t') (y - t' a)
        const double ratio = (1.0 - t_to) / (1.0 - t_from);
        return y.with_values(t_to * anchor_.values + ratio * (y.values - t_from * anchor_.values));
    }

    double lipschitz_x(double t) const override {
        detail::require_severity(t, "blending");
        return 1.0 - t;
    }

private:
    Signal anchor_;
};

// ---------------------------------------------------------------------------
// Time-Lipschitz estimate
// ---------------------------------------------------------------------------

/// max over `probes` prior samples of ||A_{t'} x - A_{t''} x|| / |t'' - t'|.
/// This lower-bounds the true L_t.
inline double lipschitz_t_estimate(const DegradationProcess& proc, double t_from, double t_to, int probes,
                                   const GaussianPrior& prior, RandomSource& rng) {
    detail::require_ordered(t_from, t_to, "lipschitz_t_estimate");
    if (!(t_from < t_to)) throw std::invalid_argument("lipschitz_t_estimate: requires t' < t''");
    if (probes < 1) throw std::invalid_argument("lipschitz_t_estimate: need at least one probe");
    double best = 0.0;
    for (int p = 0; p < probes; ++p) {
        const Signal x = prior_sample(prior, rng);
        const double q = (proc.apply(t_from, x).values - proc.apply(t_to, x).values).norm() / (t_to - t_from);
        best = std::max(best, q);
    }
    return best;
}

}  // namespace dirac
