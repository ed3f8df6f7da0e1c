#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dirac {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Shape metadata of a signal: either a line of `width` samples or a
/// `height` x `width` image stored row-major.
class Shape {
public:
    Shape() = default;

    static Shape line(std::size_t length) { return Shape(1, length, false); }
    static Shape grid(std::size_t height, std::size_t width) { return Shape(height, width, true); }

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    bool is_2d() const { return two_d_; }
    std::size_t size() const { return height_ * width_; }

    bool operator==(const Shape&) const = default;

    std::string to_string() const {
        return two_d_ ? "(" + std::to_string(height_) + "," + std::to_string(width_) + ")"
                      : "(" + std::to_string(width_) + ")";
    }

private:
    Shape(std::size_t h, std::size_t w, bool two_d) : height_(h), width_(w), two_d_(two_d) {}

    std::size_t height_ = 0;
    std::size_t width_ = 0;
    bool two_d_ = false;
};

/// An n-dimensional real vector with 1-D or 2-D shape. Values are never
/// clipped; clipping happens only when exporting images.
struct Signal {
    Vector values;
    Shape shape;

    Signal() = default;
    Signal(Vector v, Shape s) : values(std::move(v)), shape(s) {
        if (static_cast<std::size_t>(values.size()) != shape.size()) {
            throw std::invalid_argument("signal: value count " + std::to_string(values.size()) +
                                        " does not match shape " + shape.to_string());
        }
    }

    static Signal zeros(Shape s) { return Signal(Vector::Zero(static_cast<Eigen::Index>(s.size())), s); }
    static Signal constant(Shape s, double c) {
        return Signal(Vector::Constant(static_cast<Eigen::Index>(s.size()), c), s);
    }

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
    double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
    double& operator[](std::size_t i) { return values[static_cast<Eigen::Index>(i)]; }
    double at(std::size_t row, std::size_t col) const { return (*this)[row * shape.width() + col]; }

    Signal with_values(Vector v) const { return Signal(std::move(v), shape); }
    bool all_finite() const { return values.allFinite(); }
};

inline void require_same_shape(const Signal& a, const Signal& b, const char* what) {
    if (!(a.shape == b.shape)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape.to_string() +
                                    " vs " + b.shape.to_string());
    }
}

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31U);
}

/// Seeded pseudorandom source: std::mt19937_64 whose state seed is derived
/// from (seed, stream) with SplitMix64. Identical (seed, stream) pairs give
/// identical streams; distinct stream ids give independent sub-streams.
/// Owned by exactly one task; share seeds, never generators.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL))) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Independent child stream, deterministic in (seed, stream, id).
    RandomSource split(std::uint64_t id) const {
        return RandomSource(seed_, splitmix64(stream_ * 0x2545F4914F6CDD1DULL + id + 1));
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    Vector normal_vector(std::size_t n) {
        Vector v(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal();
        return v;
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Gaussian prior
// ---------------------------------------------------------------------------

/// Gaussian data model q0 = N(mean, covariance) with a stored Cholesky
/// factor and the entry bound B used by the reconstruction-error audits.
class GaussianPrior {
public:
    GaussianPrior(Signal mean, Matrix covariance) : mean_(std::move(mean)), covariance_(std::move(covariance)) {
        const auto n = static_cast<Eigen::Index>(mean_.size());
        if (covariance_.rows() != n || covariance_.cols() != n) {
            throw std::invalid_argument("prior: covariance must be n x n with n = mean size");
        }
        if (!covariance_.allFinite()) throw std::invalid_argument("prior: covariance is not finite");
        if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            throw std::invalid_argument("prior: covariance is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_, Eigen::EigenvaluesOnly);
        if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < 1e-9) {
            throw std::invalid_argument("prior: covariance is not positive definite (min eigenvalue < 1e-9)");
        }
        Eigen::LLT<Matrix> llt(covariance_);
        if (llt.info() != Eigen::Success) throw std::invalid_argument("prior: Cholesky factorization failed");
        cholesky_ = llt.matrixL();
        if ((cholesky_ * cholesky_.transpose() - covariance_).cwiseAbs().maxCoeff() > 1e-10) {
            throw std::invalid_argument("prior: Cholesky factor does not reproduce the covariance");
        }
        log_det_ = 2.0 * cholesky_.diagonal().array().log().sum();
        entry_bound_ = mean_.values.cwiseAbs().maxCoeff() + 4.0 * std::sqrt(covariance_.diagonal().maxCoeff());
    }

    /// Squared-exponential covariance over pixel distance with diagonal jitter.
    static GaussianPrior squared_exponential(Shape shape, double length_scale = 2.0, double jitter = 1e-4,
                                             double mean_value = 0.5, double amplitude = 1.0) {
        if (length_scale <= 0.0 || jitter < 0.0 || amplitude <= 0.0) {
            throw std::invalid_argument("prior: length scale and amplitude must be positive, jitter non-negative");
        }
        const auto n = static_cast<Eigen::Index>(shape.size());
        Matrix cov(n, n);
        const auto w = static_cast<Eigen::Index>(shape.width());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double dr = static_cast<double>(i / w - j / w);
                const double dc = static_cast<double>(i % w - j % w);
                cov(i, j) = amplitude * amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * length_scale * length_scale));
            }
        }
        cov.diagonal().array() += jitter;
        return GaussianPrior(Signal::constant(shape, mean_value), std::move(cov));
    }

    const Signal& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    const Matrix& cholesky_factor() const { return cholesky_; }
    double entry_bound() const { return entry_bound_; }
    double log_det() const { return log_det_; }
    Shape shape() const { return mean_.shape; }
    std::size_t dim() const { return mean_.size(); }

    /// Solves L z = v (whitening).
    Vector whiten(const Vector& v) const { return cholesky_.triangularView<Eigen::Lower>().solve(v); }

private:
    Signal mean_;
    Matrix covariance_;
    Matrix cholesky_;
    double log_det_ = 0.0;
    double entry_bound_ = 0.0;
};

inline Signal prior_sample(const GaussianPrior& prior, RandomSource& rng) {
    Vector eps = rng.normal_vector(prior.dim());
    return prior.mean().with_values(prior.mean().values + prior.cholesky_factor() * eps);
}

/// Negative log-density of x under the prior.
inline double prior_nll(const GaussianPrior& prior, const Signal& x) {
    require_same_shape(prior.mean(), x, "prior_nll");
    const Vector z = prior.whiten(x.values - prior.mean().values);
    const double n = static_cast<double>(x.size());
    return 0.5 * z.squaredNorm() + 0.5 * prior.log_det() + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double mse(const Signal& a, const Signal& b) {
    require_same_shape(a, b, "mse");
    return (a.values - b.values).squaredNorm() / static_cast<double>(a.size());
}

/// PSNR in dB; identical signals give +infinity.
inline double psnr(const Signal& a, const Signal& b, double peak = 1.0) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

inline double rmse(const Signal& a, const Signal& b) { return std::sqrt(mse(a, b)); }

// ---------------------------------------------------------------------------
// Parallel helpers
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index is
/// handled by exactly one thread; callers write results into slot i so the
/// reduction order is independent of scheduling.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += jobs) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace dirac
