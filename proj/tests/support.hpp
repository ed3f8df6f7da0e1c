#pragma once

#include "dirac/sdp.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace dirac::fixture {

inline double rel_err(const Vector& a, const Vector& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-300});
    return (a - b).norm() / scale;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

inline std::shared_ptr<const GaussianPrior> small_prior(std::size_t side = 8) {
    return std::make_shared<GaussianPrior>(GaussianPrior::squared_exponential(Shape::grid(side, side)));
}

inline ProcessPtr small_blur(std::size_t side = 8) {
    return std::make_shared<GaussianBlurProcess>(Shape::grid(side, side), 0.3, 3.0);
}

inline ProcessPtr small_inpaint(std::size_t side = 8) {
    const Shape s = Shape::grid(side, side);
    return std::make_shared<GaussianMaskInpaintProcess>(
        s, SeveritySchedule::linear(0.0, GaussianMaskInpaintProcess::default_terminal_width(s)));
}

inline ProcessPtr small_blending(std::size_t side = 8, std::uint64_t seed = 99) {
    RandomSource rng(seed);
    const auto prior = small_prior(side);
    const GaussianBlurProcess blur(prior->shape(), 0.3, 3.0);
    return std::make_shared<BlendingProcess>(blur.apply(1.0, prior_sample(*prior, rng)));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("dirac_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace dirac::fixture
