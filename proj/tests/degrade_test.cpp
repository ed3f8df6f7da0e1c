#include "dirac/degrade.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace dirac;
using fixture::small_blending;
using fixture::small_blur;
using fixture::small_inpaint;
using fixture::small_prior;

namespace {

std::vector<ProcessPtr> all_processes() { return {small_blur(), small_inpaint(), small_blending()}; }

double largest_singular_value(const Matrix& m) {
    return Eigen::JacobiSVD<Matrix>(m).singularValues()[0];
}

}  // namespace

TEST(BlurKernel, TinyWidthIsUnitImpulse) {
    const auto k = blur_kernel(5e-4, 7);
    for (std::size_t i = 0; i < k.size(); ++i) EXPECT_EQ(k[i], i == 3 ? 1.0 : 0.0);
}

TEST(BlurKernel, SizeThreeUnitWidthSampled) {
    const auto k = blur_kernel(1.0, 3, KernelShape::sampled);
    const double e = std::exp(-0.5);
    const double z = 1.0 + 2.0 * e;
    EXPECT_NEAR(k[0], e / z, 1e-15);
    EXPECT_NEAR(k[1], 1.0 / z, 1e-15);
    EXPECT_NEAR(k[0], 0.2742, 5e-4);
    EXPECT_NEAR(k[1], 0.4516, 5e-4);
    EXPECT_EQ(k[0], k[2]);
}

TEST(BlurKernel, SymmetricAndNormalized) {
    for (auto shape : {KernelShape::sampled, KernelShape::discrete}) {
        for (double w : {0.3, 1.0, 2.5}) {
            const auto k = blur_kernel(w, 11, shape);
            double sum = 0.0;
            for (std::size_t i = 0; i < k.size(); ++i) {
                EXPECT_EQ(k[i], k[k.size() - 1 - i]);
                sum += k[i];
            }
            EXPECT_NEAR(sum, 1.0, 1e-14);
        }
    }
}

TEST(BlurKernel, DiscreteKernelsComposeByAddingVariances) {
    const int size = 61;
    const auto a = blur_kernel(1.2, size, KernelShape::discrete);
    const auto b = blur_kernel(0.9, size, KernelShape::discrete);
    const auto c = blur_kernel(std::sqrt(1.2 * 1.2 + 0.9 * 0.9), size, KernelShape::discrete);
    const int half = size / 2;
    for (int i = -10; i <= 10; ++i) {
        double conv = 0.0;
        for (int j = -half; j <= half; ++j) {
            const int r = i - j;
            if (r < -half || r > half) continue;
            conv += a[static_cast<std::size_t>(j + half)] * b[static_cast<std::size_t>(r + half)];
        }
        EXPECT_NEAR(conv, c[static_cast<std::size_t>(i + half)], 1e-12);
    }
}

TEST(BlurKernel, RejectsBadArguments) {
    EXPECT_THROW(blur_kernel(1.0, 4), std::invalid_argument);
    EXPECT_THROW(blur_kernel(1.0, 1), std::invalid_argument);
    EXPECT_THROW(blur_kernel(0.0, 5), std::invalid_argument);
}

TEST(GaussianBlur, ConstantIsFixedPoint) {
    const auto p = small_blur();
    const Signal c = Signal::constant(p->shape(), 0.7);
    for (double t : {0.0, 0.4, 1.0}) {
        EXPECT_LT((p->apply(t, c).values.array() - 0.7).abs().maxCoeff(), 1e-14);
    }
}

TEST(GaussianBlur, ImpulseResponseIsOuterProductOfKernel) {
    const Shape s = Shape::grid(9, 9);
    const GaussianBlurProcess p(s, SeveritySchedule::linear(0.5, 1.0), 5);
    Signal x = Signal::zeros(s);
    x[4 * 9 + 4] = 1.0;
    const Signal y = p.apply(1.0, x);
    const auto k = blur_kernel(1.0, 5, KernelShape::discrete);
    for (int r = 0; r < 9; ++r) {
        for (int c = 0; c < 9; ++c) {
            const int dr = r - 4, dc = c - 4;
            const double expected = (std::abs(dr) <= 2 && std::abs(dc) <= 2)
                                        ? k[static_cast<std::size_t>(dr + 2)] * k[static_cast<std::size_t>(dc + 2)]
                                        : 0.0;
            EXPECT_NEAR(y.at(r, c), expected, 1e-15);
        }
    }
}

TEST(GaussianBlur, ImpulseResponseWrapsCircularly) {
    const Shape s = Shape::grid(6, 6);
    const GaussianBlurProcess p(s, SeveritySchedule::linear(0.5, 1.0), 3, KernelShape::sampled);
    Signal x = Signal::zeros(s);
    x[0] = 1.0;
    const Signal y = p.apply(1.0, x);
    const auto k = blur_kernel(1.0, 3, KernelShape::sampled);
    EXPECT_NEAR(y.at(5, 5), k[0] * k[0], 1e-15);
    EXPECT_NEAR(y.at(0, 5), k[1] * k[0], 1e-15);
}

TEST(GaussianBlur, ConservesMass) {
    const auto p = small_blur();
    RandomSource rng(1);
    for (int i = 0; i < 20; ++i) {
        const Signal x(rng.normal_vector(p->dim()), p->shape());
        EXPECT_NEAR(p->apply(rng.uniform(), x).values.mean(), x.values.mean(), 1e-12);
    }
}

TEST(GaussianBlur, IncrementalWidthAddsInQuadrature) {
    const auto p = std::dynamic_pointer_cast<const GaussianBlurProcess>(small_blur());
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->incremental_width(0.0, 1.0), std::sqrt(9.0 - 0.09), 1e-12);
    EXPECT_NEAR(p->incremental_width(0.0, 1.0), 2.9849, 1e-4);
    EXPECT_NEAR(quadrature_increment(0.3, 3.0), 2.98496231, 1e-8);
}

TEST(GaussianBlur, TransitionComposesWithinDeclaredTolerance) {
    const auto prior = small_prior(16);
    const GaussianBlurProcess p(prior->shape(), 0.3, 3.0);
    RandomSource rng(11);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Signal x = prior_sample(*prior, rng);
        double a = rng.uniform(), b = rng.uniform();
        if (a > b) std::swap(a, b);
        const Signal direct = p.apply(b, x);
        const Signal via = p.transition(a, b, p.apply(a, x));
        worst = std::max(worst, (direct.values - via.values).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst, p.composition_tolerance());
}

TEST(GaussianBlur, SampledKernelComposesOnlyApproximately) {
    const auto prior = small_prior(16);
    const GaussianBlurProcess p(prior->shape(), SeveritySchedule::linear(0.3, 3.0), 19, KernelShape::sampled);
    RandomSource rng(12);
    const Signal x = prior_sample(*prior, rng);
    const double err = (p.apply(0.8, x).values - p.transition(0.1, 0.8, p.apply(0.1, x)).values).cwiseAbs().maxCoeff();
    EXPECT_GT(err, 0.0);
    EXPECT_LT(err, 0.05);
}

TEST(GaussianBlur, SpectralNormIsOne) {
    const auto p = small_blur();
    for (double t : {0.0, 0.5, 1.0}) {
        EXPECT_NEAR(p->lipschitz_x(t), 1.0, 1e-6);
        EXPECT_NEAR(largest_singular_value(p->as_matrix(t)), 1.0, 1e-6);
    }
}

TEST(InpaintMask, CenterIsZeroAndMaskIsBounded) {
    const Shape s = Shape::grid(8, 8);
    for (double w : {0.5, 1.0, 3.0}) {
        const Signal m = inpaint_mask(w, 4, s, default_center(s));
        EXPECT_EQ(m.at(4, 4), 0.0);
        EXPECT_LE(m.values.maxCoeff(), 1.0);
        EXPECT_GE(m.values.minCoeff(), 0.0);
    }
    EXPECT_EQ(inpaint_mask(0.0, 4, s, default_center(s)).values, Vector::Ones(64));
}

TEST(InpaintMask, NonIncreasingInWidth) {
    const Shape s = Shape::grid(8, 8);
    for (int w = 1; w <= 8; ++w) {
        const Signal a = inpaint_mask(w, 4, s, default_center(s));
        const Signal b = inpaint_mask(w + 0.5, 4, s, default_center(s));
        EXPECT_TRUE((b.values.array() <= a.values.array()).all()) << "w = " << w;
    }
}

TEST(InpaintMask, DefaultSharpnessIsFour) {
    const GaussianMaskInpaintProcess p(Shape::grid(4, 4), SeveritySchedule::linear(0.0, 1.0));
    EXPECT_EQ(p.sharpness(), 4);
}

TEST(Inpaint, TransitionIsExactComposition) {
    const auto p = small_inpaint();
    RandomSource rng(13);
    for (int i = 0; i < 100; ++i) {
        const Signal x(rng.normal_vector(p->dim()), p->shape());
        double a = rng.uniform(), b = rng.uniform();
        if (a > b) std::swap(a, b);
        const Signal via = p->transition(a, b, p->apply(a, x));
        ASSERT_LE((p->apply(b, x).values - via.values).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Inpaint, TransitionZeroesCenterAndIsIdentityForEqualSeverities) {
    const auto p = small_inpaint();
    RandomSource rng(14);
    const Signal y(rng.normal_vector(p->dim()), p->shape());
    EXPECT_EQ(p->transition(0.2, 0.9, y).at(4, 4), 0.0);
    EXPECT_EQ(p->transition(0.4, 0.4, y).values, y.values);
}

TEST(Inpaint, LipschitzIsLargestMaskValue) {
    const auto p = small_inpaint();
    for (double t : {0.0, 0.3, 1.0}) {
        EXPECT_LE(p->lipschitz_x(t), 1.0);
        EXPECT_NEAR(p->lipschitz_x(t), largest_singular_value(p->as_matrix(t)), 1e-12);
    }
}

TEST(Blending, EndpointsAndOffset) {
    const auto p = std::dynamic_pointer_cast<const BlendingProcess>(small_blending());
    ASSERT_TRUE(p);
    RandomSource rng(15);
    const Signal x(rng.normal_vector(p->dim()), p->shape());
    EXPECT_EQ(p->apply(0.0, x).values, x.values);
    EXPECT_EQ(p->apply(1.0, x).values, p->anchor().values);
    const double t = 0.3;
    EXPECT_LT((p->apply(t, x).values - (p->apply_linear(t, x.values) + p->offset(t))).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_DOUBLE_EQ(p->lipschitz_x(t), 0.7);
}

TEST(Blending, TransitionIsExactComposition) {
    const auto p = small_blending();
    RandomSource rng(16);
    for (int i = 0; i < 50; ++i) {
        const Signal x(rng.normal_vector(p->dim()), p->shape());
        double a = rng.uniform(0.0, 0.99), b = rng.uniform(0.0, 0.99);
        if (a > b) std::swap(a, b);
        ASSERT_LE((p->apply(b, x).values - p->transition(a, b, p->apply(a, x)).values).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Operators, MatrixViewMatchesApplication) {
    RandomSource rng(17);
    for (const auto& p : all_processes()) {
        for (double t : {0.0, 0.37, 1.0}) {
            const Signal x(rng.normal_vector(p->dim()), p->shape());
            const Vector via_matrix = p->as_matrix(t) * x.values + p->offset(t);
            EXPECT_LE((via_matrix - p->apply(t, x).values).cwiseAbs().maxCoeff(), 1e-10) << p->name() << " t=" << t;
        }
    }
}

TEST(Operators, AdjointPassesDotProductTest) {
    RandomSource rng(18);
    for (const auto& p : all_processes()) {
        const Vector u = rng.normal_vector(p->dim());
        const Vector v = rng.normal_vector(p->dim());
        const double t = 0.61;
        EXPECT_NEAR(p->apply_linear(t, u).dot(v), u.dot(p->apply_adjoint(t, v)), 1e-10) << p->name();
    }
}

TEST(Operators, TransitionMatrixMapsOperators) {
    for (const auto& p : {small_inpaint(), small_blending()}) {
        const Matrix g = p->transition_matrix(0.2, 0.7);
        EXPECT_LE((g * p->as_matrix(0.2) - p->as_matrix(0.7)).cwiseAbs().maxCoeff(), 1e-12) << p->name();
    }
}

TEST(Operators, IdentityAtZeroSeverityOnPriorSamples) {
    RandomSource rng(19);
    const auto prior = small_prior(16);
    const std::vector<ProcessPtr> procs{small_blur(16), small_inpaint(16), small_blending(16)};
    for (const auto& p : procs) {
        double sum = 0.0;
        const int draws = 200;
        for (int i = 0; i < draws; ++i) {
            const Signal x = prior_sample(*prior, rng);
            const double rel = (p->apply(0.0, x).values - x.values).norm() / x.values.norm();
            if (p->identity_tolerance() == 0.0) ASSERT_LE(rel, 1e-15) << p->name();
            sum += rel;
        }
        EXPECT_LE(sum / draws, p->identity_tolerance() + 1e-15) << p->name();
    }
}

TEST(Operators, RejectBadSeveritiesAndShapes) {
    for (const auto& p : all_processes()) {
        const Signal x = Signal::zeros(p->shape());
        EXPECT_THROW(p->apply(1.5, x), std::exception) << p->name();
        EXPECT_THROW(p->transition(0.8, 0.2, x), std::invalid_argument) << p->name();
        EXPECT_THROW(p->apply(0.5, Signal::zeros(Shape::line(3))), std::invalid_argument) << p->name();
    }
}

TEST(SpectralNorm, MatchesDenseSvd) {
    RandomSource rng(20);
    Matrix a(6, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    const double power = spectral_norm(
        6, [&](const Vector& v) { return Vector(a * v); }, [&](const Vector& v) { return Vector(a.transpose() * v); },
        5000, 1e-12);
    EXPECT_NEAR(power, largest_singular_value(a), 1e-6);
}

TEST(LipschitzT, BlendingEqualsLargestAnchorDistance) {
    const auto p = std::dynamic_pointer_cast<const BlendingProcess>(small_blending());
    const auto prior = small_prior();
    RandomSource a(21), b(21);
    const double est = lipschitz_t_estimate(*p, 0.2, 0.5, 8, *prior, a);
    double best = 0.0;
    for (int i = 0; i < 8; ++i) best = std::max(best, (p->anchor().values - prior_sample(*prior, b).values).norm());
    EXPECT_NEAR(est, best, 1e-10);
}

TEST(LipschitzT, BlurEstimateHasFiniteLimit) {
    const auto p = small_blur();
    const auto prior = small_prior();
    std::vector<double> est;
    for (double h : {1e-2, 1e-3, 1e-4}) {
        RandomSource rng(22);
        est.push_back(lipschitz_t_estimate(*p, 0.5, 0.5 + h, 8, *prior, rng));
    }
    EXPECT_LT(fixture::rel_err(est[1], est[2]), 1e-2);
    EXPECT_LT(fixture::rel_err(est[0], est[1]), 5e-2);
}

TEST(LipschitzT, InpaintEstimateGrowsWithSharpness) {
    const auto prior = small_prior();
    const Shape s = prior->shape();
    std::vector<double> est;
    for (int k : {1, 2, 4, 8}) {
        const GaussianMaskInpaintProcess p(s, SeveritySchedule::linear(0.0, 6.0), k);
        RandomSource rng(23);
        est.push_back(lipschitz_t_estimate(p, 0.02, 0.04, 16, *prior, rng));
    }
    for (std::size_t i = 1; i < est.size(); ++i) EXPECT_GT(est[i], est[i - 1]) << "k index " << i;
}

TEST(LipschitzT, RejectsDegenerateInterval) {
    const auto prior = small_prior();
    RandomSource rng(24);
    EXPECT_THROW(lipschitz_t_estimate(*small_blur(), 0.5, 0.5, 4, *prior, rng), std::invalid_argument);
}
