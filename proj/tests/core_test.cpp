#include "dirac/io.hpp"
#include "dirac/severity.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <numbers>

using namespace dirac;

TEST(Signal, RejectsValueCountMismatch) {
    EXPECT_THROW(Signal(Vector::Zero(5), Shape::grid(2, 2)), std::invalid_argument);
    EXPECT_NO_THROW(Signal(Vector::Zero(4), Shape::grid(2, 2)));
}

TEST(Signal, RowMajorIndexing) {
    Vector v(6);
    v << 0, 1, 2, 3, 4, 5;
    const Signal s(v, Shape::grid(2, 3));
    EXPECT_EQ(s.at(1, 0), 3.0);
    EXPECT_EQ(s.at(0, 2), 2.0);
}

TEST(Metrics, IdenticalSignalsGiveZeroMseAndInfinitePsnr) {
    const Signal a = Signal::constant(Shape::line(4), 0.3);
    EXPECT_EQ(mse(a, a), 0.0);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
    EXPECT_GT(psnr(a, a), 0.0);
}

TEST(Metrics, ConstantOffsetOfOneTenth) {
    const Signal a = Signal::constant(Shape::grid(3, 3), 0.5);
    const Signal b = Signal::constant(Shape::grid(3, 3), 0.4);
    EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Metrics, ShapeMismatchThrows) {
    const Signal a = Signal::zeros(Shape::line(4));
    const Signal b = Signal::zeros(Shape::grid(2, 2));
    EXPECT_THROW(mse(a, b), std::invalid_argument);
    EXPECT_THROW(psnr(a, b), std::invalid_argument);
}

TEST(RandomSource, SameSeedAndStreamReproduce) {
    RandomSource a(42, 3), b(42, 3);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(RandomSource, StreamsAndSplitsDiffer) {
    RandomSource a(42, 0), b(42, 1);
    EXPECT_NE(a.uniform(), b.uniform());
    const RandomSource root(7);
    RandomSource c = root.split(1), d = root.split(2), e = root.split(1);
    const double x = c.normal();
    EXPECT_NE(x, d.normal());
    EXPECT_EQ(x, e.normal());
}

TEST(RandomSource, UniformRange) {
    RandomSource r(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform(2.0, 3.0);
        ASSERT_GE(u, 2.0);
        ASSERT_LT(u, 3.0);
    }
}

TEST(GaussianPrior, RejectsNonPositiveDefiniteCovariance) {
    const Signal mu = Signal::zeros(Shape::line(3));
    EXPECT_THROW(GaussianPrior(mu, Matrix::Zero(3, 3)), std::invalid_argument);
    Matrix asym = Matrix::Identity(3, 3);
    asym(0, 1) = 0.5;
    EXPECT_THROW(GaussianPrior(mu, asym), std::invalid_argument);
    EXPECT_THROW(GaussianPrior(mu, Matrix::Identity(2, 2)), std::invalid_argument);
}

TEST(GaussianPrior, SampleMeanConvergesForIdentityCovariance) {
    const std::size_t n = 5;
    const GaussianPrior prior(Signal::zeros(Shape::line(n)), Matrix::Identity(n, n));
    RandomSource rng(2024);
    Vector sum = Vector::Zero(n);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) sum += prior_sample(prior, rng).values;
    const Vector mean = sum / draws;
    for (Eigen::Index i = 0; i < mean.size(); ++i) EXPECT_LT(std::abs(mean[i]), 3.0 / std::sqrt(draws));
}

TEST(GaussianPrior, SameSeedGivesBitIdenticalSamples) {
    const auto prior = fixture::small_prior();
    RandomSource a(9), b(9);
    EXPECT_EQ(prior_sample(*prior, a).values, prior_sample(*prior, b).values);
}

TEST(GaussianPrior, SquaredExponentialCovarianceAndBound) {
    const auto prior = GaussianPrior::squared_exponential(Shape::grid(4, 4), 2.0, 1e-4, 0.5, 1.0);
    const Matrix& s = prior.covariance();
    EXPECT_NEAR(s(0, 0), 1.0 + 1e-4, 1e-15);
    EXPECT_NEAR(s(0, 1), std::exp(-1.0 / 8.0), 1e-15);
    EXPECT_NEAR(s(0, 5), std::exp(-2.0 / 8.0), 1e-15);
    EXPECT_NEAR(prior.entry_bound(), 0.5 + 4.0 * std::sqrt(1.0 + 1e-4), 1e-12);
    EXPECT_LT((prior.cholesky_factor() * prior.cholesky_factor().transpose() - s).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PriorNll, AtMeanWithIdentityCovariance) {
    const std::size_t n = 6;
    const GaussianPrior prior(Signal::constant(Shape::line(n), 0.2), Matrix::Identity(n, n));
    EXPECT_NEAR(prior_nll(prior, prior.mean()), 0.5 * n * std::log(2.0 * std::numbers::pi), 1e-12);
}

TEST(PriorNll, MeanPlusCholeskyColumn) {
    const auto prior = fixture::small_prior(4);
    const Signal x = prior->mean().with_values(prior->mean().values + prior->cholesky_factor().col(0));
    const double n = static_cast<double>(prior->dim());
    const double expected = 0.5 * n * std::log(2.0 * std::numbers::pi) + 0.5 + 0.5 * prior->log_det();
    EXPECT_NEAR(prior_nll(*prior, x), expected, 1e-9);
}

TEST(PriorNll, MeanIsTheMinimumForIdentityCovariance) {
    const std::size_t n = 4;
    const GaussianPrior prior(Signal::zeros(Shape::line(n)), Matrix::Identity(n, n));
    const double at_mean = prior_nll(prior, prior.mean());
    RandomSource rng(3);
    for (int i = 0; i < 50; ++i) {
        EXPECT_GE(prior_nll(prior, Signal(rng.normal_vector(n), Shape::line(n))), at_mean);
    }
}

TEST(SeveritySchedule, KnotsAndInterpolation) {
    const auto s = SeveritySchedule::linear(0.3, 3.0);
    EXPECT_EQ(s.interpolate(0.0), 0.3);
    EXPECT_EQ(s.interpolate(1.0), 3.0);
    EXPECT_NEAR(s.interpolate(0.5), 1.65, 1e-15);
    const SeveritySchedule k({{0.0, 0.0}, {0.25, 1.0}, {1.0, 4.0}});
    EXPECT_EQ(k.interpolate(0.25), 1.0);
    EXPECT_NEAR(k.interpolate(0.625), 2.5, 1e-15);
    EXPECT_THROW(k.interpolate(1.5), std::out_of_range);
}

TEST(SeveritySchedule, RejectsMalformedKnots) {
    EXPECT_THROW(SeveritySchedule({{0.0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(SeveritySchedule({{0.1, 1.0}, {1.0, 2.0}}), std::invalid_argument);
    EXPECT_THROW(SeveritySchedule({{0.0, 2.0}, {1.0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(SeveritySchedule({{0.0, 1.0}, {0.0, 1.0}, {1.0, 2.0}}), std::invalid_argument);
    EXPECT_THROW(SeveritySchedule::linear(1.0, 2.0).scaled(0.0), std::invalid_argument);
}

TEST(SeveritySchedule, ScaledMultipliesParameters) {
    const auto s = SeveritySchedule::linear(0.3, 3.0).scaled(2.0);
    EXPECT_NEAR(s.w_min(), 0.6, 1e-15);
    EXPECT_NEAR(s.w_max(), 6.0, 1e-15);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) {
                     if (i == 7) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(Io, SignalRoundTripIsExact) {
    RandomSource rng(5);
    const Signal a(rng.normal_vector(12), Shape::grid(3, 4));
    const Signal b = io::decode_signal(io::encode_signal(a));
    EXPECT_EQ(a.shape, b.shape);
    EXPECT_EQ(a.values, b.values);
    const Signal line(rng.normal_vector(5), Shape::line(5));
    EXPECT_EQ(io::decode_signal(io::encode_signal(line)).shape, Shape::line(5));
}

TEST(Io, SignalDecodeRejectsCorruptData) {
    const std::string good = io::encode_signal(Signal::zeros(Shape::line(2)));
    EXPECT_THROW(io::decode_signal("NOTASIGN"), std::runtime_error);
    EXPECT_THROW(io::decode_signal(good.substr(0, good.size() - 1)), std::runtime_error);
    EXPECT_THROW(io::decode_signal(good + "x"), std::runtime_error);
}

TEST(Io, PgmClipsAndScales) {
    Vector v(3);
    v << -1.0, 0.5, 2.0;
    const std::string pgm = io::encode_pgm(Signal(v, Shape::line(3)));
    const std::string header = "P5\n3 1\n255\n";
    ASSERT_EQ(pgm.substr(0, header.size()), header);
    EXPECT_EQ(static_cast<unsigned char>(pgm[header.size()]), 0);
    EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 1]), 128);
    EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 2]), 255);
}

TEST(Io, FormatRealUsesNineSignificantDigits) {
    EXPECT_EQ(io::format_real(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(io::format_real(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(io::format_real(0.0), "0");
}
