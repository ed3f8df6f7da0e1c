#include "dirac/schedule.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace dirac;

namespace {

DistanceTable table_from(const Matrix& d) {
    DistanceTable t;
    t.candidates = uniform_candidates(static_cast<std::size_t>(d.rows()));
    for (std::size_t i = 0; i < t.candidates.size(); ++i) t.params.push_back(static_cast<double>(i));
    t.d = d;
    t.metric_name = "test";
    return t;
}

// d(i, j) = |f(i) - f(j)| for an increasing f.
DistanceTable line_table(const std::vector<double>& f) {
    const auto n = static_cast<Eigen::Index>(f.size());
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::abs(f[static_cast<std::size_t>(i)] - f[static_cast<std::size_t>(j)]);
    }
    return table_from(d);
}

// Exhaustive min over all sets of m interior candidates of the max edge.
double exhaustive_minmax(const DistanceTable& t, std::size_t m) {
    const std::size_t n = t.size();
    std::vector<std::size_t> pick(m);
    for (std::size_t i = 0; i < m; ++i) pick[i] = i + 1;
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        std::vector<std::size_t> s{0};
        s.insert(s.end(), pick.begin(), pick.end());
        s.push_back(n - 1);
        double worst = 0.0;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) worst = std::max(worst, t.d(s[i], s[i + 1]));
        best = std::min(best, worst);
        std::size_t k = m;
        while (k > 0 && pick[k - 1] == n - 2 - (m - k)) --k;
        if (k == 0) break;
        ++pick[k - 1];
        for (std::size_t j = k; j < m; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

std::vector<Signal> dataset(const GaussianPrior& prior, std::size_t count, std::uint64_t seed) {
    RandomSource rng(seed);
    std::vector<Signal> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(prior_sample(prior, rng));
    return out;
}

}  // namespace

TEST(PairwiseDistance, ZeroForIdenticalSeverities) {
    const auto prior = fixture::small_prior();
    const auto data = dataset(*prior, 4, 1);
    EXPECT_EQ(pairwise_distance(*fixture::small_blur(), 0.4, 0.4, data, Metric::rmse()), 0.0);
}

TEST(PairwiseDistance, ConstantImageIsBlurFixedPoint) {
    const std::vector<Signal> data{Signal::constant(Shape::grid(8, 8), 0.3)};
    EXPECT_LT(pairwise_distance(*fixture::small_blur(), 0.0, 1.0, data, Metric::rmse()), 1e-14);
}

TEST(DistanceTable, MatchesIndependentRecomputation) {
    const auto prior = fixture::small_prior();
    const auto data = dataset(*prior, 64, 2);
    const auto proc = fixture::small_inpaint();
    const auto table = build_distance_table(*proc, 6, data, Metric::rmse(), 4);
    table.validate();
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            double sum = 0.0;
            for (const auto& x : data) {
                const Vector diff = proc->apply(table.candidates[i], x).values - proc->apply(table.candidates[j], x).values;
                sum += std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
            }
            EXPECT_NEAR(table.d(i, j), sum / 64.0, 1e-12);
        }
    }
}

TEST(DistanceTable, IndependentOfThreadCount) {
    const auto prior = fixture::small_prior();
    const auto data = dataset(*prior, 8, 3);
    const auto a = build_distance_table(*fixture::small_blur(), 7, data, Metric::mse(), 1);
    const auto b = build_distance_table(*fixture::small_blur(), 7, data, Metric::mse(), 5);
    EXPECT_EQ(a.d, b.d);
}

TEST(DistanceTable, ValidateRejectsAsymmetry) {
    Matrix d = Matrix::Zero(3, 3);
    d(0, 1) = 1.0;
    EXPECT_THROW(table_from(d).validate(), std::invalid_argument);
}

TEST(Greedy, NoInsertionsGivesEndpoints) {
    const auto t = line_table({0, 1, 2, 3, 4});
    const auto g = greedy_schedule(t, 0);
    EXPECT_EQ(g.selected, (std::vector<std::size_t>{0, 4}));
    EXPECT_EQ(g.schedule.knots().size(), 2u);
}

TEST(Greedy, LinearMetricSplitsAtMiddle) {
    const auto g = greedy_schedule(line_table({0, 1, 2, 3, 4}), 1);
    EXPECT_EQ(g.selected, (std::vector<std::size_t>{0, 2, 4}));
    EXPECT_EQ(g.max_edge_trace, (std::vector<double>{4.0, 2.0}));
}

TEST(Greedy, RejectsTooManyKnots) {
    EXPECT_THROW(greedy_schedule(line_table({0, 1, 2}), 2), std::invalid_argument);
}

TEST(Greedy, AllZeroTableFallsBackToUniform) {
    const auto g = greedy_schedule(table_from(Matrix::Zero(9, 9)), 3);
    EXPECT_TRUE(g.degenerate);
    EXPECT_EQ(g.selected, uniform_selection(9, 3));
}

TEST(Greedy, LineMetricsGiveNonIncreasingTraces) {
    RandomSource rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + static_cast<std::size_t>(rng.uniform() * 9);
        std::vector<double> f{0.0};
        for (std::size_t i = 1; i < n; ++i) f.push_back(f.back() + rng.uniform() * rng.uniform());
        const auto t = line_table(f);
        const std::size_t m = std::min<std::size_t>(n - 2, 1 + static_cast<std::size_t>(rng.uniform() * 3));
        const auto g = greedy_schedule(t, m);
        for (std::size_t k = 1; k < g.max_edge_trace.size(); ++k) {
            ASSERT_LE(g.max_edge_trace[k], g.max_edge_trace[k - 1]);
        }
        ASSERT_GE(g.max_edge_trace.back(), exhaustive_minmax(t, m) - 1e-15);
        ASSERT_EQ(g.max_edge_trace.back(), max_edge_distance(t, g.selected));
    }
}

TEST(Greedy, NeverBeatsExhaustiveOptimum) {
    RandomSource rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(rng.uniform() * 6);
        Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = rng.uniform();
        }
        const auto t = table_from(d);
        for (std::size_t m = 1; m <= 3 && m + 2 <= n; ++m) {
            ASSERT_GE(greedy_schedule(t, m).max_edge_trace.back(), exhaustive_minmax(t, m) - 1e-15);
        }
    }
}

TEST(Greedy, CanMissTheMinMaxOptimum) {
    // The first split at 9 is locally best but {8, 15} beats every set containing it.
    const auto t = line_table({0, 8, 9, 15, 19, 20});
    const auto g = greedy_schedule(t, 2);
    EXPECT_EQ(g.max_edge_trace.back(), 9.0);
    EXPECT_EQ(exhaustive_minmax(t, 2), 8.0);
}

TEST(Greedy, RealTablesNeverWorseThanUniform) {
    const auto prior = fixture::small_prior();
    const auto data = dataset(*prior, 16, 6);
    for (const auto& proc : {fixture::small_blur(), fixture::small_inpaint()}) {
        const auto t = build_distance_table(*proc, 21, data, Metric::rmse(), 4);
        for (std::size_t m : {1u, 3u, 6u, 10u}) {
            const auto g = greedy_schedule(t, m);
            EXPECT_LE(g.max_edge_trace.back(), max_edge_distance(t, uniform_selection(21, m)) + 1e-15)
                << proc->name() << " m=" << m;
            for (std::size_t k = 1; k < g.max_edge_trace.size(); ++k) {
                EXPECT_LE(g.max_edge_trace[k], g.max_edge_trace[k - 1]) << proc->name();
            }
        }
    }
}

TEST(Greedy, ProducedSchedulesAreMonotone) {
    const auto prior = fixture::small_prior();
    const auto data = dataset(*prior, 8, 7);
    const auto t = build_distance_table(*fixture::small_blur(), 31, data, Metric::rmse(), 4);
    const auto g = greedy_schedule(t, 8);
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const double w = g.schedule.interpolate(i / 100.0);
        EXPECT_GE(w, prev);
        prev = w;
    }
    for (std::size_t k = 0; k < g.selected.size(); ++k) {
        EXPECT_EQ(g.schedule.knots()[k].w, t.params[g.selected[k]]);
    }
}

TEST(LocalImprovements, ZeroAtLineOptimum) {
    const auto t = line_table({0, 1, 2, 3, 4, 5, 6});
    const std::vector<std::size_t> s{0, 2, 4, 6};
    EXPECT_EQ(local_improvements(t, s), 0);
    const std::vector<std::size_t> bad{0, 1, 4, 6};
    EXPECT_GT(local_improvements(t, bad), 0);
}

TEST(UniformSelection, SpreadsIndices) {
    EXPECT_EQ(uniform_selection(11, 1), (std::vector<std::size_t>{0, 5, 10}));
    EXPECT_EQ(uniform_selection(11, 4), (std::vector<std::size_t>{0, 2, 4, 6, 8, 10}));
}

TEST(ScheduleFile, RoundTrip) {
    const SeveritySchedule s({{0.0, 0.3}, {0.5, 1.25}, {1.0, 3.0}});
    const auto text = encode_schedule(s, "blur", "rmse", 101, 1);
    EXPECT_EQ(text.substr(0, text.find('\n')), "# process=blur metric=rmse N=101 m=1");
    const auto f = decode_schedule(text);
    EXPECT_EQ(f.process, "blur");
    EXPECT_EQ(f.metric, "rmse");
    EXPECT_EQ(f.candidates, 101u);
    EXPECT_EQ(f.m, 1u);
    ASSERT_EQ(f.schedule.knots().size(), 3u);
    EXPECT_EQ(f.schedule.knots()[1].w, 1.25);
}

TEST(ScheduleFile, RejectsMalformedInput) {
    EXPECT_THROW(decode_schedule("0 0.3\n1 3\n"), std::runtime_error);
    EXPECT_THROW(decode_schedule("# process=blur bogus\n0 0.3\n1 3\n"), std::runtime_error);
    EXPECT_THROW(decode_schedule("# process=blur\n0 x\n"), std::runtime_error);
    EXPECT_THROW(decode_schedule("# process=blur\n0 3\n1 0.3\n"), std::invalid_argument);
}
