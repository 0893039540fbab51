#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "decomposite/core_linalg.hpp"
#include "decomposite/mean_tests.hpp"
#include "decomposite/parallel.hpp"

namespace decomposite {
namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> nd;
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
}

DataMatrix shifted_sample(Index n, Index p, double shift, std::uint64_t seed) {
    return sample_mvn(Vector::Constant(p, shift), ar1_covariance(0.5, p), n, seed);
}

// ── hotelling_t2 ─────────────────────────────────────────────────────

TEST(HotellingTest, UnivariateHandComputation) {
    Matrix x(3, 1);
    x << 1, 2, 3;
    EXPECT_NEAR(hotelling_t2(DataMatrix(x)).statistic, 12.0, 1e-12);
}

TEST(HotellingTest, ZeroMeanGivesZero) {
    Matrix x = random_matrix(12, 4, 1);
    x.rowwise() -= x.colwise().mean();
    EXPECT_NEAR(hotelling_t2(DataMatrix(x)).statistic, 0.0, 1e-12);
}

TEST(HotellingTest, FPValueMatchesIncompleteBeta) {
    const DataMatrix x = shifted_sample(30, 5, 0.2, 4);
    const TestOutcome t = hotelling_t2(x);
    const double n = 30, p = 5;
    const double f = t.statistic * (n - p) / (p * (n - 1));
    const double d1 = p, d2 = n - p;
    const double oracle = boost::math::ibeta(d2 / 2, d1 / 2, d2 / (d2 + d1 * f));
    ASSERT_TRUE(t.p_value.has_value());
    EXPECT_NEAR(*t.p_value, oracle, 1e-12);
    EXPECT_EQ(*t.df1, 5.0);
    EXPECT_EQ(*t.df2, 25.0);
    EXPECT_FALSE(t.notes.empty());
}

TEST(HotellingTest, Errors) {
    EXPECT_THROW(hotelling_t2(DataMatrix(random_matrix(5, 5, 2))), ComputationError);
    Matrix x = random_matrix(10, 3, 3);
    x.col(2) = x.col(0);
    EXPECT_THROW(hotelling_t2(DataMatrix(x)), ComputationError);
}

TEST(HotellingProperty, AffineInvariance) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const DataMatrix x = shifted_sample(25, 6, 0.3, seed);
        const Matrix a = random_matrix(6, 6, 100 + seed) + 3.0 * Matrix::Identity(6, 6);
        const double t1 = hotelling_t2(x).statistic;
        const double t2 = hotelling_t2(DataMatrix(x.values() * a)).statistic;
        EXPECT_NEAR(t1, t2, 1e-8 * t1);
    }
}

// ── decomposite_t2 ───────────────────────────────────────────────────

TEST(DecompositeTest, SampleSpectrumReproducesHotelling) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const DataMatrix x = shifted_sample(15 + static_cast<Index>(seed), 8, 0.1, seed);
        const double h = hotelling_t2(x).statistic;
        EXPECT_NEAR(decomposite_t2(x, PrecisionMethod::Sample).statistic, h, 1e-10 * std::max(1.0, h));
    }
}

TEST(DecompositeTest, NonnegativeAndRecordsSpectrum) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const DataMatrix x = shifted_sample(40, 20, 0.0, seed);
        const TestOutcome t = decomposite_t2(x);
        EXPECT_GE(t.statistic, 0.0);
        EXPECT_EQ(t.spectrum.size(), 20u);
        EXPECT_EQ(t.method, "decomposite");
    }
}

TEST(DecompositeTest, ChiSquareMeanUnderNull) {
    constexpr std::size_t reps = 200;
    std::vector<double> t(reps);
    parallel_for(reps, [&](std::size_t r) {
        const DataMatrix x = sample_mvn(Vector::Zero(100), Matrix::Identity(100, 100), 400, derive_seed(71, r));
        t[r] = decomposite_t2(x).statistic;
    });
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / reps;
    EXPECT_GE(mean, 95.0);
    EXPECT_LE(mean, 105.0);
}

TEST(DecompositeTest, ReducesToHotellingAtFixedSmallP) {
    double gap = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Matrix a = random_matrix(2, 2, 500 + seed);
        const Matrix sigma = a * a.transpose() + 0.1 * Matrix::Identity(2, 2);
        const DataMatrix x = sample_mvn(Vector::Zero(2), sigma, 10000, seed);
        const double h = hotelling_t2(x).statistic;
        gap += std::abs(decomposite_t2(x).statistic - h) / h / 20.0;
    }
    EXPECT_LE(gap, 0.05);
}

// ── variants ─────────────────────────────────────────────────────────

TEST(VariantTest, BaiSaranadasaArithmetic) {
    Matrix x(2, 2);
    x << 0, 2, 2, 0;
    EXPECT_DOUBLE_EQ(variant_statistic(DataMatrix(x), Variant::BaiSaranadasa).statistic, 4.0);
}

TEST(VariantTest, RidgeLimitApproachesBaiSaranadasa) {
    const DataMatrix x = shifted_sample(20, 10, 0.4, 9);
    const double bs = variant_statistic(x, Variant::BaiSaranadasa).statistic;
    double previous = std::numeric_limits<double>::infinity();
    for (double r : {1e2, 1e4, 1e6, 1e8}) {
        const double scaled = r * variant_statistic(x, Variant::Ridge, r).statistic;
        const double err = std::abs(scaled - bs) / bs;
        EXPECT_LT(err, previous);
        previous = err;
    }
    EXPECT_LT(previous, 1e-6);
}

TEST(VariantTest, DiagonalEqualsBsForUnitVariances) {
    Matrix x = random_matrix(30, 5, 10);
    const Vector mean = x.colwise().mean();
    for (Index j = 0; j < 5; ++j) {
        const double sd = std::sqrt((x.col(j).array() - mean(j)).square().sum() / 29.0);
        x.col(j) /= sd;
    }
    const DataMatrix d(x);
    EXPECT_NEAR(variant_statistic(d, Variant::Diagonal).statistic,
                variant_statistic(d, Variant::BaiSaranadasa).statistic, 1e-10);
}

TEST(VariantTest, RidgeNeedsPositiveLambda) {
    const DataMatrix x = shifted_sample(20, 4, 0.0, 1);
    EXPECT_THROW(variant_statistic(x, Variant::Ridge), std::invalid_argument);
    EXPECT_THROW(variant_statistic(x, Variant::Ridge, 0.0), std::invalid_argument);
}

TEST(VariantProperty, BsOrthogonalInvarianceOnly) {
    const DataMatrix x = shifted_sample(25, 5, 0.3, 12);
    const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(5, 5, 13)).householderQ();
    const double bs = variant_statistic(x, Variant::BaiSaranadasa).statistic;
    EXPECT_NEAR(variant_statistic(DataMatrix(x.values() * q), Variant::BaiSaranadasa).statistic, bs, 1e-10 * bs);
    const Matrix scale = Vector::LinSpaced(5, 1.0, 3.0).asDiagonal();
    EXPECT_GT(std::abs(variant_statistic(DataMatrix(x.values() * scale), Variant::BaiSaranadasa).statistic - bs),
              1e-3 * bs);
}

// ── composite_t2 ─────────────────────────────────────────────────────

TEST(CompositeTest, SingleBlockIsHotelling) {
    const DataMatrix x = shifted_sample(30, 6, 0.2, 14);
    EXPECT_NEAR(composite_t2(x, 1).statistic, hotelling_t2(x).statistic, 1e-10);
}

TEST(CompositeTest, UnitBlocksAreDiagonal) {
    const DataMatrix x = shifted_sample(30, 6, 0.2, 15);
    const Vector mean = x.values().colwise().mean();
    const Matrix s = sample_moments(x).cov;
    double oracle = 0.0;
    for (Index i = 0; i < 6; ++i) oracle += 30.0 * mean(i) * mean(i) / s(i, i);
    EXPECT_NEAR(composite_t2(x, 6).statistic, oracle, 1e-10);
    EXPECT_NEAR(composite_t2(x, 6).statistic, variant_statistic(x, Variant::Diagonal).statistic, 1e-10);
}

TEST(CompositeTest, BlocksAndRemainder) {
    EXPECT_EQ(contiguous_blocks(20, 2), (std::vector<Index>{10, 10}));
    EXPECT_EQ(contiguous_blocks(7, 3), (std::vector<Index>{2, 2, 3}));
    EXPECT_THROW(contiguous_blocks(5, 0), std::invalid_argument);
    EXPECT_THROW(contiguous_blocks(5, 6), std::invalid_argument);
    const DataMatrix x = shifted_sample(30, 7, 0.0, 1);
    EXPECT_EQ(composite_t2(x, 3).block_sizes, (std::vector<Index>{2, 2, 3}));
    EXPECT_THROW(composite_t2(shifted_sample(5, 10, 0.0, 2), 1), ComputationError);
}

TEST(CompositeTest, NullMeanMatchesBlockHotellingMoments) {
    // Block-diagonal Sigma aligned with the K=2 partition; each block T2 has
    // mean p_k (n-1) / (n - p_k - 2) under H0.
    const Index n = 20, p = 6;
    Matrix sigma = Matrix::Zero(p, p);
    sigma.topLeftCorner(3, 3) = ar1_covariance(0.7, 3);
    sigma.bottomRightCorner(3, 3) = ar1_covariance(-0.4, 3);
    constexpr std::size_t reps = 10000;
    std::vector<double> t(reps);
    parallel_for(reps, [&](std::size_t r) {
        t[r] = composite_t2(sample_mvn(Vector::Zero(p), sigma, n, derive_seed(90, r)), 2).statistic;
    });
    const double mean = std::accumulate(t.begin(), t.end(), 0.0) / reps;
    double var = 0.0;
    for (double v : t) var += (v - mean) * (v - mean) / (reps - 1);
    const double expected = 2.0 * 3.0 * (n - 1.0) / (n - 3.0 - 2.0);
    EXPECT_NEAR(mean, expected, 4.0 * std::sqrt(var / reps));
}

// ── normalized_decomposite ───────────────────────────────────────────

TEST(NormalizedTest, Arithmetic) {
    EXPECT_DOUBLE_EQ(normalized_statistic(50.0, std::vector<double>(50, 1.0)), 0.0);
    EXPECT_NEAR(normalized_statistic(120.0, std::vector<double>(100, 1.0)), 1.41421, 5e-6);
    EXPECT_THROW(normalized_statistic(1.0, {}), std::invalid_argument);
}

TEST(NormalizedTest, OutcomeFields) {
    const TestOutcome t = normalized_decomposite(shifted_sample(60, 20, 0.0, 3));
    ASSERT_TRUE(t.normalized && t.p_value);
    EXPECT_NEAR(*t.normalized, normalized_statistic(t.statistic, t.spectrum), 1e-14);
    EXPECT_NEAR(*t.p_value, 1.0 - standard_normal_cdf(*t.normalized), 1e-12);
    EXPECT_GE(*t.p_value, 0.0);
    EXPECT_LE(*t.p_value, 1.0);
}

TEST(NormalizedTest, SizeCalibrationUnderNull) {
    constexpr std::size_t reps = 2000;
    std::vector<int> reject(reps);
    parallel_for(reps, [&](std::size_t r) {
        const DataMatrix x = sample_mvn(Vector::Zero(100), Matrix::Identity(100, 100), 400, derive_seed(72, r));
        reject[r] = *normalized_decomposite(x).p_value < 0.05;
    });
    const double rate = std::accumulate(reject.begin(), reject.end(), 0.0) / reps;
    EXPECT_GE(rate, 0.03);
    EXPECT_LE(rate, 0.07);
}

// ── shared properties ────────────────────────────────────────────────

TEST(StatisticsProperty, RowPermutationInvariance) {
    const DataMatrix x = shifted_sample(40, 10, 0.2, 20);
    std::vector<Index> order(40);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), Rng(5));
    Matrix permuted(40, 10);
    for (Index i = 0; i < 40; ++i) permuted.row(i) = x.values().row(order[i]);
    const DataMatrix y(permuted);
    for (StatisticKind k : {StatisticKind::Hotelling, StatisticKind::Decomposite, StatisticKind::Stein,
                            StatisticKind::BaiSaranadasa, StatisticKind::Diagonal, StatisticKind::Ridge,
                            StatisticKind::Composite}) {
        StatisticSpec spec;
        spec.kind = k;
        spec.ridge = 0.5;
        const double a = compute_statistic(x, spec), b = compute_statistic(y, spec);
        EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, a)) << to_string(k);
    }
}

TEST(StatisticsProperty, NamesRoundTrip) {
    for (StatisticKind k : {StatisticKind::Hotelling, StatisticKind::Decomposite, StatisticKind::Stein,
                            StatisticKind::BaiSaranadasa, StatisticKind::Diagonal, StatisticKind::Ridge,
                            StatisticKind::Composite}) {
        EXPECT_EQ(parse_statistic_kind(to_string(k)), k);
    }
    EXPECT_FALSE(parse_statistic_kind("nosuch").has_value());
}

}  // namespace
}  // namespace decomposite
