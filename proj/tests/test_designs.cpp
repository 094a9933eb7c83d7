#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <blockuniv/designs.hpp>

using namespace blockuniv;

namespace {

DesignSpec make_spec(Family family, Index p0, Index d, VectorXd lambda = {}) {
    DesignSpec spec;
    spec.family = family;
    spec.p0 = p0;
    spec.d = d;
    spec.lambda_diag = lambda.size() ? lambda : VectorXd::Ones(p0 * d);
    return spec;
}

/// Empirical second-moment matrix (1/n) X^T X.
MatrixXd second_moments(const MatrixXd& x) { return x.transpose() * x / static_cast<double>(x.rows()); }

/// Empirical correlation matrix.
MatrixXd correlations(const MatrixXd& x) {
    const MatrixXd centered = x.rowwise() - x.colwise().mean();
    MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    const VectorXd inv_sd = cov.diagonal().array().rsqrt();
    return inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
}

double max_cross_block_correlation(const MatrixXd& corr, Index d) {
    double worst = 0.0;
    for (Index i = 0; i < corr.rows(); ++i) {
        for (Index j = 0; j < corr.cols(); ++j) {
            if (i / d != j / d) worst = std::max(worst, std::abs(corr(i, j)));
        }
    }
    return worst;
}

}  // namespace

// --- trig_row --------------------------------------------------------------

TEST(TrigRow, QuarterPoint) {
    const VectorXd v = trig_row(0.25, 4);
    const double r2 = std::numbers::sqrt2;
    EXPECT_NEAR(v[0], 0.0, 1e-15);
    EXPECT_NEAR(v[1], r2, 1e-15);
    EXPECT_NEAR(v[2], -r2, 1e-15);
    EXPECT_NEAR(v[3], 0.0, 1e-15);
}

TEST(TrigRow, Origin) {
    const VectorXd v = trig_row(0.0, 2);
    EXPECT_DOUBLE_EQ(v[0], std::numbers::sqrt2);
    EXPECT_DOUBLE_EQ(v[1], 0.0);
}

TEST(TrigRow, RejectsOddDimensionAndOutOfRange) {
    EXPECT_THROW(trig_row(0.5, 3), InvalidSpec);
    EXPECT_THROW(trig_row(0.5, 0), InvalidSpec);
    EXPECT_THROW(trig_row(-0.01, 2), DomainError);
    EXPECT_THROW(trig_row(1.01, 2), DomainError);
}

TEST(TrigRow, OrthonormalUnderUniform) {
    KeyedStream rng(StreamKey(99));
    const int n = 1000000;
    VectorXd mean = VectorXd::Zero(6);
    MatrixXd gram = MatrixXd::Zero(6, 6);
    for (int i = 0; i < n; ++i) {
        const VectorXd v = trig_row(rng.uniform(), 6);
        mean += v;
        gram.selfadjointView<Eigen::Lower>().rankUpdate(v);
    }
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    mean /= n;
    gram /= n;
    EXPECT_LE(mean.lpNorm<Eigen::Infinity>(), 0.005);
    EXPECT_LE((gram - MatrixXd::Identity(6, 6)).lpNorm<Eigen::Infinity>(), 0.005);
}

// --- gwas ------------------------------------------------------------------

TEST(GwasRow, TableRows) {
    const double r3 = std::sqrt(3.0);
    const VectorXd a1 = gwas_outcome_row(3, 1);
    EXPECT_EQ(a1, (VectorXd(3) << r3, 0, 0).finished());
    const VectorXd a6 = gwas_outcome_row(3, 6);
    EXPECT_EQ(a6, (VectorXd(3) << 0, 0, -r3).finished());
    EXPECT_THROW(gwas_outcome_row(3, 7), DomainError);
    EXPECT_THROW(gwas_outcome_row(0, 1), InvalidSpec);
}

TEST(GwasRow, EnumeratedCovarianceIsIdentity) {
    for (Index d : {1, 3, 7}) {
        VectorXd mean = VectorXd::Zero(d);
        MatrixXd cov = MatrixXd::Zero(d, d);
        MatrixXd unscaled = MatrixXd::Zero(d, d);
        for (Index j = 1; j <= 2 * d; ++j) {
            const VectorXd v = gwas_outcome_row(d, j);
            mean += v / (2.0 * d);
            cov += v * v.transpose() / (2.0 * d);
            const VectorXd u = v / std::sqrt(static_cast<double>(d));
            unscaled += u * u.transpose() / (2.0 * d);
        }
        EXPECT_LE(mean.norm(), 1e-15);
        EXPECT_LE((cov - MatrixXd::Identity(d, d)).lpNorm<Eigen::Infinity>(), 1e-14);
        EXPECT_LE((unscaled - MatrixXd::Identity(d, d) / static_cast<double>(d)).lpNorm<Eigen::Infinity>(), 1e-15);
    }
}

TEST(GwasRow, SampledRowsHitEveryOutcome) {
    KeyedStream rng(StreamKey(3));
    std::array<int, 6> counts{};
    for (int i = 0; i < 6000; ++i) {
        const VectorXd v = gwas_block_row(3, rng);
        Index k;
        const double x = v.cwiseAbs().maxCoeff(&k);
        ASSERT_NEAR(x, std::sqrt(3.0), 1e-15);
        ++counts[static_cast<std::size_t>(2 * k + (v[k] < 0 ? 1 : 0))];
    }
    for (int c : counts) EXPECT_GT(c, 850);
}

// --- functional block --------------------------------------------------------

TEST(FunctionalRow, ZeroMultiplierGivesZeroVector) {
    VLaw always_zero;
    always_zero.prob_zero = 1.0;
    KeyedStream rng(StreamKey(1));
    for (int i = 0; i < 10; ++i) EXPECT_TRUE(functional_block_row(5, always_zero, rng).isZero());
}

TEST(FunctionalRow, VLawMomentsByEnumeration) {
    const VLaw v;
    // E[V^2] = 1/2 * 0 + 1/4 * 2 + 1/4 * 2; E[V^4] = 1/4 * 4 + 1/4 * 4.
    EXPECT_DOUBLE_EQ(v.second_moment(), 0.5 * 0.0 + 0.25 * 2.0 + 0.25 * 2.0);
    EXPECT_NEAR(v.fourth_moment(), 2.0, 1e-15);
}

TEST(FunctionalRow, UncorrelatedButDependent) {
    KeyedStream rng(StreamKey(17));
    const VLaw law;
    const int n = 200000;
    double m1 = 0, m2 = 0, cross = 0, sq_cross = 0;
    for (int i = 0; i < n; ++i) {
        const VectorXd w = functional_block_row(4, law, rng);
        m1 += w[0];
        m2 += w[0] * w[0];
        cross += w[0] * w[1];
        sq_cross += w[0] * w[0] * w[1] * w[1];
        for (int k = 0; k < 4; ++k) ASSERT_TRUE(w[k] == 0.0 || std::abs(std::abs(w[k]) - std::numbers::sqrt2) < 1e-15);
    }
    EXPECT_NEAR(m1 / n, 0.0, 0.01);
    EXPECT_NEAR(m2 / n, 1.0, 0.01);
    EXPECT_NEAR(cross / n, 0.0, 0.01);
    // E[W_j^2 W_k^2] = E[V^4] = 2, not E[W_j^2] E[W_k^2] = 1.
    EXPECT_NEAR(sq_cross / n, 2.0, 0.03);
}

// --- sample_design ------------------------------------------------------------

TEST(SampleDesign, GaussianControlShape) {
    const auto d = sample_design(make_spec(Family::GaussianControl, 2, 1), 3, StreamKey(1));
    EXPECT_EQ(d.x.rows(), 3);
    EXPECT_EQ(d.x.cols(), 2);
    EXPECT_TRUE(d.structure.is_valid_partition(2));
}

TEST(SampleDesign, AdditiveTrigDimensions) {
    const auto d = sample_design(make_spec(Family::AdditiveTrig, 30, 10), 200, StreamKey(2));
    EXPECT_EQ(d.x.rows(), 200);
    EXPECT_EQ(d.x.cols(), 300);
    EXPECT_DOUBLE_EQ(300.0 / 200.0, 1.5);
    EXPECT_EQ(d.structure.num_blocks(), 30);
}

TEST(SampleDesign, RejectsInvalidSpecs) {
    EXPECT_THROW(sample_design(make_spec(Family::AdditiveTrig, 3, 3), 5, StreamKey(1)), InvalidSpec);
    VectorXd lam = VectorXd::Constant(4, 2.0);
    EXPECT_THROW(sample_design(make_spec(Family::GwasTable, 2, 2, lam), 5, StreamKey(1)), InvalidSpec);
    lam[0] = -1.0;
    EXPECT_THROW(sample_design(make_spec(Family::FunctionalBlock, 2, 2, lam), 5, StreamKey(1)), InvalidSpec);
    EXPECT_THROW(sample_design(make_spec(Family::GaussianControl, 2, 2), 0, StreamKey(1)), InvalidSpec);
}

TEST(SampleDesign, DeterministicAndOrderIndependent) {
    const auto spec = make_spec(Family::FunctionalBlock, 4, 3, VectorXd::LinSpaced(12, 1.0, 2.0));
    const auto a = sample_design(spec, 50, StreamKey(123));
    const auto b = sample_design(spec, 50, StreamKey(123));
    EXPECT_TRUE((a.x.array() == b.x.array()).all());
    // Row i depends only on (key, i).
    EXPECT_TRUE((sample_row(spec, StreamKey(123).child(37)).transpose().array() == a.x.row(37).array()).all());
    const auto c = sample_design(spec, 50, StreamKey(124));
    EXPECT_FALSE((a.x.array() == c.x.array()).all());
}

TEST(SampleDesign, FunctionalMomentsMatchLambda) {
    auto spec = make_spec(Family::FunctionalBlock, 3, 4);
    spec.lambda_diag = make_lambda_diag(LambdaMode::UniformSqrt, 3, 4, StreamKey(8));
    for (Index i = 0; i < 12; ++i) {
        EXPECT_GE(spec.lambda_diag[i], 1.0);
        EXPECT_LE(spec.lambda_diag[i], 4.0);
        EXPECT_EQ(spec.lambda_diag[i], spec.lambda_diag[i % 4]);
    }
    const auto d = sample_design(spec, 20000, StreamKey(9));
    const MatrixXd m = second_moments(d.x);
    EXPECT_LE((m - MatrixXd(spec.lambda_diag.asDiagonal())).lpNorm<Eigen::Infinity>(), 0.1);
}

class FamilyMoments : public ::testing::TestWithParam<Family> {};

TEST_P(FamilyMoments, SecondMomentsAndCrossBlockIndependence) {
    const Family family = GetParam();
    const Index p0 = 6, d = 4;
    auto spec = make_spec(family, p0, d);
    if (family == Family::FunctionalBlock || family == Family::GaussianControl) {
        spec.lambda_diag = make_lambda_diag(LambdaMode::UniformSqrt, p0, d, StreamKey(77));
    }
    const auto design = sample_design(spec, 20000, StreamKey(1000 + static_cast<int>(family)));
    ASSERT_TRUE(design.structure.is_valid_partition(p0 * d));
    const MatrixXd m = second_moments(design.x);
    EXPECT_LE((m - MatrixXd(spec.lambda_diag.asDiagonal())).lpNorm<Eigen::Infinity>(), 0.15);
    EXPECT_LE(max_cross_block_correlation(correlations(design.x), d), 0.05);
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, FamilyMoments,
                         ::testing::Values(Family::GaussianControl, Family::AdditiveTrig, Family::FunctionalBlock,
                                           Family::GwasTable),
                         [](const auto& info) {
                             std::string s(to_string(info.param));
                             std::erase(s, '-');
                             return s;
                         });

// --- BlockStructure ---------------------------------------------------------

TEST(BlockStructure, PartitionChecks) {
    const auto s = BlockStructure::contiguous(3, 2);
    EXPECT_TRUE(s.is_valid_partition(6));
    EXPECT_FALSE(s.is_valid_partition(7));
    EXPECT_EQ(s.block_of(3), 1);
    EXPECT_FALSE(BlockStructure({{0, 1}, {1, 2}}, 2).is_valid_partition(3));
    EXPECT_FALSE(BlockStructure({{0, 1, 2}}, 2).is_valid_partition(3));
    EXPECT_TRUE(BlockStructure({{2, 0}, {1}}, 2).is_valid_partition(3));
}

// --- responses ----------------------------------------------------------------

TEST(SimulateResponses, ZeroSignalGivesNoise) {
    const MatrixXd x = MatrixXd::Random(10, 3);
    const auto r = simulate_responses(x, VectorXd::Zero(3), 1.0, StreamKey(4));
    EXPECT_EQ(r.y, r.xi);
}

TEST(SimulateResponses, NoiselessIdentityDesignReturnsSignal) {
    const VectorXd beta0 = VectorXd::LinSpaced(5, -1.0, 3.0);
    const auto r = simulate_responses(MatrixXd::Identity(5, 5), beta0, 1e-12, StreamKey(4));
    EXPECT_LE((r.y - beta0).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(SimulateResponses, NoiseVarianceMatchesSigma) {
    const Index n = 100000;
    const MatrixXd x = MatrixXd::Ones(n, 2);
    const VectorXd beta0 = (VectorXd(2) << 0.5, -1.0).finished();
    for (NoiseKind kind : {NoiseKind::Gaussian, NoiseKind::Rademacher}) {
        const auto r = simulate_responses(x, beta0, 1.7, StreamKey(5), kind);
        const VectorXd resid = r.y - x * beta0;
        const double var = (resid.array() - resid.mean()).square().sum() / (n - 1);
        EXPECT_NEAR(var / (1.7 * 1.7), 1.0, 0.02);
    }
}

TEST(SimulateResponses, DimensionMismatch) {
    EXPECT_THROW(simulate_responses(MatrixXd::Ones(4, 3), VectorXd::Ones(2), 1.0, StreamKey(1)), DimensionMismatch);
}

TEST(Signal, BernoulliScaledEntries) {
    SignalSpec spec;
    const Index n = 200;
    const VectorXd b = make_signal(spec, 300, n, StreamKey(6));
    int nonzero = 0;
    for (Index i = 0; i < b.size(); ++i) {
        ASSERT_TRUE(b[i] == 0.0 || b[i] == 1.0 / std::sqrt(200.0));
        nonzero += b[i] != 0.0;
    }
    EXPECT_GT(nonzero, 100);
    EXPECT_LT(nonzero, 200);
    EXPECT_TRUE(make_signal({SignalKind::Zero}, 4, n, StreamKey(6)).isZero());
}

TEST(Dataset, ConstructionInvariants) {
    const auto spec = make_spec(Family::GwasTable, 5, 2);
    const VectorXd beta0 = VectorXd::LinSpaced(10, 0.0, 1.0);
    const auto data = make_dataset(spec, 40, beta0, 0.5, StreamKey(11));
    EXPECT_NO_THROW(data.check());
    EXPECT_EQ(data.y, data.x * data.beta0 + data.xi);
    EXPECT_TRUE(data.structure.is_valid_partition(10));
}
