#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "esp/similarity.hpp"
#include "oracles.hpp"

namespace {

using esp::Channels;
using esp::ScalarField;

TEST(Similarity, VarianceDirectArithmetic) {
    const Channels img{ScalarField(1, 1, 0.8)};
    const auto o = esp::variance_similarity(img, {{0.9}, {0.1}});
    EXPECT_NEAR(o[0][0], -0.01, 1e-15);
    EXPECT_NEAR(o[1][0], -0.49, 1e-15);
    EXPECT_EQ(esp::variance_similarity(img, {{0.8}, {0.0}})[0][0], 0.0);
}

TEST(Similarity, VarianceMatchesLoopOracle) {
    std::mt19937_64 rng(31);
    const Channels img{esp::oracle::random_field(8, 8, rng, 0, 1), esp::oracle::random_field(8, 8, rng, 0, 1)};
    const std::vector<esp::ChannelVector> means{{0.2, 0.7}, {0.9, 0.1}, {0.5, 0.5}};
    const auto o = esp::variance_similarity(img, means);
    ASSERT_EQ(o.classes(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 8; ++c) {
                const double d0 = img[0](r, c) - means[i][0], d1 = img[1](r, c) - means[i][1];
                EXPECT_EQ(o[i](r, c), -(d0 * d0 + d1 * d1));
            }
}

TEST(Similarity, MahalanobisDiagonalCase) {
    const Channels img{ScalarField(1, 1, 2.5), ScalarField(1, 1, -0.5)};
    Eigen::MatrixXd cov(2, 2);
    cov << 4, 0, 0, 1;
    const auto o = esp::mahalanobis_similarity(img, {{0.5, -1.5}}, {cov});
    EXPECT_NEAR(o[0][0], -2.0, 1e-14);
}

TEST(Similarity, MahalanobisIdentityEqualsVarianceExactly) {
    std::mt19937_64 rng(37);
    const Channels img{esp::oracle::random_field(6, 7, rng), esp::oracle::random_field(6, 7, rng),
                       esp::oracle::random_field(6, 7, rng)};
    const std::vector<esp::ChannelVector> means{{0.1, 0.2, 0.3}, {-0.4, 0.0, 0.9}};
    const std::vector<Eigen::MatrixXd> eye(2, Eigen::MatrixXd::Identity(3, 3));
    EXPECT_EQ(esp::mahalanobis_similarity(img, means, eye), esp::variance_similarity(img, means));
}

TEST(Similarity, MahalanobisMatchesExplicitInverse) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> n01;
    const Channels img{esp::oracle::random_field(5, 5, rng), esp::oracle::random_field(5, 5, rng)};
    const std::vector<esp::ChannelVector> means{{0.3, -0.2}, {-0.6, 0.4}};
    std::vector<Eigen::MatrixXd> covs;
    for (int i = 0; i < 2; ++i) {
        Eigen::MatrixXd a(2, 2);
        a << n01(rng), n01(rng), n01(rng), n01(rng);
        covs.push_back(a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(2, 2));
    }
    const auto o = esp::mahalanobis_similarity(img, means, covs);
    for (std::size_t i = 0; i < 2; ++i) {
        const Eigen::Matrix2d inv = Eigen::Matrix2d(covs[i]).inverse();
        for (std::size_t p = 0; p < 25; ++p) {
            const Eigen::Vector2d d(img[0][p] - means[i][0], img[1][p] - means[i][1]);
            const double ref = -d.dot(inv * d);
            EXPECT_NEAR(o[i][p], ref, 1e-10 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST(Similarity, MahalanobisRejectsSingularAndAsymmetric) {
    const Channels img{ScalarField(2, 2, 0.1), ScalarField(2, 2, 0.2)};
    Eigen::MatrixXd singular(2, 2);
    singular << 1, 1, 1, 1;
    EXPECT_THROW(esp::mahalanobis_similarity(img, {{0, 0}}, {singular}), esp::SingularMatrix);
    Eigen::MatrixXd asym(2, 2);
    asym << 2, 1, 0, 2;
    EXPECT_THROW(esp::mahalanobis_similarity(img, {{0, 0}}, {asym}), esp::SingularMatrix);
    EXPECT_THROW(esp::mahalanobis_similarity(img, {{0, 0}}, {Eigen::MatrixXd::Identity(3, 3)}),
                 esp::DimensionMismatch);
}

TEST(Similarity, ChannelCountChecked) {
    const Channels img{ScalarField(2, 2), ScalarField(2, 3)};
    EXPECT_THROW(esp::variance_similarity(img, {{0, 0}}), esp::DimensionMismatch);
    const Channels ok{ScalarField(2, 2)};
    EXPECT_THROW(esp::variance_similarity(ok, {{0, 0}}), esp::DimensionMismatch);
}

TEST(KMeans, TwoValuedImageRecoversBothLevels) {
    ScalarField f(6, 6, 0.0);
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 3; c < 6; ++c) f(r, c) = 1.0;
    auto means = esp::kmeans_init({f}, 2, 10, 7);
    std::sort(means.begin(), means.end());
    EXPECT_EQ(means[0][0], 0.0);
    EXPECT_EQ(means[1][0], 1.0);
}

TEST(KMeans, ConstantImageGivesEqualMeans) {
    const auto means = esp::kmeans_init({ScalarField(4, 5, 0.37)}, 3, 10, 1);
    ASSERT_EQ(means.size(), 3u);
    for (const auto& m : means) EXPECT_DOUBLE_EQ(m[0], 0.37);
}

TEST(KMeans, ObjectiveIsNonIncreasing) {
    std::mt19937_64 rng(43);
    const Channels img{esp::oracle::random_field(16, 16, rng, 0, 1), esp::oracle::random_field(16, 16, rng, 0, 1)};
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        const auto res = esp::kmeans(img, 4, 20, seed);
        ASSERT_FALSE(res.objective.empty());
        for (std::size_t t = 1; t < res.objective.size(); ++t)
            EXPECT_LE(res.objective[t], res.objective[t - 1] + 1e-12) << "seed " << seed << " step " << t;
    }
}

TEST(KMeans, DeterministicForSeed) {
    std::mt19937_64 rng(47);
    const Channels img{esp::oracle::random_field(10, 10, rng)};
    const auto a = esp::kmeans(img, 3, 20, 5), b = esp::kmeans(img, 3, 20, 5);
    EXPECT_EQ(a.means, b.means);
    EXPECT_EQ(a.labels, b.labels);
}

TEST(KMeans, CovariancesWithRidgeArePositiveDefinite) {
    ScalarField f(4, 4, 0.0);
    for (std::size_t p = 8; p < 16; ++p) f[p] = 1.0;
    const Channels img{f, f};
    const auto res = esp::kmeans(img, 2, 10, 0);
    const auto covs = esp::class_covariances(img, res.labels, res.means, 1e-4);
    for (const auto& c : covs) EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(c).info(), Eigen::Success);
}

} // namespace
