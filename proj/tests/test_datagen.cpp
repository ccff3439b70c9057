#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "regfuse/datagen.hpp"
#include "regfuse/error.hpp"
#include "regfuse/metrics.hpp"
#include "regfuse/nn_index.hpp"
#include "test_support.hpp"

using namespace regfuse;

namespace {

// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
double kolmogorov_p(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

PairSpec spec_with(std::uint64_t seed, ShapeKind shape = ShapeKind::RandomBlob) {
    PairSpec s;
    s.seed = RngSeed{seed};
    s.shape = shape;
    return s;
}

}  // namespace

TEST(GeneratePair, FullOverlapIsExactCopy) {
    PairSpec s = spec_with(3);
    s.overlap_target = 1.0;
    const GeneratedPair p = generate_pair(s);
    EXPECT_EQ(p.src, apply_transform(p.tgt, invert(p.gt)));
    EXPECT_TRUE(std::all_of(p.overlap_mask_src.begin(), p.overlap_mask_src.end(), [](bool b) { return b; }));
}

TEST(GeneratePair, PlantedOverlapNearTarget) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const GeneratedPair p = generate_pair(spec_with(seed));
        EXPECT_GE(p.planted_overlap(), 0.65) << seed;
        EXPECT_LE(p.planted_overlap(), 0.75) << seed;
        EXPECT_EQ(p.src.size(), 512u);
        EXPECT_EQ(p.tgt.size(), 512u);
    }
}

TEST(GeneratePair, EveryShapeFamilyWorks) {
    for (auto shape : {ShapeKind::RandomBlob, ShapeKind::Plane, ShapeKind::Cylinder, ShapeKind::Box,
                       ShapeKind::Composite}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            for (double overlap : {0.3, 0.7}) {
                PairSpec s = spec_with(seed, shape);
                s.overlap_target = overlap;
                const GeneratedPair p = generate_pair(s);
                EXPECT_NEAR(p.planted_overlap(), overlap, 0.05) << to_string(shape) << " seed " << seed;
            }
        }
    }
    EXPECT_EQ(shape_kind_from_string("cylinder"), ShapeKind::Cylinder);
    EXPECT_THROW(shape_kind_from_string("torus"), InvalidInput);
}

TEST(GeneratePair, MaskedPointsLandOnTarget) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GeneratedPair p = generate_pair(spec_with(seed));
        const KdTree tgt(p.tgt);
        for (std::size_t i = 0; i < p.src.size(); ++i) {
            const double d = tgt.nearest(p.gt(p.src[i])).sq_distance;
            if (p.overlap_mask_src[i]) {
                EXPECT_LT(d, 1e-20);
            } else {
                EXPECT_GT(d, 0.0);
            }
        }
    }
}

TEST(GeneratePair, GroundTruthResidual) {
    // Noiseless: the masked source lands exactly on its target region.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GeneratedPair p = generate_pair(spec_with(seed));
        std::vector<std::size_t> inside;
        for (std::size_t i = 0; i < p.src.size(); ++i) {
            if (p.overlap_mask_src[i]) inside.push_back(i);
        }
        const PointCloud moved = apply_transform(p.src.select(inside), p.gt);
        const KdTree tgt(p.tgt);
        std::vector<std::size_t> region;
        for (const auto& q : moved) region.push_back(tgt.nearest(q).index);
        EXPECT_LT(chamfer_distance(moved, p.tgt.select(region)), 1e-9);
    }
}

TEST(GeneratePair, NoisyResidualMatchesNoiseModel) {
    // Both views carry independent N(0, σ²) noise per coordinate, so a point
    // and its counterpart differ by 6σ² in expected squared distance. The
    // nearest target point can only be closer.
    PairSpec s = spec_with(8);
    s.noise_sigma = 0.01;
    const GeneratedPair p = generate_pair(s);
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < p.src.size(); ++i) {
        if (p.overlap_mask_src[i]) inside.push_back(i);
    }
    const PointCloud moved = apply_transform(p.src.select(inside), p.gt);
    const KdTree tgt(p.tgt);
    double sum = 0.0;
    for (const auto& q : moved) sum += tgt.nearest(q).sq_distance;
    EXPECT_LT(sum / static_cast<double>(moved.size()), 6.0 * s.noise_sigma * s.noise_sigma);
}

TEST(GeneratePair, RotationLevels) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const GeneratedPair p = generate_pair(spec_with(seed));
        EXPECT_LE(rotation_angle_deg(p.gt.rotation()), 45.0 + 1e-9);
        EXPECT_LE(p.gt.translation().cwiseAbs().maxCoeff(), 0.5);
    }
}

TEST(GeneratePair, DeterministicPerSeed) {
    PairSpec s = spec_with(21);
    s.noise_sigma = 0.01;
    s.rot_level = 1;
    const GeneratedPair a = generate_pair(s), b = generate_pair(s);
    EXPECT_EQ(a.src, b.src);
    EXPECT_EQ(a.tgt, b.tgt);
    EXPECT_EQ(a.gt, b.gt);
    EXPECT_EQ(a.overlap_mask_src, b.overlap_mask_src);
    s.seed = RngSeed{22};
    EXPECT_FALSE(generate_pair(s).src == a.src);
}

TEST(GeneratePair, ValidatesSpec) {
    PairSpec s;
    s.overlap_target = 1.5;
    EXPECT_THROW(generate_pair(s), InvalidInput);
    s.overlap_target = 0.0;
    EXPECT_THROW(generate_pair(s), InvalidInput);
    s = PairSpec{};
    s.points_per_cloud = 31;
    EXPECT_THROW(generate_pair(s), InvalidInput);
    s = PairSpec{};
    s.rot_level = 2;
    EXPECT_THROW(generate_pair(s), InvalidInput);
    s = PairSpec{};
    s.noise_sigma = -0.1;
    EXPECT_THROW(generate_pair(s), InvalidInput);
}

TEST(RandomRotation, UnrestrictedMatchesHaarAngleDensity) {
    // Under Haar measure the rotation angle has density (1 − cos θ)/π on
    // [0, π], so its CDF is (θ − sin θ)/π.
    const std::size_t n = 10000;
    std::vector<double> angles;
    for (std::size_t i = 0; i < n; ++i) {
        angles.push_back(deg2rad(rotation_angle_deg(random_rotation(360.0, derive_seed(RngSeed{99}, i)))));
    }
    std::sort(angles.begin(), angles.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = (angles[i] - std::sin(angles[i])) / kPi;
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    EXPECT_GT(kolmogorov_p(d, n), 0.01) << "KS statistic " << d;
    EXPECT_GT(angles.back(), deg2rad(170.0));
}

TEST(AddNoise, MomentsAndClamp) {
    const std::size_t points = 333334;
    const PointCloud zero(std::vector<Vec3>(points, Vec3::Zero()));
    EXPECT_EQ(add_noise(zero, 0.0, 0.5, RngSeed{1}), zero);

    const PointCloud noisy = add_noise(zero, 0.01, 0.5, RngSeed{2});
    double sum = 0.0, sq = 0.0;
    for (const auto& p : noisy) {
        for (int d = 0; d < 3; ++d) {
            sum += p[d];
            sq += p[d] * p[d];
        }
    }
    const double n = 3.0 * static_cast<double>(points);
    const double mean = sum / n;
    const double std = std::sqrt(sq / n - mean * mean);
    EXPECT_GE(std, 0.0095);
    EXPECT_LE(std, 0.0105);

    const PointCloud wide = add_noise(zero, 1.0, 0.5, RngSeed{3});
    double largest = 0.0;
    for (const auto& p : wide) largest = std::max(largest, p.cwiseAbs().maxCoeff());
    EXPECT_LE(largest, 0.5);
    EXPECT_EQ(largest, 0.5);
    EXPECT_THROW(add_noise(zero, 0.01, 0.0, RngSeed{1}), InvalidInput);
}

TEST(Subsample, SubsetSizeAndDeterminism) {
    std::mt19937_64 rng(5);
    const PointCloud c = regfuse::testing::random_cloud(2048, rng);
    const PointCloud s = subsample(c, 1024, RngSeed{4});
    ASSERT_EQ(s.size(), 1024u);
    const KdTree index(c);
    for (const auto& p : s) EXPECT_EQ(index.nearest(p).sq_distance, 0.0);
    EXPECT_EQ(subsample(c, 1024, RngSeed{4}), s);
    EXPECT_FALSE(subsample(c, 1024, RngSeed{5}) == s);

    auto all = subsample_indices(100, 100, RngSeed{1});
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
    EXPECT_THROW(subsample(c, 4096, RngSeed{1}), InvalidInput);
    EXPECT_THROW(subsample(c, 0, RngSeed{1}), InvalidInput);
}

TEST(Subsample, PairKeepsMaskAligned) {
    PairSpec s;
    s.seed = RngSeed{12};
    s.points_per_cloud = 2048;
    const GeneratedPair full = generate_pair(s);
    const GeneratedPair half = subsample_pair(full, 1024, RngSeed{3});
    ASSERT_EQ(half.src.size(), 1024u);
    ASSERT_EQ(half.tgt.size(), 1024u);
    ASSERT_EQ(half.overlap_mask_src.size(), 1024u);
    EXPECT_EQ(half.gt, full.gt);
    // A kept source point keeps its own mask bit.
    const KdTree src_index(full.src);
    for (std::size_t i = 0; i < half.src.size(); ++i) {
        const Neighbor nb = src_index.nearest(half.src[i]);
        ASSERT_EQ(nb.sq_distance, 0.0);
        EXPECT_EQ(half.overlap_mask_src[i], full.overlap_mask_src[nb.index]);
    }
    const GeneratedPair again = subsample_pair(full, 1024, RngSeed{3});
    EXPECT_EQ(again.src, half.src);
    EXPECT_EQ(again.tgt, half.tgt);
}
