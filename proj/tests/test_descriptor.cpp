#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace ssmvpr;

TEST(Normalize, ThreeFourFiveLocation) {
    FeatureGrid grid(1, 2, 3, {0.0f, 3.0f, 4.0f, 0.0f, 0.0f, 0.0f});
    const auto out = normalize_grid(grid);
    EXPECT_FLOAT_EQ(out.at(0, 0, 0), 0.0f);
    EXPECT_FLOAT_EQ(out.at(0, 0, 1), 0.6f);
    EXPECT_FLOAT_EQ(out.at(0, 0, 2), 0.8f);
    // all-zero location is left untouched
    for (std::size_t f = 0; f < 3; ++f) EXPECT_EQ(out.at(0, 1, f), 0.0f);
}

TEST(Normalize, UnitNormAndIdempotentOnRandomGrids) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto grid = testing_support::random_grid(5, 4, 37, rng);
        // zero one location and rectify another
        for (auto& v : grid.location(2, 1)) v = 0.0f;
        for (auto& v : grid.location(0, 3)) v = std::max(v, 0.0f);
        const auto once = normalize_grid(grid);
        const auto twice = normalize_grid(once);
        for (std::size_t r = 0; r < grid.height(); ++r) {
            for (std::size_t c = 0; c < grid.width(); ++c) {
                double sq = 0.0;
                for (float v : once.location(r, c)) sq += static_cast<double>(v) * v;
                if (r == 2 && c == 1) {
                    EXPECT_EQ(sq, 0.0);
                } else {
                    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
                }
            }
        }
        for (std::size_t i = 0; i < once.values().size(); ++i) {
            EXPECT_NEAR(once.values()[i], twice.values()[i], 1e-7);
        }
    }
}

TEST(Cubes, DefaultStageOneLattice) {
    FeatureGrid grid(14, 14, 512);
    const auto set = extract_cubes(grid, stage1_cubes);
    EXPECT_EQ(set.size(), 16u);
    EXPECT_EQ(set.dim(), 25088u);
    EXPECT_EQ(set.lattice_rows, 4u);
    std::vector<CubePosition> expected;
    for (std::size_t r : {0, 2, 4, 6})
        for (std::size_t c : {0, 2, 4, 6}) expected.push_back({r, c});
    EXPECT_EQ(set.positions, expected);
}

TEST(Cubes, DefaultStageTwoLattice) {
    FeatureGrid grid(28, 28, 512);
    const auto set = extract_cubes(grid, stage2_cubes);
    EXPECT_EQ(set.size(), 169u);
    EXPECT_EQ(set.dim(), 4608u);
    EXPECT_EQ(set.lattice_rows, 13u);
    EXPECT_EQ(set.lattice_cols, 13u);
    EXPECT_EQ(set.positions.front(), (CubePosition{0, 0}));
    EXPECT_EQ(set.positions.back(), (CubePosition{24, 24}));
    EXPECT_TRUE(std::is_sorted(set.positions.begin(), set.positions.end()));
}

TEST(Cubes, WholeGridCubeIsTheFlattenedGrid) {
    std::mt19937_64 rng(3);
    const auto grid = testing_support::random_grid(5, 5, 6, rng);
    for (std::size_t s : {1, 2, 7}) {
        const auto set = extract_cubes(grid, CubeSpec{5, s});
        ASSERT_EQ(set.size(), 1u);
        ASSERT_EQ(set.dim(), grid.values().size());
        EXPECT_EQ(std::memcmp(set.vectors.data(), grid.values().data(), 4 * grid.values().size()), 0);
    }
}

TEST(Cubes, FlatteningIsRowColFeature) {
    FeatureGrid grid(4, 4, 2);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            for (std::size_t f = 0; f < 2; ++f) grid.at(r, c, f) = static_cast<float>(100 * r + 10 * c + f);
    const auto set = extract_cubes(grid, CubeSpec{2, 2});
    ASSERT_EQ(set.size(), 4u);
    // cube at origin (2, 0): rows 2-3, cols 0-1
    const std::vector<float> expected = {200, 201, 210, 211, 300, 301, 310, 311};
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(set.vectors(2, static_cast<Eigen::Index>(i)), expected[i]);
}

TEST(Cubes, CountLawExhaustive) {
    for (std::size_t side = 1; side <= 32; ++side) {
        for (std::size_t k = 1; k <= side; ++k) {
            for (std::size_t s = 1; s <= 3; ++s) {
                FeatureGrid grid(side, side, 1);
                const auto set = extract_cubes(grid, CubeSpec{k, s});
                const std::size_t per_axis = (side - k) / s + 1;
                ASSERT_EQ(set.lattice_rows, per_axis) << side << ' ' << k << ' ' << s;
                ASSERT_EQ(set.size(), per_axis * per_axis);
                for (const auto& p : set.positions) {
                    ASSERT_EQ(p.row % s, 0u);
                    ASSERT_LE(p.row + k, side);
                    ASSERT_LE(p.col + k, side);
                }
            }
        }
    }
}

TEST(Cubes, RectangularGridAndOversizedCube) {
    FeatureGrid grid(6, 9, 2);
    const auto set = extract_cubes(grid, CubeSpec{3, 2});
    EXPECT_EQ(set.lattice_rows, 2u);
    EXPECT_EQ(set.lattice_cols, 4u);
    EXPECT_THROW(extract_cubes(grid, CubeSpec{7, 1}), Error);
    EXPECT_THROW(extract_cubes(grid, CubeSpec{3, 0}), Error);
}

TEST(Encode, DeterministicBitIdenticalSets) {
    std::mt19937_64 rng(5);
    std::vector<FeatureGrid> grids;
    VectorRows samples(0, 0);
    for (int i = 0; i < 6; ++i) grids.push_back(testing_support::random_grid(8, 8, 4, rng));
    std::vector<VectorRows> parts;
    Eigen::Index rows = 0;
    for (const auto& g : grids) {
        parts.push_back(extract_cubes(normalize_grid(g), CubeSpec{3, 2}).vectors);
        rows += parts.back().rows();
    }
    samples.resize(rows, parts.front().cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        samples.middleRows(at, p.rows()) = p;
        at += p.rows();
    }
    const auto model = fit_pca(samples, 10);
    const auto a = encode_grid(grids[2], CubeSpec{3, 2}, model);
    const auto b = encode_grid(grids[2], CubeSpec{3, 2}, model);
    ASSERT_EQ(a.vectors.size(), b.vectors.size());
    EXPECT_EQ(a.dim(), 10u);
    EXPECT_EQ(a.positions, b.positions);
    EXPECT_EQ(std::memcmp(a.vectors.data(), b.vectors.data(), 4 * static_cast<std::size_t>(a.vectors.size())), 0);
}
