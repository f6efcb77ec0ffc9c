#ifndef SSMVPR_DESCRIPTOR_HPP
#define SSMVPR_DESCRIPTOR_HPP

#include "error.hpp"
#include "pca.hpp"
#include "tensor_io.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

/**
 * @file descriptor.hpp
 *
 * @brief Turns activation grids into compressed convolutional-cube vectors.
 *
 * A grid is L2-normalised per spatial location, cut into k x k x D cubes on a
 * stride lattice, each cube flattened in (row, col, feature) order, and the
 * flattened vectors projected with a `PcaModel`.
 */

namespace ssmvpr {

/// Row-major float matrix, one descriptor vector per row.
using VectorRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct CubeSpec {
    std::size_t cube_size = 7;
    std::size_t stride = 2;

    /// Number of cube origins along an axis of length `side`.
    std::size_t count_along(std::size_t side) const {
        return side < cube_size ? 0 : (side - cube_size) / stride + 1;
    }

    friend bool operator==(const CubeSpec&, const CubeSpec&) = default;
};

inline constexpr CubeSpec stage1_cubes{7, 2};
inline constexpr CubeSpec stage2_cubes{3, 2};

struct CubePosition {
    std::size_t row = 0;
    std::size_t col = 0;

    friend auto operator<=>(const CubePosition&, const CubePosition&) = default;
};

/// Cube vectors of one image. `positions[i]` is the grid origin of row `i` of `vectors`;
/// positions follow the lattice in row-major order.
struct CubeVectorSet {
    std::size_t lattice_rows = 0;
    std::size_t lattice_cols = 0;
    std::vector<CubePosition> positions;
    VectorRows vectors;

    std::size_t size() const { return positions.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(vectors.cols()); }
};

inline FeatureGrid normalize_grid(const FeatureGrid& grid) {
    FeatureGrid out = grid;
    for (std::size_t r = 0; r < grid.height(); ++r) {
        for (std::size_t c = 0; c < grid.width(); ++c) {
            auto v = out.location(r, c);
            double sq = 0.0;
            for (float x : v) {
                sq += static_cast<double>(x) * x;
            }
            if (sq == 0.0) {
                continue; // dead location stays zero
            }
            const double inv = 1.0 / std::sqrt(sq);
            for (float& x : v) {
                x = static_cast<float>(x * inv);
            }
        }
    }
    return out;
}

inline CubeVectorSet extract_cubes(const FeatureGrid& grid, const CubeSpec& spec) {
    require(spec.cube_size > 0 && spec.stride > 0, ErrorKind::InvalidArgument,
            "cube size and stride must be positive");
    require(spec.cube_size <= grid.height() && spec.cube_size <= grid.width(), ErrorKind::InvalidArgument,
            "cube size " + std::to_string(spec.cube_size) + " exceeds grid " + std::to_string(grid.height()) +
                "x" + std::to_string(grid.width()));

    const std::size_t k = spec.cube_size;
    const std::size_t depth = grid.depth();
    CubeVectorSet set;
    set.lattice_rows = spec.count_along(grid.height());
    set.lattice_cols = spec.count_along(grid.width());
    const std::size_t count = set.lattice_rows * set.lattice_cols;
    set.positions.reserve(count);
    set.vectors.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(k * k * depth));

    for (std::size_t i = 0; i < set.lattice_rows; ++i) {
        for (std::size_t j = 0; j < set.lattice_cols; ++j) {
            const CubePosition origin{i * spec.stride, j * spec.stride};
            float* dst = set.vectors.row(static_cast<Eigen::Index>(set.positions.size())).data();
            for (std::size_t r = 0; r < k; ++r) {
                for (std::size_t c = 0; c < k; ++c) {
                    auto src = grid.location(origin.row + r, origin.col + c);
                    std::copy(src.begin(), src.end(), dst);
                    dst += depth;
                }
            }
            set.positions.push_back(origin);
        }
    }
    return set;
}

/// Projects every row of `raw` through `model`, returning float vectors of dimension `model.output_dim()`.
inline VectorRows project_rows(const PcaModel& model, const VectorRows& raw) {
    require(static_cast<std::size_t>(raw.cols()) == model.input_dim(), ErrorKind::DimensionMismatch,
            "projection input has dimension " + std::to_string(raw.cols()) + ", model expects " +
                std::to_string(model.input_dim()));
    Eigen::MatrixXd centered = raw.cast<double>();
    centered.rowwise() -= model.mean().transpose();
    Eigen::MatrixXd projected = centered * model.basis().transpose();
    return projected.cast<float>();
}

/// Normalise, cut and project: the complete per-image encoding for one stage.
inline CubeVectorSet encode_grid(const FeatureGrid& grid, const CubeSpec& spec, const PcaModel& model) {
    CubeVectorSet set = extract_cubes(normalize_grid(grid), spec);
    set.vectors = project_rows(model, set.vectors);
    return set;
}

} // namespace ssmvpr

#endif
