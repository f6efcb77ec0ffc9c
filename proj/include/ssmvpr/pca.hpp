#ifndef SSMVPR_PCA_HPP
#define SSMVPR_PCA_HPP

#include "binary_io.hpp"
#include "error.hpp"

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

/**
 * @file pca.hpp
 *
 * @brief Principal component analysis for cube vectors.
 *
 * Fitting centres the samples and extracts the top-d eigenpairs of either the
 * d x d covariance (more samples than dimensions) or the n x n Gram matrix
 * (fewer samples than dimensions, e.g. 3200 stage-1 samples of 25088
 * dimensions). Both routes yield the same principal subspace. Basis rows are
 * ordered by descending explained variance and signed so that the entry of
 * largest magnitude is positive.
 */

namespace ssmvpr {

using BasisMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class PcaModel {
public:
    PcaModel() = default;

    PcaModel(Eigen::VectorXd mean, BasisMatrix basis, Eigen::VectorXd explained_variance = {})
        : mean_(std::move(mean)), basis_(std::move(basis)), explained_(std::move(explained_variance)) {
        require(mean_.size() > 0 && basis_.rows() > 0, ErrorKind::InvalidArgument, "empty PCA model");
        require(basis_.cols() == mean_.size(), ErrorKind::DimensionMismatch,
                "PCA basis width does not match mean dimension");
        require(explained_.size() == 0 || explained_.size() == basis_.rows(), ErrorKind::DimensionMismatch,
                "explained variance length does not match basis rows");
    }

    std::size_t input_dim() const { return static_cast<std::size_t>(mean_.size()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(basis_.rows()); }

    const Eigen::VectorXd& mean() const { return mean_; }
    const BasisMatrix& basis() const { return basis_; }

    /// Per-row variance of the fit samples (population normalisation). Empty for models loaded from disk.
    const Eigen::VectorXd& explained_variance() const { return explained_; }

    /// The first `dim` principal directions; identical to fitting with `dim` components.
    PcaModel truncated(std::size_t dim) const {
        require(dim > 0 && dim <= output_dim(), ErrorKind::InvalidArgument,
                "cannot truncate a " + std::to_string(output_dim()) + "-component model to " + std::to_string(dim));
        const auto rows = static_cast<Eigen::Index>(dim);
        return PcaModel(mean_, basis_.topRows(rows),
                        explained_.size() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(explained_.head(rows)));
    }

private:
    Eigen::VectorXd mean_;
    BasisMatrix basis_;
    Eigen::VectorXd explained_;
};

namespace detail {

struct Eigenpairs {
    Eigen::VectorXd values;  // descending
    Eigen::MatrixXd vectors; // one column per value
};

/// Top `count` eigenpairs of a symmetric matrix; only the lower triangle is read.
/// Householder tridiagonalisation, then bisection and inverse iteration on the
/// tridiagonal form for the requested index range only.
inline Eigenpairs top_eigenpairs(const Eigen::MatrixXd& sym, std::size_t count) {
    const auto n = static_cast<lapack_int>(sym.rows());
    const auto wanted = static_cast<lapack_int>(count);
    Eigen::Tridiagonalization<Eigen::MatrixXd> tri(sym);
    Eigen::VectorXd diag = tri.diagonal();
    Eigen::VectorXd sub = tri.subDiagonal();
    if (n == 1) sub.resize(1);

    lapack_int found = 0;
    lapack_int blocks = 0;
    std::vector<double> w(static_cast<std::size_t>(n));
    std::vector<lapack_int> block_of(static_cast<std::size_t>(n));
    std::vector<lapack_int> splits(static_cast<std::size_t>(n));
    lapack_int info = LAPACKE_dstebz('I', 'B', n, 0.0, 0.0, n - wanted + 1, n, 2.0 * LAPACKE_dlamch('S'), diag.data(),
                                     sub.data(), &found, &blocks, w.data(), block_of.data(), splits.data());
    if (info != 0 || found != wanted) {
        fail(ErrorKind::Degenerate, "tridiagonal bisection failed (info=" + std::to_string(info) + ")");
    }
    Eigen::MatrixXd z(n, found);
    std::vector<lapack_int> failed(static_cast<std::size_t>(found));
    info = LAPACKE_dstein(LAPACK_COL_MAJOR, n, diag.data(), sub.data(), found, w.data(), block_of.data(),
                          splits.data(), z.data(), n, failed.data());
    if (info != 0) {
        fail(ErrorKind::Degenerate, "inverse iteration failed to converge (info=" + std::to_string(info) + ")");
    }
    const Eigen::MatrixXd vectors = tri.matrixQ() * z;

    // eigenvalues come back grouped by tridiagonal block; order them descending
    std::vector<lapack_int> order(static_cast<std::size_t>(found));
    for (lapack_int i = 0; i < found; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](lapack_int a, lapack_int b) {
        return w[static_cast<std::size_t>(a)] > w[static_cast<std::size_t>(b)];
    });
    Eigenpairs out;
    out.values.resize(found);
    out.vectors.resize(n, found);
    for (lapack_int i = 0; i < found; ++i) {
        const auto src = order[static_cast<std::size_t>(i)];
        out.values(i) = std::max(0.0, w[static_cast<std::size_t>(src)]);
        out.vectors.col(i) = vectors.col(src);
    }
    return out;
}

/// Modified Gram-Schmidt over rows in order. Rows flagged in `replace` (or collapsing to zero)
/// are replaced by the first standard basis vector not already spanned.
inline void orthonormalize_rows(BasisMatrix& basis, std::vector<bool> replace) {
    const auto rows = basis.rows();
    const auto cols = basis.cols();
    Eigen::Index next_unit = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        bool ok = !replace[static_cast<std::size_t>(r)];
        if (ok) {
            const double before = basis.row(r).norm();
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index s = 0; s < r; ++s) {
                    basis.row(r) -= basis.row(r).dot(basis.row(s)) * basis.row(s);
                }
            }
            const double after = basis.row(r).norm();
            ok = after > 1e-8 * before && after > 0.0;
            if (ok) basis.row(r) /= after;
        }
        while (!ok) {
            require(next_unit < cols, ErrorKind::Degenerate, "cannot complete PCA basis");
            basis.row(r).setZero();
            basis(r, next_unit++) = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index s = 0; s < r; ++s) {
                    basis.row(r) -= basis.row(r).dot(basis.row(s)) * basis.row(s);
                }
            }
            const double norm = basis.row(r).norm();
            ok = norm > 0.5;
            if (ok) basis.row(r) /= norm;
        }
    }
}

inline void canonicalize_signs(BasisMatrix& basis) {
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
        Eigen::Index pivot = 0;
        basis.row(r).cwiseAbs().maxCoeff(&pivot);
        if (basis(r, pivot) < 0.0) {
            basis.row(r) *= -1.0;
        }
    }
}

inline constexpr Eigen::Index pca_block = 2048;

} // namespace detail

/**
 * Fits a PCA model with `output_dim` components to the rows of `samples`.
 *
 * Requires `output_dim <= min(rows, cols)`. Samples that are all identical have no
 * principal direction and raise `ErrorKind::Degenerate`. Directions beyond the rank
 * of the data carry zero variance and are completed to an orthonormal basis.
 */
template <typename Derived>
PcaModel fit_pca(const Eigen::MatrixBase<Derived>& samples, std::size_t output_dim) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index p = samples.cols();
    const auto d = static_cast<Eigen::Index>(output_dim);
    require(n > 0 && p > 0, ErrorKind::InvalidArgument, "PCA needs a non-empty sample matrix");
    require(d > 0, ErrorKind::InvalidArgument, "PCA output dimension must be positive");
    require(d <= n, ErrorKind::InvalidArgument,
            "PCA needs at least " + std::to_string(d) + " samples, got " + std::to_string(n));
    require(d <= p, ErrorKind::InvalidArgument,
            "PCA output dimension " + std::to_string(d) + " exceeds input dimension " + std::to_string(p));
    require(samples.allFinite(), ErrorKind::NonFinite, "PCA samples contain non-finite values");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (Eigen::Index r = 0; r < n; ++r) {
        mean += samples.row(r).template cast<double>().transpose();
    }
    mean /= static_cast<double>(n);

    BasisMatrix basis(d, p);
    Eigen::VectorXd scatter;
    std::vector<bool> replace(static_cast<std::size_t>(d), false);

    if (n <= p) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index c0 = 0; c0 < p; c0 += detail::pca_block) {
            const Eigen::Index width = std::min(detail::pca_block, p - c0);
            Eigen::MatrixXd block = samples.middleCols(c0, width).template cast<double>();
            block.rowwise() -= mean.segment(c0, width).transpose();
            gram.selfadjointView<Eigen::Lower>().rankUpdate(block);
        }
        const double total = gram.diagonal().sum();
        require(total > 0.0, ErrorKind::Degenerate, "PCA samples have zero variance");

        const auto eig = detail::top_eigenpairs(gram, output_dim);
        scatter = eig.values;
        const double floor = eig.values(0) * 1e-12;
        Eigen::MatrixXd weighted = eig.vectors.transpose(); // d x n
        for (Eigen::Index r = 0; r < d; ++r) {
            if (eig.values(r) > floor && eig.values(r) > 0.0) {
                weighted.row(r) /= std::sqrt(eig.values(r));
            } else {
                weighted.row(r).setZero();
                replace[static_cast<std::size_t>(r)] = true;
            }
        }
        for (Eigen::Index c0 = 0; c0 < p; c0 += detail::pca_block) {
            const Eigen::Index width = std::min(detail::pca_block, p - c0);
            Eigen::MatrixXd block = samples.middleCols(c0, width).template cast<double>();
            block.rowwise() -= mean.segment(c0, width).transpose();
            basis.middleCols(c0, width).noalias() = weighted * block;
        }
        detail::orthonormalize_rows(basis, replace);
    } else {
        Eigen::MatrixXd covariance = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index r0 = 0; r0 < n; r0 += detail::pca_block) {
            const Eigen::Index height = std::min(detail::pca_block, n - r0);
            Eigen::MatrixXd block = samples.middleRows(r0, height).template cast<double>();
            block.rowwise() -= mean.transpose();
            covariance.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
        }
        const double total = covariance.diagonal().sum();
        require(total > 0.0, ErrorKind::Degenerate, "PCA samples have zero variance");

        const auto eig = detail::top_eigenpairs(covariance, output_dim);
        scatter = eig.values;
        basis = eig.vectors.transpose();
        detail::orthonormalize_rows(basis, replace);
    }
    detail::canonicalize_signs(basis);
    return PcaModel(std::move(mean), std::move(basis), scatter / static_cast<double>(n));
}

/// Mean squared deviation of the rows from their mean, summed over columns.
template <typename Derived>
double total_variance(const Eigen::MatrixBase<Derived>& samples) {
    require(samples.rows() > 0, ErrorKind::InvalidArgument, "variance of an empty sample matrix");
    Eigen::VectorXd mean = samples.template cast<double>().colwise().mean().transpose();
    double sum = 0.0;
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        sum += (samples.row(r).template cast<double>().transpose() - mean).squaredNorm();
    }
    return sum / static_cast<double>(samples.rows());
}

inline Eigen::VectorXd project(const PcaModel& model, std::span<const float> vector) {
    require(vector.size() == model.input_dim(), ErrorKind::DimensionMismatch,
            "projection input has dimension " + std::to_string(vector.size()) + ", model expects " +
                std::to_string(model.input_dim()));
    Eigen::Map<const Eigen::VectorXf> v(vector.data(), static_cast<Eigen::Index>(vector.size()));
    return model.basis() * (v.cast<double>() - model.mean());
}

inline Eigen::VectorXd project(const PcaModel& model, const Eigen::VectorXd& vector) {
    require(static_cast<std::size_t>(vector.size()) == model.input_dim(), ErrorKind::DimensionMismatch,
            "projection input has dimension " + std::to_string(vector.size()) + ", model expects " +
                std::to_string(model.input_dim()));
    return model.basis() * (vector - model.mean());
}

inline constexpr std::string_view pca_magic = "PCA1";

inline void save_pca(const PcaModel& model, const std::filesystem::path& destination) {
    binary::Writer out;
    out.magic(pca_magic);
    out.u32(static_cast<std::uint32_t>(model.input_dim()));
    out.u32(static_cast<std::uint32_t>(model.output_dim()));
    for (Eigen::Index i = 0; i < model.mean().size(); ++i) {
        out.f64(model.mean()(i));
    }
    for (Eigen::Index r = 0; r < model.basis().rows(); ++r) {
        for (Eigen::Index c = 0; c < model.basis().cols(); ++c) {
            out.f64(model.basis()(r, c));
        }
    }
    out.commit(destination);
}

inline PcaModel load_pca(const std::filesystem::path& source) {
    auto in = binary::Reader::open(source);
    in.expect_magic(pca_magic);
    const std::size_t input_dim = in.u32();
    const std::size_t output_dim = in.u32();
    if (input_dim == 0 || output_dim == 0 || output_dim > input_dim) {
        fail(ErrorKind::SizeMismatch, in.label() + ": invalid PCA dimensions " + std::to_string(input_dim) + " -> " +
                                          std::to_string(output_dim));
    }
    if (in.remaining() < 8 * input_dim * (output_dim + 1)) {
        fail(ErrorKind::Truncated, in.label() + ": PCA payload shorter than declared");
    }
    Eigen::VectorXd mean(static_cast<Eigen::Index>(input_dim));
    for (auto& v : mean) v = in.f64();
    BasisMatrix basis(static_cast<Eigen::Index>(output_dim), static_cast<Eigen::Index>(input_dim));
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
        for (Eigen::Index c = 0; c < basis.cols(); ++c) {
            basis(r, c) = in.f64();
        }
    }
    in.expect_end();
    require(mean.allFinite() && basis.allFinite(), ErrorKind::NonFinite, in.label() + ": non-finite PCA values");
    return PcaModel(std::move(mean), std::move(basis));
}

} // namespace ssmvpr

#endif
