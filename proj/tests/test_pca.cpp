#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace ssmvpr;

namespace {

// Low-rank signal with decaying scales plus isotropic noise.
VectorRows structured_samples(Eigen::Index n, Eigen::Index p, Eigen::Index rank, std::uint64_t seed, double noise) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd factors(rank, p);
    for (Eigen::Index i = 0; i < factors.size(); ++i) factors.data()[i] = gauss(rng);
    VectorRows out(n, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Constant(p, 0.3);
        for (Eigen::Index k = 0; k < rank; ++k) row += gauss(rng) * (3.0 / (1.0 + 0.2 * k)) * factors.row(k);
        for (Eigen::Index c = 0; c < p; ++c) row(c) += noise * gauss(rng);
        out.row(r) = row.cast<float>();
    }
    return out;
}

double reconstruction_error(const PcaModel& model, const VectorRows& samples) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        const Eigen::VectorXd c = samples.row(r).cast<double>().transpose() - model.mean();
        const Eigen::VectorXd back = model.basis().transpose() * (model.basis() * c);
        sum += (c - back).squaredNorm();
    }
    return sum / static_cast<double>(samples.rows());
}

double orthonormality_error(const PcaModel& model) {
    const Eigen::MatrixXd g = model.basis() * model.basis().transpose();
    return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

} // namespace

TEST(Pca, LineInThreeDimensions) {
    const Eigen::Vector3d dir = Eigen::Vector3d(1.0, -2.0, 0.5).normalized();
    const Eigen::Vector3d offset(4.0, 1.0, -3.0);
    VectorRows samples(9, 3);
    for (int i = 0; i < 9; ++i) samples.row(i) = (offset + (i - 4) * 0.75 * dir).cast<float>().transpose();
    const auto model = fit_pca(samples, 1);
    EXPECT_GT(std::abs(model.basis().row(0).dot(dir)), 1.0 - 1e-6);
}

TEST(Pca, FullBasisIsAnIsometry) {
    std::mt19937_64 rng(21);
    const auto samples = structured_samples(40, 12, 12, 21, 0.5);
    const auto model = fit_pca(samples, 12);
    EXPECT_LT(orthonormality_error(model), 1e-5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = testing_support::random_vector(12, rng, 3.0f);
        const auto b = testing_support::random_vector(12, rng, 3.0f);
        const Eigen::VectorXd pa = project(model, a);
        const Eigen::VectorXd pb = project(model, b);
        const double direct = std::sqrt(oracle::sq_dist(a.data(), b.data(), 12));
        EXPECT_NEAR((pa - pb).norm(), direct, 1e-5 * std::max(1.0, direct));
        const Eigen::VectorXd centred = Eigen::Map<const Eigen::VectorXf>(a.data(), 12).cast<double>() - model.mean();
        EXPECT_NEAR(pa.norm(), centred.norm(), 1e-5 * std::max(1.0, centred.norm()));
    }
}

TEST(Pca, ReconstructionErrorMatchesDiscardedSpectrumAtFullWidth) {
    const Eigen::Index n = 500, p = 25088;
    const auto samples = structured_samples(n, p, 160, 5, 0.2);
    const auto model = fit_pca(samples, 100);

    // Oracle: eigenvalues of the centred Gram matrix share the scatter matrix's nonzero spectrum.
    const Eigen::MatrixXd x = samples.cast<double>();
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centred = x.rowwise() - mean;
    const Eigen::MatrixXd gram = centred * centred.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd values = solver.eigenvalues().reverse();
    const double discarded = values.tail(n - 100).sum() / static_cast<double>(n);

    const double measured = reconstruction_error(model, samples);
    EXPECT_NEAR(measured, discarded, 1e-3 * discarded);
    EXPECT_NEAR((model.mean() - mean.transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-9);
    EXPECT_LT(orthonormality_error(model), 1e-5);
    for (Eigen::Index k = 0; k < 100; ++k) {
        EXPECT_NEAR(model.explained_variance()(k), values(k) / n, 1e-3 * values(k) / n);
    }
}

TEST(Pca, AgreesWithCovarianceOracleOnBothRoutes) {
    struct Shape {
        Eigen::Index n, p, d;
    };
    // tall data goes through the covariance, wide data through the Gram matrix
    for (const auto& [n, p, d] : {Shape{200, 15, 6}, Shape{12, 40, 6}, Shape{30, 30, 10}}) {
        const auto samples = structured_samples(n, p, std::min(n, p), 77 + n, 0.1);
        const auto model = fit_pca(samples, static_cast<std::size_t>(d));
        const auto ref = oracle::covariance_eigen(samples.cast<double>());
        for (Eigen::Index k = 0; k < d; ++k) {
            const double expected = ref.values(k) / static_cast<double>(n);
            EXPECT_NEAR(model.explained_variance()(k), expected, 1e-3 * expected) << n << 'x' << p << " k=" << k;
            // spectra are well separated, so directions agree up to sign
            EXPECT_GT(std::abs(model.basis().row(k).dot(ref.vectors.col(k))), 1.0 - 1e-3) << n << 'x' << p;
        }
    }
}

TEST(Pca, ContractPropertiesOnRandomInputs) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> dim(2, 30);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = dim(rng), p = dim(rng);
        const auto rank = std::uniform_int_distribution<Eigen::Index>(1, std::min(n, p))(rng);
        const auto samples = structured_samples(n, p, rank, rng(), trial % 2 == 0 ? 0.0 : 0.05);
        const auto top = static_cast<std::size_t>(std::min(n, p));
        const auto model = fit_pca(samples, top);

        EXPECT_LT(orthonormality_error(model), 1e-5);
        EXPECT_LT(project(model, model.mean()).norm(), 1e-6);
        for (Eigen::Index k = 1; k < model.explained_variance().size(); ++k) {
            EXPECT_LE(model.explained_variance()(k), model.explained_variance()(k - 1) * (1.0 + 1e-9) + 1e-12);
        }
        double previous = std::numeric_limits<double>::infinity();
        for (std::size_t d = 1; d <= top; ++d) {
            const double err = reconstruction_error(model.truncated(d), samples);
            EXPECT_LE(err, previous + 1e-9 * std::max(1.0, previous)) << "d=" << d;
            previous = err;
        }
    }
}

TEST(Pca, TruncationMatchesDirectFit) {
    const auto samples = structured_samples(50, 20, 20, 8, 0.1);
    const auto wide = fit_pca(samples, 12);
    const auto narrow = fit_pca(samples, 5);
    const auto cut = wide.truncated(5);
    EXPECT_LT((cut.basis() - narrow.basis()).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_THROW(wide.truncated(13), Error);
}

TEST(Pca, RankDeficientDataStillYieldsOrthonormalBasis) {
    const auto samples = structured_samples(6, 20, 2, 13, 0.0);
    const auto model = fit_pca(samples, 6);
    EXPECT_LT(orthonormality_error(model), 1e-5);
    EXPECT_NEAR(model.explained_variance()(5), 0.0, 1e-9);
}

TEST(Pca, RejectsInvalidInputs) {
    VectorRows few(3, 5);
    few.setRandom();
    EXPECT_THROW(fit_pca(few, 4), Error);
    EXPECT_THROW(fit_pca(few, 6), Error);
    EXPECT_THROW(fit_pca(few, 0), Error);

    VectorRows same(5, 4);
    same.setConstant(2.5f);
    try {
        fit_pca(same, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    }

    few(1, 1) = std::numeric_limits<float>::quiet_NaN();
    try {
        fit_pca(few, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
    }

    const auto model = fit_pca(structured_samples(10, 6, 6, 2, 0.1), 3);
    const std::vector<float> wrong(5, 0.0f);
    try {
        project(model, wrong);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(Pca, IdenticalInputsProjectIdentically) {
    std::mt19937_64 rng(4);
    const auto model = fit_pca(structured_samples(30, 16, 16, 4, 0.1), 8);
    const auto v = testing_support::random_vector(16, rng);
    const auto copy = v;
    const Eigen::VectorXd a = project(model, v);
    const Eigen::VectorXd b = project(model, copy);
    EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * 8), 0);
}

TEST(Pca, RepeatedFitsAreBitIdentical) {
    testing_support::TempDir dir("pca");
    const auto samples = structured_samples(40, 3000, 40, 6, 0.1);
    save_pca(fit_pca(samples, 20), dir / "a.pca");
    save_pca(fit_pca(samples, 20), dir / "b.pca");
    EXPECT_EQ(oracle::file_bytes(dir / "a.pca"), oracle::file_bytes(dir / "b.pca"));
}

TEST(Pca, SaveLoadRoundTrip) {
    testing_support::TempDir dir("pca");
    const auto model = fit_pca(structured_samples(25, 9, 9, 3, 0.1), 4);
    save_pca(model, dir / "m.pca");
    EXPECT_EQ(std::filesystem::file_size(dir / "m.pca"), 4u + 8u + 8u * 9u * 5u);
    const auto back = load_pca(dir / "m.pca");
    EXPECT_EQ(back.input_dim(), 9u);
    EXPECT_EQ(back.output_dim(), 4u);
    EXPECT_EQ(back.mean(), model.mean());
    EXPECT_EQ(back.basis(), model.basis());

    auto bytes = oracle::file_bytes(dir / "m.pca");
    bytes.pop_back();
    std::ofstream(dir / "short.pca", std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    try {
        load_pca(dir / "short.pca");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Truncated);
    }
}
