#ifndef SSMVPR_SYNTHETIC_HPP
#define SSMVPR_SYNTHETIC_HPP

#include "error.hpp"
#include "tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

/**
 * @file synthetic.hpp
 *
 * @brief Deterministic benchmark fixtures.
 *
 * Every reference place gets independent rectified-Gaussian activation grids
 * for both stages. Each query grid is its reference grid plus Gaussian noise
 * whose standard deviation is `noise` times the RMS activation of that grid.
 */

namespace ssmvpr {

struct SyntheticSpec {
    std::size_t count = 200;
    std::size_t depth = 512;
    std::size_t stage1_side = 14;
    std::size_t stage2_side = 28;
    double noise = 0.05;
    std::uint64_t seed = 1;
    bool shuffle = false; ///< pair query j with a permuted reference instead of reference j
};

struct SyntheticDataset {
    std::filesystem::path reference_manifest;
    std::filesystem::path query_manifest;
    std::filesystem::path ground_truth;
};

namespace detail {

inline FeatureGrid random_place(std::size_t side, std::size_t depth, std::mt19937_64& rng) {
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    FeatureGrid grid(side, side, depth);
    for (auto& v : grid.values()) v = std::max(0.0f, gauss(rng));
    return grid;
}

inline FeatureGrid perturbed(const FeatureGrid& grid, double noise, std::mt19937_64& rng) {
    double sq = 0.0;
    for (float v : grid.values()) sq += static_cast<double>(v) * v;
    const double rms = std::sqrt(sq / static_cast<double>(grid.values().size()));
    std::normal_distribution<double> gauss(0.0, noise * rms);
    FeatureGrid out = grid;
    for (auto& v : out.values()) v = static_cast<float>(v + gauss(rng));
    return out;
}

inline std::string frame_file(const char* prefix, std::size_t frame, int stage) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%06zu_s%d.fgt", prefix, frame, stage);
    return name;
}

} // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& directory) {
    require(spec.count > 0 && spec.depth > 0 && spec.stage1_side > 0 && spec.stage2_side > 0,
            ErrorKind::InvalidArgument, "synthetic dataset dimensions must be positive");
    require(spec.noise >= 0.0 && std::isfinite(spec.noise), ErrorKind::InvalidArgument, "noise must be finite and >= 0");

    std::error_code ec;
    std::filesystem::create_directories(directory / "reference", ec);
    std::filesystem::create_directories(directory / "query", ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + directory.string() + "': " + ec.message());

    std::mt19937_64 rng(spec.seed);
    std::vector<std::size_t> pairing(spec.count);
    std::iota(pairing.begin(), pairing.end(), std::size_t{0});
    if (spec.shuffle) std::shuffle(pairing.begin(), pairing.end(), rng);

    DatasetManifest reference{"reference", {}};
    for (std::size_t f = 0; f < spec.count; ++f) {
        ManifestEntry e{static_cast<FrameId>(f), directory / "reference" / detail::frame_file("ref", f, 1),
                        directory / "reference" / detail::frame_file("ref", f, 2)};
        write_grid(detail::random_place(spec.stage1_side, spec.depth, rng), e.stage1);
        write_grid(detail::random_place(spec.stage2_side, spec.depth, rng), e.stage2);
        reference.entries.push_back(std::move(e));
    }

    DatasetManifest query{"query", {}};
    GroundTruth truth;
    for (std::size_t q = 0; q < spec.count; ++q) {
        const auto& place = reference.entries[pairing[q]];
        ManifestEntry e{static_cast<FrameId>(q), directory / "query" / detail::frame_file("qry", q, 1),
                        directory / "query" / detail::frame_file("qry", q, 2)};
        write_grid(detail::perturbed(read_grid(place.stage1), spec.noise, rng), e.stage1);
        write_grid(detail::perturbed(read_grid(place.stage2), spec.noise, rng), e.stage2);
        query.entries.push_back(std::move(e));
        truth.pairs.push_back({static_cast<FrameId>(q), static_cast<FrameId>(pairing[q])});
    }

    SyntheticDataset out{directory / "reference.csv", directory / "query.csv", directory / "ground_truth.csv"};
    save_manifest(reference, out.reference_manifest);
    save_manifest(query, out.query_manifest);
    save_ground_truth(truth, out.ground_truth);
    return out;
}

} // namespace ssmvpr

#endif
