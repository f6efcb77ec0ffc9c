#ifndef SSMVPR_PIPELINE_HPP
#define SSMVPR_PIPELINE_HPP

#include "descriptor.hpp"
#include "error.hpp"
#include "filtering.hpp"
#include "parallel.hpp"
#include "pca.hpp"
#include "spatial.hpp"
#include "tensor_io.hpp"

#include <string>
#include <utility>
#include <vector>

/**
 * @file pipeline.hpp
 *
 * @brief Wires descriptor extraction, PCA, the two databases and both
 * retrieval stages into a single query path.
 */

namespace ssmvpr {

enum class Stage { Filtering = 1, Spatial = 2 };

struct PipelineConfig {
    std::size_t pca_dim = 100;
    std::size_t candidates = 50;
    unsigned tolerance = 2;
    CubeSpec stage1 = stage1_cubes;
    CubeSpec stage2 = stage2_cubes;
    VoteWeighting weighting = VoteWeighting::Uniform;
    std::size_t threads = 0; ///< 0 = all cores

    const CubeSpec& cubes(Stage stage) const { return stage == Stage::Filtering ? stage1 : stage2; }
};

/// Raw (unprojected) cube vectors of a whole manifest for one stage, stacked image after image.
struct StageSamples {
    VectorRows rows;
    std::size_t cubes_per_image = 0;
    std::size_t lattice_rows = 0;
    std::size_t lattice_cols = 0;
    std::vector<CubePosition> positions;
    std::vector<FrameId> frames;

    std::size_t image_count() const { return frames.size(); }

    /// Raw cube vectors of image `index`, as a standalone matrix.
    VectorRows image_rows(std::size_t index) const {
        return rows.middleRows(static_cast<Eigen::Index>(index * cubes_per_image),
                               static_cast<Eigen::Index>(cubes_per_image));
    }
};

inline const std::filesystem::path& grid_path(const ManifestEntry& entry, Stage stage) {
    return stage == Stage::Filtering ? entry.stage1 : entry.stage2;
}

/// Loads, normalises and cuts every grid of `manifest` for `stage`. All grids must share one shape.
inline StageSamples collect_stage(const DatasetManifest& manifest, Stage stage, const CubeSpec& spec,
                                  std::size_t threads = 1) {
    require(!manifest.entries.empty(), ErrorKind::InvalidArgument, "manifest '" + manifest.name + "' is empty");
    const FeatureGrid first = read_grid(grid_path(manifest.entries.front(), stage));
    const CubeVectorSet first_set = extract_cubes(normalize_grid(first), spec);

    StageSamples out;
    out.cubes_per_image = first_set.size();
    out.lattice_rows = first_set.lattice_rows;
    out.lattice_cols = first_set.lattice_cols;
    out.positions = first_set.positions;
    out.rows.resize(static_cast<Eigen::Index>(manifest.entries.size() * out.cubes_per_image), first_set.vectors.cols());
    for (const auto& e : manifest.entries) out.frames.push_back(e.frame_id);

    parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
        const auto& path = grid_path(manifest.entries[i], stage);
        const FeatureGrid grid = i == 0 ? first : read_grid(path);
        require(grid.height() == first.height() && grid.width() == first.width() && grid.depth() == first.depth(),
                ErrorKind::DimensionMismatch,
                "'" + path.string() + "' has shape " + std::to_string(grid.height()) + "x" +
                    std::to_string(grid.width()) + "x" + std::to_string(grid.depth()) + ", expected " +
                    std::to_string(first.height()) + "x" + std::to_string(first.width()) + "x" +
                    std::to_string(first.depth()));
        const auto set = extract_cubes(normalize_grid(grid), spec);
        out.rows.middleRows(static_cast<Eigen::Index>(i * out.cubes_per_image),
                            static_cast<Eigen::Index>(out.cubes_per_image)) = set.vectors;
    });
    return out;
}

/// Projects image `index` of `samples` into a cube vector set.
inline CubeVectorSet project_image(const StageSamples& samples, std::size_t index, const PcaModel& model) {
    CubeVectorSet set;
    set.lattice_rows = samples.lattice_rows;
    set.lattice_cols = samples.lattice_cols;
    set.positions = samples.positions;
    set.vectors = project_rows(model, samples.image_rows(index));
    return set;
}

inline PcaModel fit_stage_pca(const DatasetManifest& manifest, Stage stage, const CubeSpec& spec,
                              std::size_t output_dim, std::size_t threads = 1) {
    return fit_pca(collect_stage(manifest, stage, spec, threads).rows, output_dim);
}

struct Databases {
    Ifdb ifdb;
    Smdb smdb;
};

inline Databases build_databases(const StageSamples& stage1, const PcaModel& pca1, const StageSamples& stage2,
                                 const PcaModel& pca2) {
    require(stage1.frames == stage2.frames, ErrorKind::InvalidArgument, "stage sample sets cover different frames");
    std::vector<std::pair<FrameId, CubeVectorSet>> filtering;
    std::vector<std::pair<FrameId, CubeVectorSet>> spatial;
    filtering.reserve(stage1.image_count());
    spatial.reserve(stage2.image_count());
    for (std::size_t i = 0; i < stage1.image_count(); ++i) {
        filtering.emplace_back(stage1.frames[i], project_image(stage1, i, pca1));
        spatial.emplace_back(stage2.frames[i], project_image(stage2, i, pca2));
    }
    return Databases{build_ifdb(filtering, stage1.cubes_per_image), build_smdb(spatial)};
}

inline Databases build_databases(const DatasetManifest& manifest, const PcaModel& pca1, const PcaModel& pca2,
                                 const PipelineConfig& config) {
    const auto threads = resolve_threads(config.threads);
    const auto s1 = collect_stage(manifest, Stage::Filtering, config.stage1, threads);
    const auto s2 = collect_stage(manifest, Stage::Spatial, config.stage2, threads);
    return build_databases(s1, pca1, s2, pca2);
}

struct QueryOutcome {
    CandidateList candidates;
    MatchResult match;
};

/// Immutable query-side bundle; `query` is safe to call concurrently.
class QueryEngine {
public:
    QueryEngine(PcaModel pca1, PcaModel pca2, Databases databases, PipelineConfig config)
        : pca1_(std::move(pca1)), pca2_(std::move(pca2)), db_(std::move(databases)), config_(std::move(config)) {
        require(pca1_.output_dim() == db_.ifdb.dim(), ErrorKind::DimensionMismatch,
                "stage-1 PCA output dimension does not match the IFDB");
        require(pca2_.output_dim() == db_.smdb.dim(), ErrorKind::DimensionMismatch,
                "stage-2 PCA output dimension does not match the SMDB");
    }

    QueryOutcome query(const FeatureGrid& stage1_grid, const FeatureGrid& stage2_grid, std::size_t threads = 1) const {
        const auto filter_vectors = encode_grid(stage1_grid, config_.stage1, pca1_);
        const auto spatial_vectors = encode_grid(stage2_grid, config_.stage2, pca2_);
        QueryOutcome out;
        out.candidates = filter_stage(db_.ifdb, filter_vectors.vectors, config_.candidates,
                                      FilterOptions{config_.weighting, threads});
        out.match = spatial_stage(db_.smdb, grid_view(spatial_vectors), out.candidates, threads);
        return out;
    }

    const PipelineConfig& config() const { return config_; }
    const Databases& databases() const { return db_; }
    const PcaModel& stage1_model() const { return pca1_; }
    const PcaModel& stage2_model() const { return pca2_; }

private:
    PcaModel pca1_;
    PcaModel pca2_;
    Databases db_;
    PipelineConfig config_;
};

} // namespace ssmvpr

#endif
