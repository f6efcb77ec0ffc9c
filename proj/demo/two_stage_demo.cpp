// Builds a small synthetic traverse, fits both PCA models, and recognises a
// handful of perturbed query frames through the library API.

#include <ssmvpr/ssmvpr.hpp>

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    const std::filesystem::path root =
        argc > 1 ? std::filesystem::path(argv[1]) : std::filesystem::temp_directory_path() / "ssmvpr_demo";

    ssmvpr::SyntheticSpec spec;
    spec.count = 24;
    spec.depth = 32;
    const auto fixture = ssmvpr::generate_synthetic(spec, root);

    const auto reference = ssmvpr::load_manifest(fixture.reference_manifest);
    const auto queries = ssmvpr::load_manifest(fixture.query_manifest);

    ssmvpr::PipelineConfig config;
    config.pca_dim = 32;
    config.candidates = 5;

    const auto stage1 = ssmvpr::collect_stage(reference, ssmvpr::Stage::Filtering, config.stage1);
    const auto stage2 = ssmvpr::collect_stage(reference, ssmvpr::Stage::Spatial, config.stage2);
    const auto pca1 = ssmvpr::fit_pca(stage1.rows, config.pca_dim);
    const auto pca2 = ssmvpr::fit_pca(stage2.rows, config.pca_dim);
    const ssmvpr::QueryEngine engine(pca1, pca2, ssmvpr::build_databases(stage1, pca1, stage2, pca2), config);

    for (std::size_t i = 0; i < 5; ++i) {
        const auto& q = queries.entries[i];
        const auto outcome = engine.query(ssmvpr::read_grid(q.stage1), ssmvpr::read_grid(q.stage2));
        std::cout << "query " << q.frame_id << " -> frame " << outcome.match.best_frame << " (score "
                  << outcome.match.score << ", confidence " << outcome.match.confidence << ")\n";
    }
    return 0;
}
