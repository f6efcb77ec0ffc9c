// Command-line front end: fit-pca, build-db, query, evaluate, gen-synthetic.
//
// Exit codes: 0 success, 1 usage, 2 I/O failure, 3 data-contract violation.

#include <ssmvpr/ssmvpr.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kData = 3 };

struct CubeFlags {
    std::size_t stage1_size = ssmvpr::stage1_cubes.cube_size;
    std::size_t stage1_stride = ssmvpr::stage1_cubes.stride;
    std::size_t stage2_size = ssmvpr::stage2_cubes.cube_size;
    std::size_t stage2_stride = ssmvpr::stage2_cubes.stride;

    void attach(CLI::App* cmd) {
        cmd->add_option("--stage1-cube", stage1_size, "Stage-1 cube side")->capture_default_str();
        cmd->add_option("--stage1-stride", stage1_stride, "Stage-1 cube stride")->capture_default_str();
        cmd->add_option("--stage2-cube", stage2_size, "Stage-2 cube side")->capture_default_str();
        cmd->add_option("--stage2-stride", stage2_stride, "Stage-2 cube stride")->capture_default_str();
    }

    void apply(ssmvpr::PipelineConfig& config) const {
        config.stage1 = {stage1_size, stage1_stride};
        config.stage2 = {stage2_size, stage2_stride};
    }
};

void log(const std::string& message) { std::cerr << "[ssmvpr] " << message << '\n'; }

ssmvpr::VoteWeighting parse_weighting(const std::string& name) {
    return name == "rank" ? ssmvpr::VoteWeighting::RankWeighted : ssmvpr::VoteWeighting::Uniform;
}

void print_match(const ssmvpr::MatchResult& match, std::size_t top) {
    std::cout << "best_frame " << match.best_frame << '\n'
              << "score " << match.score << '\n'
              << "confidence " << ssmvpr::format_number(match.confidence) << '\n'
              << "rank,frame,score,votes\n";
    for (std::size_t i = 0; i < std::min(top, match.ranked.size()); ++i) {
        const auto& m = match.ranked[i];
        std::cout << i + 1 << ',' << m.frame << ',' << m.score << ',' << ssmvpr::format_number(m.vote_score) << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage visual place recognition: cube filtering and spatial re-ranking"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML-style config file; command-line flags take precedence");
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

    // fit-pca
    auto* fit = app.add_subcommand("fit-pca", "Fit a PCA model on the cube vectors of a manifest");
    std::string fit_manifest, fit_out;
    int fit_stage = 1;
    std::size_t fit_dim = 100;
    CubeFlags fit_cubes;
    fit->add_option("--manifest", fit_manifest, "Reference manifest")->required();
    fit->add_option("--stage", fit_stage, "1 = filtering grids, 2 = spatial grids")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    fit->add_option("--dim", fit_dim, "Output dimension d")->capture_default_str();
    fit->add_option("--out", fit_out, "Destination model file")->required();
    fit_cubes.attach(fit);

    // build-db
    auto* build = app.add_subcommand("build-db", "Build the IFDB and SMDB for a reference manifest");
    std::string build_manifest, build_pca1, build_pca2, build_ifdb, build_smdb;
    CubeFlags build_cubes;
    build->add_option("--manifest", build_manifest, "Reference manifest")->required();
    build->add_option("--pca1", build_pca1, "Stage-1 PCA model")->required();
    build->add_option("--pca2", build_pca2, "Stage-2 PCA model")->required();
    build->add_option("--ifdb", build_ifdb, "Destination IFDB file")->required();
    build->add_option("--smdb", build_smdb, "Destination SMDB file")->required();
    build_cubes.attach(build);

    // query
    auto* query = app.add_subcommand("query", "Recognise the place shown by query grids");
    std::string q_ifdb, q_smdb, q_pca1, q_pca2, q_stage1, q_stage2, q_manifest, q_weighting = "uniform";
    std::size_t q_candidates = 50, q_top = 10;
    CubeFlags query_cubes;
    query->add_option("--ifdb", q_ifdb, "IFDB file")->required();
    query->add_option("--smdb", q_smdb, "SMDB file")->required();
    query->add_option("--pca1", q_pca1, "Stage-1 PCA model")->required();
    query->add_option("--pca2", q_pca2, "Stage-2 PCA model")->required();
    auto* q_s1_opt = query->add_option("--stage1", q_stage1, "Stage-1 query grid (.fgt)");
    query->add_option("--stage2", q_stage2, "Stage-2 query grid (.fgt)")->needs(q_s1_opt);
    q_s1_opt->needs("--stage2");
    query->add_option("--manifest", q_manifest, "Query manifest (one result line per frame)")->excludes(q_s1_opt);
    query->add_option("-N,--candidates", q_candidates, "Candidate list size N")->capture_default_str();
    query->add_option("--top", q_top, "Ranked entries to print")->capture_default_str();
    query->add_option("--vote-weighting", q_weighting, "uniform or rank")
        ->check(CLI::IsMember({"uniform", "rank"}))
        ->capture_default_str();
    query_cubes.attach(query);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Run the full benchmark and write report.json plus figure CSVs");
    std::string e_ref, e_query, e_truth, e_out, e_latency, e_weighting = "uniform";
    ssmvpr::BenchmarkConfig bench;
    CubeFlags eval_cubes;
    evaluate->add_option("--reference", e_ref, "Reference manifest")->required();
    evaluate->add_option("--query", e_query, "Query manifest")->required();
    evaluate->add_option("--ground-truth", e_truth, "Ground-truth CSV")->required();
    evaluate->add_option("--out", e_out, "Output directory")->required();
    evaluate->add_option("--dim", bench.pipeline.pca_dim, "PCA output dimension d")->capture_default_str();
    evaluate->add_option("-N,--candidates", bench.pipeline.candidates, "Candidate list size N")->capture_default_str();
    evaluate->add_option("--tolerance", bench.pipeline.tolerance, "Frame tolerance t")->capture_default_str();
    evaluate->add_option("--vote-weighting", e_weighting, "uniform or rank")
        ->check(CLI::IsMember({"uniform", "rank"}))
        ->capture_default_str();
    evaluate->add_option("--tolerance-sweep", bench.tolerance_sweep, "Tolerances for fig3")->delimiter(',');
    evaluate->add_option("--pr-tolerances", bench.pr_tolerances, "Tolerances for fig6/fig7")->delimiter(',');
    evaluate->add_option("--recall-n", bench.recall_ns, "List sizes for fig5")->delimiter(',');
    evaluate->add_option("--pca-sweep", bench.pca_sweep, "PCA dimensions for fig4 (empty to skip)")->delimiter(',');
    evaluate->add_option("--pca-sweep-n", bench.pca_sweep_n, "List size for the fig4 recall")->capture_default_str();
    evaluate->add_option("--latency", e_latency, "Also write per-query latency (ms) to this CSV");
    eval_cubes.attach(evaluate);

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic reference/query benchmark fixture");
    ssmvpr::SyntheticSpec synth;
    std::string g_out;
    gen->add_option("--out", g_out, "Output directory")->required();
    gen->add_option("--count", synth.count, "Number of places")->capture_default_str();
    gen->add_option("--depth", synth.depth, "Feature maps D")->capture_default_str();
    gen->add_option("--stage1-side", synth.stage1_side, "Stage-1 grid side")->capture_default_str();
    gen->add_option("--stage2-side", synth.stage2_side, "Stage-2 grid side")->capture_default_str();
    gen->add_option("--noise", synth.noise, "Query noise as a fraction of activation RMS")->capture_default_str();
    gen->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    gen->add_flag("--shuffle", synth.shuffle, "Pair queries with permuted references");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*fit) {
            ssmvpr::PipelineConfig config;
            fit_cubes.apply(config);
            const auto stage = fit_stage == 1 ? ssmvpr::Stage::Filtering : ssmvpr::Stage::Spatial;
            const auto manifest = ssmvpr::load_manifest(fit_manifest);
            log("collecting stage-" + std::to_string(fit_stage) + " cubes from " +
                std::to_string(manifest.entries.size()) + " images");
            const auto samples = ssmvpr::collect_stage(manifest, stage, config.cubes(stage), ssmvpr::resolve_threads(threads));
            const auto model = ssmvpr::fit_pca(samples.rows, fit_dim);
            ssmvpr::save_pca(model, fit_out);

            const double total = ssmvpr::total_variance(samples.rows);
            const auto& variance = model.explained_variance();
            std::cout << "samples " << samples.rows.rows() << '\n'
                      << "input_dim " << model.input_dim() << '\n'
                      << "output_dim " << model.output_dim() << '\n'
                      << "explained_fraction " << ssmvpr::format_number(variance.sum() / total) << '\n'
                      << "component,variance,cumulative_fraction\n";
            double running = 0.0;
            for (Eigen::Index i = 0; i < variance.size(); ++i) {
                running += variance(i);
                if (i < 10 || i + 1 == variance.size()) {
                    std::cout << i + 1 << ',' << ssmvpr::format_number(variance(i)) << ','
                              << ssmvpr::format_number(running / total) << '\n';
                }
            }
        } else if (*build) {
            ssmvpr::PipelineConfig config;
            config.threads = threads;
            build_cubes.apply(config);
            const auto manifest = ssmvpr::load_manifest(build_manifest);
            const auto dbs = ssmvpr::build_databases(manifest, ssmvpr::load_pca(build_pca1),
                                                     ssmvpr::load_pca(build_pca2), config);
            ssmvpr::save_ifdb(dbs.ifdb, build_ifdb);
            ssmvpr::save_smdb(dbs.smdb, build_smdb);
            log("built IFDB (" + std::to_string(dbs.ifdb.record_count()) + " records) and SMDB (" +
                std::to_string(dbs.smdb.image_count()) + " images)");
        } else if (*query) {
            if (q_manifest.empty() && q_stage1.empty()) {
                std::cerr << "query: provide --stage1/--stage2 or --manifest\n";
                return kUsage;
            }
            ssmvpr::PipelineConfig config;
            config.candidates = q_candidates;
            config.weighting = parse_weighting(q_weighting);
            config.threads = threads;
            query_cubes.apply(config);
            const ssmvpr::QueryEngine engine(ssmvpr::load_pca(q_pca1), ssmvpr::load_pca(q_pca2),
                                             {ssmvpr::load_ifdb(q_ifdb), ssmvpr::load_smdb(q_smdb)}, config);
            const auto workers = ssmvpr::resolve_threads(threads);
            if (!q_stage1.empty()) {
                const auto outcome = engine.query(ssmvpr::read_grid(q_stage1), ssmvpr::read_grid(q_stage2), workers);
                print_match(outcome.match, q_top);
            } else {
                const auto manifest = ssmvpr::load_manifest(q_manifest);
                std::cout << "query_frame,best_frame,score,confidence\n";
                for (const auto& e : manifest.entries) {
                    const auto outcome =
                        engine.query(ssmvpr::read_grid(e.stage1), ssmvpr::read_grid(e.stage2), workers);
                    std::cout << e.frame_id << ',' << outcome.match.best_frame << ',' << outcome.match.score << ','
                              << ssmvpr::format_number(outcome.match.confidence) << '\n';
                }
            }
        } else if (*evaluate) {
            bench.pipeline.threads = threads;
            bench.pipeline.weighting = parse_weighting(e_weighting);
            eval_cubes.apply(bench.pipeline);
            const auto reference = ssmvpr::load_manifest(e_ref);
            const auto queries = ssmvpr::load_manifest(e_query);
            const auto truth = ssmvpr::load_ground_truth(e_truth);
            log("evaluating " + std::to_string(queries.entries.size()) + " queries against " +
                std::to_string(reference.entries.size()) + " references");
            const auto report = ssmvpr::run_benchmark(reference, queries, truth, bench);
            ssmvpr::write_report(report, e_out);
            if (!e_latency.empty()) ssmvpr::write_latency_csv(report, e_latency);
            std::cout << "accuracy " << ssmvpr::format_number(report.accuracy) << '\n';
            for (const auto& p : report.pr) {
                std::cout << "auc_t" << p.tolerance << ' ' << ssmvpr::format_number(p.curve.auc) << '\n';
            }
        } else if (*gen) {
            const auto out = ssmvpr::generate_synthetic(synth, g_out);
            log("wrote " + out.reference_manifest.string() + ", " + out.query_manifest.string() + ", " +
                out.ground_truth.string());
        }
    } catch (const ssmvpr::Error& e) {
        std::cerr << "error (" << ssmvpr::to_string(e.kind()) << "): " << e.what() << '\n';
        return e.kind() == ssmvpr::ErrorKind::Io ? kIo : kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
