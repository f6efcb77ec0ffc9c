#ifndef SSMVPR_EVAL_HPP
#define SSMVPR_EVAL_HPP

#include "error.hpp"
#include "filtering.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "spatial.hpp"
#include "tensor_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

/**
 * @file eval.hpp
 *
 * @brief Benchmark harness: frame-tolerance scoring, recall@N, tolerance
 * sweeps, precision-recall curves, PCA-dimension sweeps and report output.
 */

namespace ssmvpr {

/// A guess is correct when it lies within `frames` of the labelled reference frame.
struct ToleranceRule {
    unsigned frames = 2;

    bool accepts(FrameId guess, FrameId truth) const {
        const auto diff = guess > truth ? guess - truth : truth - guess;
        return diff <= frames;
    }
};

namespace detail {

inline std::unordered_map<FrameId, FrameId> truth_index(const GroundTruth& truth) {
    std::unordered_map<FrameId, FrameId> index;
    for (const auto& p : truth.pairs) index.emplace(p.query_frame, p.reference_frame);
    return index;
}

inline FrameId truth_for(const std::unordered_map<FrameId, FrameId>& index, FrameId query) {
    auto it = index.find(query);
    if (it == index.end()) {
        fail(ErrorKind::MissingGroundTruth, "query frame " + std::to_string(query) + " has no ground-truth entry");
    }
    return it->second;
}

} // namespace detail

struct QueryCandidates {
    FrameId query_frame = 0;
    CandidateList candidates;
};

/**
 * Fraction of queries whose first `n` candidates contain a frame accepted by
 * `rule`. Lists shorter than `n` contribute all of their entries.
 */
inline double recall_at_n(std::span<const QueryCandidates> lists, const GroundTruth& truth, const ToleranceRule& rule,
                          std::size_t n) {
    require(!lists.empty(), ErrorKind::InvalidArgument, "recall needs at least one query");
    const auto index = detail::truth_index(truth);
    std::size_t hits = 0;
    for (const auto& q : lists) {
        const FrameId expected = detail::truth_for(index, q.query_frame);
        const auto limit = std::min(n, q.candidates.size());
        for (std::size_t i = 0; i < limit; ++i) {
            if (rule.accepts(q.candidates.entries[i].frame, expected)) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(lists.size());
}

struct ScoredOutcome {
    bool correct = false;
    double confidence = 0.0;
};

struct PrPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points; ///< thresholds descending, recall nondecreasing
    double auc = 0.0;
};

/**
 * Sweeps every distinct confidence from high to low, accepting results at or
 * above the threshold. Precision is correct/accepted; recall is
 * correct/total. The area is the trapezoidal integral over recall, with the
 * curve extended flat from the first point down to recall zero.
 */
inline PrCurve pr_curve(std::span<const ScoredOutcome> results) {
    require(!results.empty(), ErrorKind::InvalidArgument, "precision-recall needs at least one result");
    for (const auto& r : results) {
        require(std::isfinite(r.confidence), ErrorKind::NonFinite, "non-finite confidence");
    }
    std::vector<ScoredOutcome> sorted(results.begin(), results.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.confidence > b.confidence; });

    const double total = static_cast<double>(sorted.size());
    PrCurve curve;
    std::size_t accepted = 0;
    std::size_t correct = 0;
    std::size_t previous_correct = 0;
    double previous_precision = 0.0;
    double area_times_total = 0.0; // integrate in units of correct count so an all-correct curve sums exactly
    for (std::size_t i = 0; i < sorted.size();) {
        const double threshold = sorted[i].confidence;
        for (; i < sorted.size() && sorted[i].confidence == threshold; ++i) {
            ++accepted;
            if (sorted[i].correct) ++correct;
        }
        const double precision = static_cast<double>(correct) / static_cast<double>(accepted);
        if (curve.points.empty()) previous_precision = precision;
        area_times_total += static_cast<double>(correct - previous_correct) * (precision + previous_precision) / 2.0;
        curve.points.push_back(PrPoint{threshold, static_cast<double>(correct) / total, precision});
        previous_correct = correct;
        previous_precision = precision;
    }
    curve.auc = area_times_total / total;
    return curve;
}

struct GuessRecord {
    FrameId query_frame = 0;
    FrameId guessed_frame = 0;
};

struct ToleranceAccuracy {
    unsigned tolerance = 0;
    double accuracy = 0.0;
};

inline std::vector<ToleranceAccuracy> tolerance_sweep(std::span<const GuessRecord> guesses, const GroundTruth& truth,
                                                      std::span<const unsigned> tolerances) {
    require(!guesses.empty(), ErrorKind::InvalidArgument, "tolerance sweep needs at least one guess");
    require(std::is_sorted(tolerances.begin(), tolerances.end()), ErrorKind::InvalidArgument,
            "tolerance values must be ascending");
    const auto index = detail::truth_index(truth);
    std::vector<ToleranceAccuracy> out;
    for (unsigned t : tolerances) {
        const ToleranceRule rule{t};
        std::size_t hits = 0;
        for (const auto& g : guesses) {
            if (rule.accepts(g.guessed_frame, detail::truth_for(index, g.query_frame))) ++hits;
        }
        out.push_back({t, static_cast<double>(hits) / static_cast<double>(guesses.size())});
    }
    return out;
}

struct BenchmarkConfig {
    PipelineConfig pipeline;
    std::vector<unsigned> tolerance_sweep = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<unsigned> pr_tolerances = {1, 2, 3};
    std::vector<std::size_t> recall_ns = {1, 2, 3, 4, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    std::vector<std::size_t> pca_sweep = {10, 20, 40, 60, 80, 100, 120, 150, 200};
    std::size_t pca_sweep_n = 25;
    std::size_t report_top = 10;
};

struct QueryRecord {
    FrameId query_frame = 0;
    FrameId reference_frame = 0;
    FrameId guessed_frame = 0;
    std::uint64_t score = 0;
    double confidence = 0.0;
    double vote_score = 0.0;
    bool correct = false;
    double latency_ms = 0.0;
    std::vector<RankedMatch> top;
};

struct RecallPoint {
    std::size_t n = 0;
    double recall = 0.0;
};

struct TolerancePr {
    unsigned tolerance = 0;
    PrCurve curve;
};

struct PcaPoint {
    std::size_t dims = 0;
    double recall = 0.0;
};

struct EvalReport {
    std::string dataset;
    BenchmarkConfig config;
    std::vector<QueryRecord> queries; ///< ordered by query frame id
    double accuracy = 0.0;            ///< at `config.pipeline.tolerance`, every query answered
    std::vector<ToleranceAccuracy> tolerance;
    std::vector<RecallPoint> recall_at_n;
    std::vector<TolerancePr> pr;
    std::vector<PcaPoint> pca_sweep;
};

namespace detail {

inline std::string context_error(const std::string& what, const Error& e) {
    return what + ": " + e.what();
}

} // namespace detail

/**
 * Runs the full protocol: fit both PCA models on the reference traverse,
 * build the IFDB and SMDB, answer every query with filtering then spatial
 * matching, and aggregate the metrics. Output is deterministic for fixed
 * inputs and configuration, independent of the thread count.
 */
inline EvalReport run_benchmark(const DatasetManifest& reference, const DatasetManifest& queries,
                                const GroundTruth& truth, const BenchmarkConfig& config) {
    const auto& pc = config.pipeline;
    const auto threads = resolve_threads(pc.threads);
    require(pc.candidates > 0, ErrorKind::InvalidArgument, "candidate count must be positive");
    require(!queries.entries.empty(), ErrorKind::InvalidArgument, "query manifest is empty");
    const auto truth_map = detail::truth_index(truth);
    for (const auto& q : queries.entries) detail::truth_for(truth_map, q.frame_id);

    const auto ref1 = collect_stage(reference, Stage::Filtering, pc.stage1, threads);
    const auto ref2 = collect_stage(reference, Stage::Spatial, pc.stage2, threads);

    const std::size_t fit_limit =
        std::min<std::size_t>(static_cast<std::size_t>(ref1.rows.rows()), static_cast<std::size_t>(ref1.rows.cols()));
    std::vector<std::size_t> sweep_dims;
    for (auto dims : config.pca_sweep) {
        if (dims > 0 && dims <= fit_limit) sweep_dims.push_back(dims);
    }
    std::sort(sweep_dims.begin(), sweep_dims.end());
    sweep_dims.erase(std::unique(sweep_dims.begin(), sweep_dims.end()), sweep_dims.end());
    const std::size_t fit_dims = std::max(pc.pca_dim, sweep_dims.empty() ? std::size_t{0} : sweep_dims.back());

    const PcaModel wide1 = fit_pca(ref1.rows, fit_dims);
    const PcaModel pca1 = wide1.truncated(pc.pca_dim);
    const PcaModel pca2 = fit_pca(ref2.rows, pc.pca_dim);
    const QueryEngine engine(pca1, pca2, build_databases(ref1, pca1, ref2, pca2), pc);

    const std::size_t query_count = queries.entries.size();
    std::vector<QueryOutcome> outcomes(query_count);
    std::vector<double> latency(query_count, 0.0);
    std::vector<VectorRows> sweep_queries(sweep_dims.empty() ? 0 : query_count);

    parallel_for(query_count, threads, [&](std::size_t i) {
        const auto& entry = queries.entries[i];
        try {
            const auto g1 = read_grid(entry.stage1);
            const auto g2 = read_grid(entry.stage2);
            const auto start = std::chrono::steady_clock::now();
            outcomes[i] = engine.query(g1, g2);
            latency[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            if (!sweep_dims.empty()) {
                sweep_queries[i] = encode_grid(g1, pc.stage1, wide1).vectors;
            }
        } catch (const Error& e) {
            throw Error(e.kind(), detail::context_error("query frame " + std::to_string(entry.frame_id), e));
        }
    });

    EvalReport report;
    report.dataset = reference.name;
    report.config = config;
    const ToleranceRule rule{pc.tolerance};
    std::vector<QueryCandidates> lists;
    std::vector<GuessRecord> guesses;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < query_count; ++i) {
        const auto& entry = queries.entries[i];
        const auto& outcome = outcomes[i];
        QueryRecord rec;
        rec.query_frame = entry.frame_id;
        rec.reference_frame = detail::truth_for(truth_map, entry.frame_id);
        rec.guessed_frame = outcome.match.best_frame;
        rec.score = outcome.match.score;
        rec.confidence = outcome.match.confidence;
        rec.vote_score = outcome.match.ranked.front().vote_score;
        rec.correct = rule.accepts(rec.guessed_frame, rec.reference_frame);
        rec.latency_ms = latency[i];
        const auto top = std::min(config.report_top, outcome.match.ranked.size());
        rec.top.assign(outcome.match.ranked.begin(), outcome.match.ranked.begin() + static_cast<std::ptrdiff_t>(top));
        correct += rec.correct ? 1 : 0;
        report.queries.push_back(std::move(rec));
        lists.push_back({entry.frame_id, outcome.candidates});
        guesses.push_back({entry.frame_id, outcome.match.best_frame});
    }
    std::sort(report.queries.begin(), report.queries.end(),
              [](const QueryRecord& a, const QueryRecord& b) { return a.query_frame < b.query_frame; });
    report.accuracy = static_cast<double>(correct) / static_cast<double>(query_count);

    std::vector<unsigned> tolerances = config.tolerance_sweep;
    std::sort(tolerances.begin(), tolerances.end());
    report.tolerance = tolerance_sweep(guesses, truth, tolerances);

    for (auto n : config.recall_ns) {
        if (n > 0 && n <= pc.candidates) report.recall_at_n.push_back({n, recall_at_n(lists, truth, rule, n)});
    }

    for (unsigned t : config.pr_tolerances) {
        const ToleranceRule pr_rule{t};
        std::vector<ScoredOutcome> scored;
        for (const auto& q : report.queries) {
            scored.push_back({pr_rule.accepts(q.guessed_frame, q.reference_frame), q.confidence});
        }
        report.pr.push_back({t, pr_curve(scored)});
    }

    if (!sweep_dims.empty()) {
        std::vector<std::pair<FrameId, CubeVectorSet>> wide_refs;
        for (std::size_t i = 0; i < ref1.image_count(); ++i) {
            wide_refs.emplace_back(ref1.frames[i], project_image(ref1, i, wide1));
        }
        const Ifdb wide_db = build_ifdb(wide_refs, ref1.cubes_per_image);
        for (auto dims : sweep_dims) {
            const Ifdb db = wide_db.truncated(dims);
            std::vector<QueryCandidates> sweep_lists(query_count);
            parallel_for(query_count, threads, [&](std::size_t i) {
                const VectorRows q = sweep_queries[i].leftCols(static_cast<Eigen::Index>(dims));
                sweep_lists[i] = {queries.entries[i].frame_id,
                                  filter_stage(db, q, config.pca_sweep_n, FilterOptions{pc.weighting, 1})};
            });
            report.pca_sweep.push_back({dims, recall_at_n(sweep_lists, truth, rule, config.pca_sweep_n)});
        }
    }
    return report;
}

inline std::string format_number(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return ec == std::errc() ? std::string(buffer, end) : std::string("nan");
}

inline nlohmann::json config_json(const BenchmarkConfig& config) {
    const auto& pc = config.pipeline;
    return {
        {"pca_dim", pc.pca_dim},
        {"candidates", pc.candidates},
        {"tolerance", pc.tolerance},
        {"stage1_cube", {{"size", pc.stage1.cube_size}, {"stride", pc.stage1.stride}}},
        {"stage2_cube", {{"size", pc.stage2.cube_size}, {"stride", pc.stage2.stride}}},
        {"vote_weighting", pc.weighting == VoteWeighting::Uniform ? "uniform" : "rank"},
        {"tolerance_sweep", config.tolerance_sweep},
        {"pr_tolerances", config.pr_tolerances},
        {"recall_ns", config.recall_ns},
        {"pca_sweep", config.pca_sweep},
        {"pca_sweep_n", config.pca_sweep_n},
    };
}

/// Report JSON. Latencies are excluded so repeated runs are byte-identical; see `write_latency_csv`.
inline nlohmann::json report_json(const EvalReport& report) {
    nlohmann::json queries = nlohmann::json::array();
    for (const auto& q : report.queries) {
        nlohmann::json top = nlohmann::json::array();
        for (const auto& m : q.top) {
            top.push_back({{"frame", m.frame}, {"score", m.score}, {"votes", m.vote_score}});
        }
        queries.push_back({{"query_frame", q.query_frame},
                           {"reference_frame", q.reference_frame},
                           {"guessed_frame", q.guessed_frame},
                           {"score", q.score},
                           {"confidence", q.confidence},
                           {"vote_score", q.vote_score},
                           {"correct", q.correct},
                           {"ranked", std::move(top)}});
    }
    nlohmann::json tolerance = nlohmann::json::array();
    for (const auto& t : report.tolerance) tolerance.push_back({{"tolerance", t.tolerance}, {"accuracy", t.accuracy}});
    nlohmann::json recall = nlohmann::json::array();
    for (const auto& r : report.recall_at_n) recall.push_back({{"n", r.n}, {"recall", r.recall}});
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& p : report.pr) {
        nlohmann::json points = nlohmann::json::array();
        for (const auto& pt : p.curve.points) {
            points.push_back({{"threshold", pt.threshold}, {"recall", pt.recall}, {"precision", pt.precision}});
        }
        pr.push_back({{"tolerance", p.tolerance}, {"auc", p.curve.auc}, {"points", std::move(points)}});
    }
    nlohmann::json pca = nlohmann::json::array();
    for (const auto& p : report.pca_sweep) pca.push_back({{"dims", p.dims}, {"recall", p.recall}});

    return {
        {"dataset", report.dataset},
        {"config", config_json(report.config)},
        {"queries", std::move(queries)},
        {"aggregates",
         {{"query_count", report.queries.size()},
          {"accuracy", report.accuracy},
          {"tolerance_sweep", std::move(tolerance)},
          {"recall_at_n", std::move(recall)},
          {"precision_recall", std::move(pr)},
          {"pca_sweep", std::move(pca)}}},
    };
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

} // namespace detail

inline const std::vector<std::string>& report_files() {
    static const std::vector<std::string> files = {"report.json",      "fig3_tolerance.csv", "fig4_pca.csv",
                                                   "fig5_recallN.csv", "fig6_pr.csv",        "fig7_auc.csv"};
    return files;
}

/// Writes report.json and the five figure tables into `directory`.
inline void write_report(const EvalReport& report, const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + directory.string() + "': " + ec.message());

    auto path = directory / "report.json";
    auto out = detail::open_output(path);
    out << report_json(report).dump(2) << '\n';
    detail::close_output(out, path);

    path = directory / "fig3_tolerance.csv";
    out = detail::open_output(path);
    out << "tolerance,accuracy\n";
    for (const auto& t : report.tolerance) out << t.tolerance << ',' << format_number(t.accuracy) << '\n';
    detail::close_output(out, path);

    path = directory / "fig4_pca.csv";
    out = detail::open_output(path);
    out << "dims,recall_at_" << report.config.pca_sweep_n << '\n';
    for (const auto& p : report.pca_sweep) out << p.dims << ',' << format_number(p.recall) << '\n';
    detail::close_output(out, path);

    path = directory / "fig5_recallN.csv";
    out = detail::open_output(path);
    out << "n,recall\n";
    for (const auto& r : report.recall_at_n) out << r.n << ',' << format_number(r.recall) << '\n';
    detail::close_output(out, path);

    path = directory / "fig6_pr.csv";
    out = detail::open_output(path);
    out << "tolerance,threshold,recall,precision\n";
    for (const auto& p : report.pr) {
        for (const auto& pt : p.curve.points) {
            out << p.tolerance << ',' << format_number(pt.threshold) << ',' << format_number(pt.recall) << ','
                << format_number(pt.precision) << '\n';
        }
    }
    detail::close_output(out, path);

    path = directory / "fig7_auc.csv";
    out = detail::open_output(path);
    out << "tolerance,auc\n";
    for (const auto& p : report.pr) out << p.tolerance << ',' << format_number(p.curve.auc) << '\n';
    detail::close_output(out, path);
}

inline void write_latency_csv(const EvalReport& report, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "query_frame,latency_ms\n";
    for (const auto& q : report.queries) out << q.query_frame << ',' << format_number(q.latency_ms) << '\n';
    detail::close_output(out, path);
}

} // namespace ssmvpr

#endif
