#ifndef SSMVPR_SPATIAL_HPP
#define SSMVPR_SPATIAL_HPP

#include "binary_io.hpp"
#include "descriptor.hpp"
#include "error.hpp"
#include "filtering.hpp"
#include "parallel.hpp"
#include "tensor_io.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

/**
 * @file spatial.hpp
 *
 * @brief Stage two: anchor-based spatial consistency re-ranking.
 *
 * Each image is a G x G lattice of compressed cube vectors. For a candidate
 * image, every lattice position (i, j) is paired with its best-matching query
 * position (k, l), the anchor. Walking the candidate's row i and column j, a
 * position scores when its own best match sits at the same offset from (k, l)
 * in the query. The candidate score is the total over all anchors, which lies
 * in [2G^2, 2G^3]: the anchor always matches itself once per scan.
 */

namespace ssmvpr {

/// Non-owning view of a square lattice of vectors, row-major by position.
struct GridVectors {
    std::size_t side = 0;
    std::size_t dim = 0;
    std::span<const float> values;

    std::size_t positions() const { return side * side; }

    std::span<const float> at(std::size_t flat) const { return values.subspan(flat * dim, dim); }
};

inline GridVectors grid_view(const CubeVectorSet& set) {
    require(set.lattice_rows == set.lattice_cols && set.lattice_rows > 0, ErrorKind::DimensionMismatch,
            "spatial matching needs a square cube lattice");
    return GridVectors{set.lattice_rows, set.dim(),
                       std::span<const float>(set.vectors.data(), static_cast<std::size_t>(set.vectors.size()))};
}

inline constexpr std::uint64_t max_match_score(std::size_t side) {
    return static_cast<std::uint64_t>(side) * side * 2 * side;
}

/// For every candidate position, the flat index of its nearest query position.
/// Equal distances resolve to the lexicographically smallest query position.
inline std::vector<std::uint32_t> best_match_table(const GridVectors& candidate, const GridVectors& query) {
    const std::size_t count = candidate.positions();
    std::vector<std::uint32_t> table(count, 0);
    for (std::size_t c = 0; c < count; ++c) {
        const auto cv = candidate.at(c);
        double best = detail::squared_distance(cv, query.at(0));
        std::uint32_t arg = 0;
        for (std::size_t q = 1; q < query.positions(); ++q) {
            const double dist = detail::squared_distance(cv, query.at(q));
            if (dist < best) {
                best = dist;
                arg = static_cast<std::uint32_t>(q);
            }
        }
        table[c] = arg;
    }
    return table;
}

inline std::uint64_t match_score(const GridVectors& candidate, const GridVectors& query) {
    require(candidate.side == query.side && candidate.side > 0, ErrorKind::DimensionMismatch,
            "candidate and query lattices differ in size");
    require(candidate.dim == query.dim, ErrorKind::DimensionMismatch, "candidate and query vector dimensions differ");
    require(candidate.values.size() == candidate.positions() * candidate.dim &&
                query.values.size() == query.positions() * query.dim,
            ErrorKind::SizeMismatch, "lattice view does not cover G*G vectors");

    const auto side = static_cast<std::ptrdiff_t>(candidate.side);
    const auto best = best_match_table(candidate, query);
    const auto flat = [side](std::ptrdiff_t r, std::ptrdiff_t c) { return static_cast<std::uint32_t>(r * side + c); };

    std::uint64_t score = 0;
    for (std::ptrdiff_t i = 0; i < side; ++i) {
        for (std::ptrdiff_t j = 0; j < side; ++j) {
            const auto anchor = best[static_cast<std::size_t>(flat(i, j))];
            const std::ptrdiff_t k = anchor / side;
            const std::ptrdiff_t l = anchor % side;
            for (std::ptrdiff_t n = -j; n < side - j; ++n) {
                const std::ptrdiff_t col = l + n;
                if (col < 0 || col >= side) continue; // query probe off the lattice
                if (best[static_cast<std::size_t>(flat(i, j + n))] == flat(k, col)) ++score;
            }
            for (std::ptrdiff_t m = -i; m < side - i; ++m) {
                const std::ptrdiff_t row = k + m;
                if (row < 0 || row >= side) continue;
                if (best[static_cast<std::size_t>(flat(i + m, j))] == flat(row, l)) ++score;
            }
        }
    }
    return score;
}

/// Spatial matching database: one G x G lattice of d-dimensional vectors per reference image.
class Smdb {
public:
    Smdb() = default;

    Smdb(std::size_t side, std::size_t dim) : side_(side), dim_(dim) {
        require(side > 0 && dim > 0, ErrorKind::InvalidArgument, "SMDB side and dimension must be positive");
    }

    void add_image(FrameId frame, const CubeVectorSet& set) {
        require(set.lattice_rows == side_ && set.lattice_cols == side_ && set.size() == side_ * side_,
                ErrorKind::DimensionMismatch,
                "frame " + std::to_string(frame) + " lattice is " + std::to_string(set.lattice_rows) + "x" +
                    std::to_string(set.lattice_cols) + ", SMDB expects " + std::to_string(side_) + "x" +
                    std::to_string(side_));
        require(set.dim() == dim_, ErrorKind::DimensionMismatch,
                "frame " + std::to_string(frame) + " vector dimension " + std::to_string(set.dim()) +
                    " does not match SMDB dimension " + std::to_string(dim_));
        add_raw(frame, std::span<const float>(set.vectors.data(), static_cast<std::size_t>(set.vectors.size())));
    }

    std::size_t side() const { return side_; }
    std::size_t dim() const { return dim_; }
    std::size_t image_count() const { return frames_.size(); }
    std::span<const FrameId> frames() const { return frames_; }

    bool contains(FrameId frame) const { return index_.contains(frame); }

    GridVectors image(FrameId frame) const {
        auto it = index_.find(frame);
        if (it == index_.end()) {
            fail(ErrorKind::UnknownFrame, "frame " + std::to_string(frame) + " is not in the SMDB");
        }
        return image_at(it->second);
    }

    GridVectors image_at(std::size_t index) const {
        const std::size_t stride = side_ * side_ * dim_;
        return GridVectors{side_, dim_, std::span<const float>(data_).subspan(index * stride, stride)};
    }

    /// Appends a lattice given as G*G row-major vectors of `dim()` floats.
    void add_raw(FrameId frame, std::span<const float> values) {
        require(values.size() == side_ * side_ * dim_, ErrorKind::SizeMismatch,
                "frame " + std::to_string(frame) + " lattice has the wrong number of values");
        require(!index_.contains(frame), ErrorKind::DuplicateFrame,
                "frame " + std::to_string(frame) + " already in SMDB");
        index_.emplace(frame, frames_.size());
        frames_.push_back(frame);
        data_.insert(data_.end(), values.begin(), values.end());
    }

private:
    std::size_t side_ = 0;
    std::size_t dim_ = 0;
    std::vector<FrameId> frames_;
    std::unordered_map<FrameId, std::size_t> index_;
    std::vector<float> data_;
};

inline Smdb build_smdb(const std::vector<std::pair<FrameId, CubeVectorSet>>& reference) {
    require(!reference.empty(), ErrorKind::InvalidArgument, "cannot build an SMDB from zero images");
    const auto& first = reference.front().second;
    Smdb db(first.lattice_rows, first.dim());
    for (const auto& [frame, set] : reference) {
        db.add_image(frame, set);
    }
    return db;
}

struct RankedMatch {
    FrameId frame = 0;
    std::uint64_t score = 0;
    double vote_score = 0.0;
};

struct MatchResult {
    FrameId best_frame = 0;
    std::uint64_t score = 0;
    double confidence = 0.0;         ///< score / (2 G^3)
    std::vector<RankedMatch> ranked; ///< all candidates, best first
};

/**
 * Scores every candidate against the query lattice and picks the best.
 * Ranking: higher spatial score, then higher stage-one vote score, then lower
 * frame id. Candidates are scored independently, so their order in `candidates`
 * does not matter.
 */
inline MatchResult spatial_stage(const Smdb& db, const GridVectors& query, const CandidateList& candidates,
                                 std::size_t threads = 1) {
    require(!candidates.empty(), ErrorKind::InvalidArgument, "spatial matching needs at least one candidate");
    require(query.side == db.side() && query.dim == db.dim(), ErrorKind::DimensionMismatch,
            "query lattice does not match the SMDB layout");
    for (const auto& c : candidates.entries) {
        if (!db.contains(c.frame)) {
            fail(ErrorKind::UnknownFrame, "candidate frame " + std::to_string(c.frame) + " is not in the SMDB");
        }
    }

    std::vector<RankedMatch> ranked(candidates.size());
    parallel_for(candidates.size(), threads, [&](std::size_t i) {
        const auto& c = candidates.entries[i];
        ranked[i] = RankedMatch{c.frame, match_score(db.image(c.frame), query), c.vote_score};
    });
    std::sort(ranked.begin(), ranked.end(), [](const RankedMatch& a, const RankedMatch& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.vote_score != b.vote_score) return a.vote_score > b.vote_score;
        return a.frame < b.frame;
    });

    MatchResult result;
    result.best_frame = ranked.front().frame;
    result.score = ranked.front().score;
    result.confidence = static_cast<double>(result.score) / static_cast<double>(max_match_score(db.side()));
    result.ranked = std::move(ranked);
    return result;
}

inline constexpr std::string_view smdb_magic = "SMD1";

/// `SMD1`, u32 image_count, u32 G, u32 d, then per image: u32 frame_id and G*G row-major vectors of d x f32.
inline void save_smdb(const Smdb& db, const std::filesystem::path& destination) {
    binary::Writer out;
    out.magic(smdb_magic);
    out.u32(static_cast<std::uint32_t>(db.image_count()));
    out.u32(static_cast<std::uint32_t>(db.side()));
    out.u32(static_cast<std::uint32_t>(db.dim()));
    for (std::size_t i = 0; i < db.image_count(); ++i) {
        out.u32(db.frames()[i]);
        out.f32s(db.image_at(i).values);
    }
    out.commit(destination);
}

inline Smdb load_smdb(const std::filesystem::path& source) {
    auto in = binary::Reader::open(source);
    in.expect_magic(smdb_magic);
    const std::size_t images = in.u32();
    const std::size_t side = in.u32();
    const std::size_t dim = in.u32();
    if (images == 0 || side == 0 || dim == 0) {
        fail(ErrorKind::SizeMismatch, in.label() + ": empty SMDB header");
    }
    const std::size_t per_image = side * side * dim;
    if (in.remaining() < images * (4 + 4 * per_image)) {
        fail(ErrorKind::Truncated, in.label() + ": SMDB payload shorter than declared");
    }
    Smdb db(side, dim);
    std::vector<float> values(per_image);
    for (std::size_t i = 0; i < images; ++i) {
        const FrameId frame = in.u32();
        in.f32s(values);
        require(std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); }),
                ErrorKind::NonFinite, in.label() + ": non-finite vector");
        db.add_raw(frame, values);
    }
    in.expect_end();
    return db;
}

} // namespace ssmvpr

#endif
