#ifndef SSMVPR_FILTERING_HPP
#define SSMVPR_FILTERING_HPP

#include "binary_io.hpp"
#include "descriptor.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

/**
 * @file filtering.hpp
 *
 * @brief Stage one: the image filtering database (IFDB) and candidate voting.
 *
 * Every reference image contributes its compressed cube vectors to a flat,
 * orderless store. A query votes with each of its cube vectors for the owners
 * of that vector's N nearest stored records; the N best-voted images form the
 * candidate list handed to spatial matching.
 */

namespace ssmvpr {

inline constexpr std::size_t default_cubes_per_image = 16;

/// Flat record store. Records of one image are contiguous and images keep insertion order.
class Ifdb {
public:
    Ifdb() = default;

    Ifdb(std::size_t dim, std::size_t cubes_per_image) : dim_(dim), cubes_per_image_(cubes_per_image) {
        require(dim > 0 && cubes_per_image > 0, ErrorKind::InvalidArgument,
                "IFDB dimension and cubes per image must be positive");
    }

    void add_image(FrameId frame, const VectorRows& vectors) {
        require(static_cast<std::size_t>(vectors.rows()) == cubes_per_image_, ErrorKind::DimensionMismatch,
                "frame " + std::to_string(frame) + " has " + std::to_string(vectors.rows()) + " cube vectors, IFDB expects " +
                    std::to_string(cubes_per_image_));
        require(static_cast<std::size_t>(vectors.cols()) == dim_, ErrorKind::DimensionMismatch,
                "frame " + std::to_string(frame) + " has vector dimension " + std::to_string(vectors.cols()) +
                    ", IFDB expects " + std::to_string(dim_));
        require(std::find(frames_.begin(), frames_.end(), frame) == frames_.end(), ErrorKind::DuplicateFrame,
                "frame " + std::to_string(frame) + " already in IFDB");
        const auto image = static_cast<std::uint32_t>(frames_.size());
        frames_.push_back(frame);
        for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
            owners_.push_back(image);
            data_.insert(data_.end(), vectors.row(r).data(), vectors.row(r).data() + dim_);
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t cubes_per_image() const { return cubes_per_image_; }
    std::size_t image_count() const { return frames_.size(); }
    std::size_t record_count() const { return owners_.size(); }

    std::span<const FrameId> frames() const { return frames_; }

    /// Image index (insertion order) owning record `index`.
    std::uint32_t owner_image(std::size_t index) const { return owners_[index]; }
    FrameId owner_frame(std::size_t index) const { return frames_[owners_[index]]; }

    std::span<const float> record(std::size_t index) const {
        return std::span<const float>(data_).subspan(index * dim_, dim_);
    }

    /// The same database restricted to the leading `dim` vector components.
    Ifdb truncated(std::size_t dim) const {
        require(dim > 0 && dim <= dim_, ErrorKind::InvalidArgument, "invalid IFDB truncation");
        Ifdb out(dim, cubes_per_image_);
        out.frames_ = frames_;
        out.owners_ = owners_;
        out.data_.reserve(record_count() * dim);
        for (std::size_t i = 0; i < record_count(); ++i) {
            auto r = record(i).first(dim);
            out.data_.insert(out.data_.end(), r.begin(), r.end());
        }
        return out;
    }

private:
    std::size_t dim_ = 0;
    std::size_t cubes_per_image_ = 0;
    std::vector<FrameId> frames_;
    std::vector<std::uint32_t> owners_;
    std::vector<float> data_;
};

/// Builds an IFDB from per-image cube vectors, preserving the given order.
/// Every set must hold `cubes_per_image` vectors of a common dimension.
inline Ifdb build_ifdb(const std::vector<std::pair<FrameId, CubeVectorSet>>& reference,
                       std::size_t cubes_per_image = default_cubes_per_image) {
    require(!reference.empty(), ErrorKind::InvalidArgument, "cannot build an IFDB from zero images");
    Ifdb db(reference.front().second.dim(), cubes_per_image);
    for (const auto& [frame, set] : reference) {
        db.add_image(frame, set.vectors);
    }
    return db;
}

struct Neighbor {
    std::size_t record = 0;
    FrameId owner = 0;
    double distance = 0.0;
};

namespace detail {

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += diff * diff;
    }
    return sum;
}

using ScoredRecord = std::pair<double, std::size_t>; // squared distance, record index

inline void keep_best(std::vector<ScoredRecord>& scored, std::size_t count) {
    if (scored.size() > count) {
        std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(count), scored.end());
        scored.resize(count);
    }
    std::sort(scored.begin(), scored.end());
}

} // namespace detail

/**
 * Exact `count` nearest records to `query` by Euclidean distance, ascending.
 * Equal distances order by record index. The scan is split across `threads`
 * workers; the merged result does not depend on the split.
 */
inline std::vector<Neighbor> nearest_records(const Ifdb& db, std::span<const float> query, std::size_t count,
                                             std::size_t threads = 1) {
    require(query.size() == db.dim(), ErrorKind::DimensionMismatch,
            "query dimension " + std::to_string(query.size()) + " does not match IFDB dimension " +
                std::to_string(db.dim()));
    require(count <= db.record_count(), ErrorKind::InvalidArgument,
            "requested " + std::to_string(count) + " neighbours from " + std::to_string(db.record_count()) +
                " records");

    const std::size_t records = db.record_count();
    const std::size_t workers = std::min(resolve_threads(threads), std::max<std::size_t>(1, records / 1024));
    std::vector<std::vector<detail::ScoredRecord>> partial(workers);
    parallel_blocks(records, workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
        auto& local = partial[w];
        local.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            local.emplace_back(detail::squared_distance(query, db.record(i)), i);
        }
        detail::keep_best(local, count);
    });

    std::vector<detail::ScoredRecord> merged;
    for (auto& part : partial) merged.insert(merged.end(), part.begin(), part.end());
    detail::keep_best(merged, count);

    std::vector<Neighbor> out;
    out.reserve(merged.size());
    for (const auto& [sq, index] : merged) {
        out.push_back(Neighbor{index, db.owner_frame(index), std::sqrt(sq)});
    }
    return out;
}

enum class VoteWeighting {
    Uniform,     ///< +1 for every appearance in a top-N list
    RankWeighted ///< 1 - rank/N for the record at 0-based `rank`
};

struct Candidate {
    FrameId frame = 0;
    double vote_score = 0.0;
    double distance_sum = 0.0; ///< summed distance of this frame's voting records (tie-break)
};

/// Descending by vote score, then ascending summed distance, then ascending frame id.
struct CandidateList {
    std::vector<Candidate> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
};

struct FilterOptions {
    VoteWeighting weighting = VoteWeighting::Uniform;
    std::size_t threads = 1;
};

/**
 * Stage-one retrieval. For each query cube vector the `candidates` nearest
 * records (capped at the record count) vote for their owner image; an owner
 * that holds several of those records receives several votes. Returns the
 * best-voted images, at most `candidates` of them; images without votes are
 * not listed.
 */
inline CandidateList filter_stage(const Ifdb& db, const VectorRows& query, std::size_t candidates,
                                  const FilterOptions& options = {}) {
    require(candidates > 0, ErrorKind::InvalidArgument, "candidate count must be positive");
    require(static_cast<std::size_t>(query.rows()) == db.cubes_per_image(), ErrorKind::DimensionMismatch,
            "query has " + std::to_string(query.rows()) + " cube vectors, IFDB expects " +
                std::to_string(db.cubes_per_image()));
    const std::size_t neighbours = std::min(candidates, db.record_count());

    std::vector<double> votes(db.image_count(), 0.0);
    std::vector<double> distance_sums(db.image_count(), 0.0);
    for (Eigen::Index q = 0; q < query.rows(); ++q) {
        std::span<const float> vec(query.row(q).data(), static_cast<std::size_t>(query.cols()));
        const auto nearest = nearest_records(db, vec, neighbours, options.threads);
        for (std::size_t rank = 0; rank < nearest.size(); ++rank) {
            const auto image = db.owner_image(nearest[rank].record);
            const double weight = options.weighting == VoteWeighting::Uniform
                                      ? 1.0
                                      : 1.0 - static_cast<double>(rank) / static_cast<double>(neighbours);
            votes[image] += weight;
            distance_sums[image] += nearest[rank].distance;
        }
    }

    CandidateList list;
    for (std::size_t image = 0; image < db.image_count(); ++image) {
        if (votes[image] > 0.0) {
            list.entries.push_back(Candidate{db.frames()[image], votes[image], distance_sums[image]});
        }
    }
    auto better = [](const Candidate& a, const Candidate& b) {
        if (a.vote_score != b.vote_score) return a.vote_score > b.vote_score;
        if (a.distance_sum != b.distance_sum) return a.distance_sum < b.distance_sum;
        return a.frame < b.frame;
    };
    const auto keep = std::min(candidates, list.entries.size());
    std::partial_sort(list.entries.begin(), list.entries.begin() + static_cast<std::ptrdiff_t>(keep),
                      list.entries.end(), better);
    list.entries.resize(keep);
    return list;
}

inline constexpr std::string_view ifdb_magic = "IFD1";

/// `IFD1`, u32 image_count, u32 d, then every record as (u32 owner_frame, d x f32).
inline void save_ifdb(const Ifdb& db, const std::filesystem::path& destination) {
    binary::Writer out;
    out.magic(ifdb_magic);
    out.u32(static_cast<std::uint32_t>(db.image_count()));
    out.u32(static_cast<std::uint32_t>(db.dim()));
    for (std::size_t i = 0; i < db.record_count(); ++i) {
        out.u32(db.owner_frame(i));
        out.f32s(db.record(i));
    }
    out.commit(destination);
}

/// The per-image record count is not stored; it is recovered from the payload length
/// and must be uniform with each image's records contiguous.
inline Ifdb load_ifdb(const std::filesystem::path& source) {
    auto in = binary::Reader::open(source);
    in.expect_magic(ifdb_magic);
    const std::size_t images = in.u32();
    const std::size_t dim = in.u32();
    if (images == 0 || dim == 0) {
        fail(ErrorKind::SizeMismatch, in.label() + ": empty IFDB header");
    }
    const std::size_t record_bytes = 4 + 4 * dim;
    if (in.remaining() % record_bytes != 0 || (in.remaining() / record_bytes) % images != 0 ||
        in.remaining() == 0) {
        fail(ErrorKind::SizeMismatch, in.label() + ": payload is not a whole number of records per image");
    }
    const std::size_t per_image = in.remaining() / record_bytes / images;
    Ifdb db(dim, per_image);
    VectorRows rows(static_cast<Eigen::Index>(per_image), static_cast<Eigen::Index>(dim));
    for (std::size_t image = 0; image < images; ++image) {
        FrameId frame = 0;
        for (std::size_t r = 0; r < per_image; ++r) {
            const FrameId owner = in.u32();
            if (r == 0) {
                frame = owner;
            } else if (owner != frame) {
                fail(ErrorKind::SizeMismatch, in.label() + ": records of frame " + std::to_string(frame) +
                                                  " are not contiguous");
            }
            in.f32s(std::span<float>(rows.row(static_cast<Eigen::Index>(r)).data(), dim));
        }
        require(rows.allFinite(), ErrorKind::NonFinite, in.label() + ": non-finite record");
        db.add_image(frame, rows);
    }
    in.expect_end();
    return db;
}

} // namespace ssmvpr

#endif
