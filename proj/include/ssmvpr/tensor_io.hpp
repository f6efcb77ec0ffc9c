#ifndef SSMVPR_TENSOR_IO_HPP
#define SSMVPR_TENSOR_IO_HPP

#include "binary_io.hpp"
#include "error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

/**
 * @file tensor_io.hpp
 *
 * @brief Feature grids, dataset manifests and ground truth on disk.
 *
 * The `.fgt` layout is `FGT1`, then H, W, D as u32 little-endian, then H*W*D
 * little-endian f32 values in (row, col, feature) order.
 */

namespace ssmvpr {

using FrameId = std::uint32_t;

/// Activation tensor of one image at one layer, stored row-major as (row, col, feature).
class FeatureGrid {
public:
    FeatureGrid() = default;

    FeatureGrid(std::size_t height, std::size_t width, std::size_t depth)
        : height_(height), width_(width), depth_(depth), values_(height * width * depth, 0.0f) {
        require(height > 0 && width > 0 && depth > 0, ErrorKind::InvalidArgument,
                "feature grid dimensions must be positive");
    }

    FeatureGrid(std::size_t height, std::size_t width, std::size_t depth, std::vector<float> values)
        : height_(height), width_(width), depth_(depth), values_(std::move(values)) {
        require(height > 0 && width > 0 && depth > 0, ErrorKind::InvalidArgument,
                "feature grid dimensions must be positive");
        require(values_.size() == height * width * depth, ErrorKind::SizeMismatch,
                "feature grid holds " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(height * width * depth));
    }

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t depth() const { return depth_; }

    std::span<const float> values() const { return values_; }
    std::span<float> values() { return values_; }

    /// Activation vector (length D) at spatial location (row, col).
    std::span<const float> location(std::size_t row, std::size_t col) const {
        return std::span<const float>(values_).subspan((row * width_ + col) * depth_, depth_);
    }
    std::span<float> location(std::size_t row, std::size_t col) {
        return std::span<float>(values_).subspan((row * width_ + col) * depth_, depth_);
    }

    float at(std::size_t row, std::size_t col, std::size_t feature) const {
        return values_[(row * width_ + col) * depth_ + feature];
    }
    float& at(std::size_t row, std::size_t col, std::size_t feature) {
        return values_[(row * width_ + col) * depth_ + feature];
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
    }

    friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t depth_ = 0;
    std::vector<float> values_;
};

inline constexpr std::string_view grid_magic = "FGT1";

inline std::size_t grid_file_size(std::size_t height, std::size_t width, std::size_t depth) {
    return 16 + 4 * height * width * depth;
}

inline void write_grid(const FeatureGrid& grid, const std::filesystem::path& destination) {
    require(grid.height() > 0, ErrorKind::InvalidArgument, "cannot write an empty feature grid");
    require(grid.all_finite(), ErrorKind::NonFinite,
            "feature grid contains non-finite values; refusing to write '" + destination.string() + "'");
    binary::Writer out;
    out.magic(grid_magic);
    out.u32(static_cast<std::uint32_t>(grid.height()));
    out.u32(static_cast<std::uint32_t>(grid.width()));
    out.u32(static_cast<std::uint32_t>(grid.depth()));
    out.f32s(grid.values());
    out.commit(destination);
}

inline FeatureGrid read_grid(const std::filesystem::path& source) {
    auto in = binary::Reader::open(source);
    in.expect_magic(grid_magic);
    const std::size_t h = in.u32();
    const std::size_t w = in.u32();
    const std::size_t d = in.u32();
    if (h == 0 || w == 0 || d == 0) {
        fail(ErrorKind::SizeMismatch, in.label() + ": zero grid dimension");
    }
    const std::size_t expected = 4 * h * w * d;
    if (in.remaining() < expected) {
        fail(ErrorKind::Truncated, in.label() + ": header declares " + std::to_string(expected) +
                                       " payload bytes, file holds " + std::to_string(in.remaining()));
    }
    std::vector<float> values(h * w * d);
    in.f32s(values);
    in.expect_end();
    FeatureGrid grid(h, w, d, std::move(values));
    require(grid.all_finite(), ErrorKind::NonFinite, in.label() + ": non-finite activation");
    return grid;
}

struct ManifestEntry {
    FrameId frame_id = 0;
    std::filesystem::path stage1;
    std::filesystem::path stage2;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Ordered list of frames; iteration order is file order and drives database order.
struct DatasetManifest {
    std::string name;
    std::vector<ManifestEntry> entries;
};

struct CorrespondencePair {
    FrameId query_frame = 0;
    FrameId reference_frame = 0;

    friend bool operator==(const CorrespondencePair&, const CorrespondencePair&) = default;
};

struct GroundTruth {
    std::vector<CorrespondencePair> pairs;

    /// Reference frame labelled for `query`, or nullptr when absent.
    const FrameId* reference_for(FrameId query) const {
        auto it = std::find_if(pairs.begin(), pairs.end(),
                               [query](const CorrespondencePair& p) { return p.query_frame == query; });
        return it == pairs.end() ? nullptr : &it->reference_frame;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline std::uint32_t parse_frame(std::string_view field, const std::string& where) {
    std::uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        fail(ErrorKind::Parse, where + ": invalid frame id '" + std::string(field) + "'");
    }
    return value;
}

/// Calls `on_line(fields, where)` for every non-blank, non-comment line.
template <typename Callback>
void for_each_record(const std::filesystem::path& path, Callback&& on_line) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        on_line(split_commas(body), path.string() + ":" + std::to_string(line_no));
    }
    if (in.bad()) {
        fail(ErrorKind::Io, "failed reading '" + path.string() + "'");
    }
}

} // namespace detail

/// Parses `frame_id,stage1_path,stage2_path` lines. Relative paths resolve against the manifest's directory.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    DatasetManifest manifest;
    manifest.name = path.stem().string();
    const auto base = path.parent_path();
    std::set<std::filesystem::path> seen_paths;
    std::unordered_set<FrameId> seen_frames;

    detail::for_each_record(path, [&](const std::vector<std::string_view>& fields, const std::string& where) {
        if (fields.size() != 3 || fields[1].empty() || fields[2].empty()) {
            fail(ErrorKind::Parse, where + ": expected 'frame_id,stage1_path,stage2_path'");
        }
        ManifestEntry entry;
        entry.frame_id = detail::parse_frame(fields[0], where);
        if (!seen_frames.insert(entry.frame_id).second) {
            fail(ErrorKind::DuplicateFrame, where + ": duplicate frame id " + std::to_string(entry.frame_id));
        }
        if (!manifest.entries.empty() && entry.frame_id <= manifest.entries.back().frame_id) {
            fail(ErrorKind::Parse, where + ": frame ids must be strictly increasing");
        }
        std::filesystem::path p1{std::string(fields[1])};
        std::filesystem::path p2{std::string(fields[2])};
        entry.stage1 = p1.is_absolute() ? p1 : base / p1;
        entry.stage2 = p2.is_absolute() ? p2 : base / p2;
        for (const auto& p : {entry.stage1, entry.stage2}) {
            if (!seen_paths.insert(p.lexically_normal()).second) {
                fail(ErrorKind::Parse, where + ": path '" + p.string() + "' listed twice");
            }
        }
        manifest.entries.push_back(std::move(entry));
    });
    return manifest;
}

inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    }
    out << "# frame_id,stage1_path,stage2_path\n";
    const auto base = path.parent_path();
    for (const auto& e : manifest.entries) {
        out << e.frame_id << ',' << e.stage1.lexically_proximate(base).generic_string() << ','
            << e.stage2.lexically_proximate(base).generic_string() << '\n';
    }
    if (!out) {
        fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
    }
}

inline GroundTruth load_ground_truth(const std::filesystem::path& path) {
    GroundTruth truth;
    std::unordered_set<FrameId> seen;
    detail::for_each_record(path, [&](const std::vector<std::string_view>& fields, const std::string& where) {
        if (fields.size() != 2) {
            fail(ErrorKind::Parse, where + ": expected 'query_frame,reference_frame'");
        }
        CorrespondencePair pair{detail::parse_frame(fields[0], where), detail::parse_frame(fields[1], where)};
        if (!seen.insert(pair.query_frame).second) {
            fail(ErrorKind::DuplicateFrame, where + ": query frame " + std::to_string(pair.query_frame) +
                                                " appears twice");
        }
        truth.pairs.push_back(pair);
    });
    return truth;
}

inline void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    }
    out << "# query_frame,reference_frame\n";
    for (const auto& p : truth.pairs) {
        out << p.query_frame << ',' << p.reference_frame << '\n';
    }
    if (!out) {
        fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
    }
}

} // namespace ssmvpr

#endif
