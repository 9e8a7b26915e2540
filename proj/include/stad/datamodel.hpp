#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stad/types.hpp"

namespace stad {

struct TubeEntry {
    int frame_index{0};
    Boxd box;
    double score{0.0};

    friend bool operator==(const TubeEntry& a, const TubeEntry& b) {
        return a.frame_index == b.frame_index && a.box == b.box && a.score == b.score;
    }
};

// Ordered sequence of per-frame boxes sharing one identity and category.
// Frame indices are consecutive: the canonical schema does not allow
// temporal gaps (the linker fills gaps by interpolation before emitting).
struct AgentTube {
    CategoryId category{0};
    double tube_score{0.0};
    std::vector<TubeEntry> entries;

    int start_frame() const { return entries.front().frame_index; }
    int end_frame() const { return entries.back().frame_index; }

    friend bool operator==(const AgentTube& a, const AgentTube& b) {
        return a.category == b.category && a.tube_score == b.tube_score &&
               a.entries == b.entries;
    }
};

// Category ids are dense from 0; names unique. Configuration, not code.
class CategoryTable {
public:
    CategoryTable() = default;
    explicit CategoryTable(std::vector<std::string> names);

    int size() const { return static_cast<int>(names_.size()); }
    bool contains(CategoryId id) const { return id >= 0 && id < size(); }
    const std::string& name(CategoryId id) const;
    std::optional<CategoryId> find(const std::string& name) const;

    friend bool operator==(const CategoryTable& a, const CategoryTable& b) {
        return a.names_ == b.names_;
    }

private:
    std::vector<std::string> names_;
};

struct FrameDetections {
    int frame_index{0};
    std::vector<Detection> detections;

    friend bool operator==(const FrameDetections& a, const FrameDetections& b) {
        return a.frame_index == b.frame_index && a.detections == b.detections;
    }
};

// One video's annotations: either per-frame detections (detections.json) or
// agent tubes (tubes.json), depending on which document produced it.
struct VideoRecord {
    std::string video_id;
    ImageSize image_size;
    int frame_count{0};
    std::vector<FrameDetections> frames;
    std::vector<AgentTube> tubes;

    friend bool operator==(const VideoRecord& a, const VideoRecord& b) {
        return a.video_id == b.video_id && a.image_size == b.image_size &&
               a.frame_count == b.frame_count && a.frames == b.frames &&
               a.tubes == b.tubes;
    }
};

// Parsers validate every invariant and report the JSON path of the first
// offending element. Coordinates within 1e-6 of [0,1] are clamped; anything
// further out is rejected. When `categories` is given, category ids must
// exist in it.
VideoRecord parse_detections(const std::string& document,
                             const CategoryTable* categories = nullptr);
VideoRecord parse_tubes(const std::string& document,
                        const CategoryTable* categories = nullptr);

std::string serialize_detections(const VideoRecord& record);
std::string serialize_tubes(const VideoRecord& record);

CategoryTable parse_categories(const std::string& document);
std::string serialize_categories(const CategoryTable& table);

// Counts box instances (tube entries and frame detections) per category.
std::map<CategoryId, std::int64_t> category_stats(const std::vector<VideoRecord>& records);

// Deterministic whole-video split: train gets round(ratio * N) ids.
std::pair<std::vector<std::string>, std::vector<std::string>>
split_dataset(const std::vector<std::string>& video_ids, double ratio, std::uint64_t seed);

}  // namespace stad
