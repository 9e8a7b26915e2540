#include "stad/tubes.hpp"

#include <algorithm>
#include <cmath>

#include "stad/errors.hpp"
#include "stad/geometry.hpp"

namespace stad {

void require_valid(const LinkParams& params) {
    if (!(params.link_iou_threshold > 0.0 && params.link_iou_threshold <= 1.0))
        throw ValidationError("link_iou_threshold must be in (0,1]");
    if (params.max_gap < 0) throw ValidationError("max_gap must be non-negative");
    if (params.min_tube_length < 1) throw ValidationError("min_tube_length must be positive");
}

namespace {

struct ActiveTube {
    CategoryId category;
    std::vector<TubeEntry> entries;  // contiguous up to the last match
    int last_match_frame;
};

// Pending (tube, detection) claim for one frame, ordered by IoU descending
// with stable tie-breaking.
struct Claim {
    double iou;
    std::size_t tube;
    std::size_t detection;
};

void append_with_interpolation(ActiveTube& tube, const Detection& det) {
    const TubeEntry last = tube.entries.back();  // copy: push_back may reallocate
    const int gap = det.frame_index - last.frame_index;
    for (int g = 1; g < gap; ++g) {
        const double t = static_cast<double>(g) / gap;
        TubeEntry filled;
        filled.frame_index = last.frame_index + g;
        filled.box = {last.box.x1 + t * (det.box.x1 - last.box.x1),
                      last.box.y1 + t * (det.box.y1 - last.box.y1),
                      last.box.x2 + t * (det.box.x2 - last.box.x2),
                      last.box.y2 + t * (det.box.y2 - last.box.y2)};
        filled.score = last.score + t * (det.score - last.score);
        tube.entries.push_back(filled);
    }
    tube.entries.push_back({det.frame_index, det.box, det.score});
}

double aggregate_score(const std::vector<TubeEntry>& entries, ScoreAggregation mode) {
    if (mode == ScoreAggregation::max) {
        double best = 0.0;
        for (const auto& e : entries) best = std::max(best, e.score);
        return best;
    }
    double sum = 0.0;
    for (const auto& e : entries) sum += e.score;
    return sum / static_cast<double>(entries.size());
}

}  // namespace

std::vector<AgentTube> link_detections(const std::vector<FrameDetections>& frames,
                                       const LinkParams& params) {
    require_valid(params);
    for (std::size_t f = 1; f < frames.size(); ++f)
        if (frames[f].frame_index <= frames[f - 1].frame_index)
            throw ValidationError("link_detections: frames must be sorted by index");

    std::vector<ActiveTube> active;
    std::vector<AgentTube> finished;

    const auto close_tube = [&](ActiveTube&& tube) {
        if (static_cast<int>(tube.entries.size()) < params.min_tube_length) return;
        AgentTube out;
        out.category = tube.category;
        out.entries = std::move(tube.entries);
        out.tube_score = aggregate_score(out.entries, params.score_aggregation);
        finished.push_back(std::move(out));
    };

    for (const auto& frame : frames) {
        const int f = frame.frame_index;

        // Retire tubes that have been unmatched for more than max_gap frames.
        std::vector<ActiveTube> still_active;
        for (auto& tube : active) {
            if (f - tube.last_match_frame > params.max_gap + 1)
                close_tube(std::move(tube));
            else
                still_active.push_back(std::move(tube));
        }
        active = std::move(still_active);

        std::vector<Claim> claims;
        for (std::size_t t = 0; t < active.size(); ++t) {
            const Boxd& last_box = active[t].entries.back().box;
            for (std::size_t d = 0; d < frame.detections.size(); ++d) {
                if (frame.detections[d].category != active[t].category) continue;
                const double overlap = iou(last_box, frame.detections[d].box);
                if (overlap >= params.link_iou_threshold) claims.push_back({overlap, t, d});
            }
        }
        std::stable_sort(claims.begin(), claims.end(), [](const Claim& a, const Claim& b) {
            if (a.iou != b.iou) return a.iou > b.iou;
            if (a.tube != b.tube) return a.tube < b.tube;
            return a.detection < b.detection;
        });

        std::vector<bool> tube_taken(active.size(), false);
        std::vector<bool> det_taken(frame.detections.size(), false);
        for (const Claim& c : claims) {
            if (tube_taken[c.tube] || det_taken[c.detection]) continue;
            tube_taken[c.tube] = true;
            det_taken[c.detection] = true;
            append_with_interpolation(active[c.tube], frame.detections[c.detection]);
            active[c.tube].last_match_frame = f;
        }

        for (std::size_t d = 0; d < frame.detections.size(); ++d) {
            if (det_taken[d]) continue;
            const Detection& det = frame.detections[d];
            ActiveTube fresh;
            fresh.category = det.category;
            fresh.entries.push_back({det.frame_index, det.box, det.score});
            fresh.last_match_frame = f;
            active.push_back(std::move(fresh));
        }
    }

    for (auto& tube : active) close_tube(std::move(tube));

    std::stable_sort(finished.begin(), finished.end(), [](const AgentTube& a, const AgentTube& b) {
        return a.start_frame() < b.start_frame();
    });
    return finished;
}

double tube_iou(const AgentTube& a, const AgentTube& b, TubeIouMode mode) {
    if (a.entries.empty() || b.entries.empty())
        throw ValidationError("tube_iou: empty tube");

    const int inter_lo = std::max(a.start_frame(), b.start_frame());
    const int inter_hi = std::min(a.end_frame(), b.end_frame());

    double sum = 0.0;
    for (int f = inter_lo; f <= inter_hi; ++f) {
        const Boxd& box_a = a.entries[static_cast<std::size_t>(f - a.start_frame())].box;
        const Boxd& box_b = b.entries[static_cast<std::size_t>(f - b.start_frame())].box;
        sum += iou(box_a, box_b);
    }

    if (mode == TubeIouMode::intersection_span) {
        if (inter_hi < inter_lo) return 0.0;
        return sum / static_cast<double>(inter_hi - inter_lo + 1);
    }
    // Union of the two frame spans; frames inside the temporal gap between
    // disjoint tubes belong to neither and are not counted.
    const int union_frames = static_cast<int>(a.entries.size() + b.entries.size()) -
                             std::max(0, inter_hi - inter_lo + 1);
    return sum / static_cast<double>(union_frames);
}

}  // namespace stad
