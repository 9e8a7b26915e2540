#pragma once

#include <vector>

#include "stad/datamodel.hpp"
#include "stad/types.hpp"

namespace stad {

enum class ScoreAggregation { mean, max };

// Span normalization for tube overlap: `union_span` divides the per-frame
// IoU sum by the union of the two frame spans (the default convention);
// `intersection_span` divides by the overlapping span only.
enum class TubeIouMode { union_span, intersection_span };

struct LinkParams {
    double link_iou_threshold{0.5};   // min IoU for a tube to claim a detection
    int max_gap{0};                   // frames a tube survives without a match
    int min_tube_length{1};           // shorter tubes are discarded
    ScoreAggregation score_aggregation{ScoreAggregation::mean};
};

void require_valid(const LinkParams& params);

// Greedy online linker: per frame, active tubes claim same-category
// detections in descending IoU order (each detection at most once, claims
// need IoU >= threshold); unclaimed detections start tubes; tubes unmatched
// for more than max_gap frames close. Bridged gaps are filled by linear box
// interpolation, so every output tube is contiguous.
std::vector<AgentTube> link_detections(const std::vector<FrameDetections>& frames,
                                       const LinkParams& params);

// Spatiotemporal overlap: sum of per-frame box IoUs over the normalizing
// span, where a frame covered by only one tube contributes 0.
double tube_iou(const AgentTube& a, const AgentTube& b,
                TubeIouMode mode = TubeIouMode::union_span);

}  // namespace stad
