#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stad/datamodel.hpp"
#include "stad/tubes.hpp"

namespace stad {

enum class ApMode { all_point };

struct EvalConfig {
    std::vector<double> thresholds{0.1, 0.2, 0.5};
    ApMode ap_mode{ApMode::all_point};
    TubeIouMode tube_iou_mode{TubeIouMode::union_span};
};

void require_valid(const EvalConfig& config);

struct TubeMatch {
    std::size_t pred_index;  // index into the input prediction list
    bool is_true_positive;
};

// Score-descending greedy matching (stable on ties): each prediction takes
// the unmatched same-category GT tube of highest tube IoU >= threshold;
// everything else is a false positive.
std::vector<TubeMatch> match_tubes(const std::vector<AgentTube>& gt,
                                   const std::vector<AgentTube>& pred, double threshold,
                                   TubeIouMode mode = TubeIouMode::union_span);

struct RankedFlag {
    double score;
    bool is_true_positive;
};

// All-point interpolated area under the precision-recall curve. `ranked`
// must already be sorted by score descending. With no ground truth the AP is
// 0 if any prediction exists, 1 otherwise (callers drop such categories from
// the mean).
double average_precision(const std::vector<RankedFlag>& ranked, std::int64_t num_gt);

struct CategoryResult {
    CategoryId category{0};
    std::string name;  // empty when no category table was supplied
    double ap{0.0};    // in [0,1]
    std::int64_t num_gt{0};
    std::int64_t num_pred{0};
    std::int64_t true_positives{0};
};

struct ThresholdResult {
    double threshold{0.0};
    double map_percent{0.0};  // 100 * mean AP over scored categories
    std::vector<CategoryResult> categories;
};

struct EvalReport {
    std::string ap_mode{"all_point"};
    std::string tube_iou_mode{"union"};
    std::vector<double> thresholds;
    std::vector<ThresholdResult> per_threshold;
    double overall_map_percent{0.0};  // mean of per-threshold mAPs
    std::int64_t total_gt_tubes{0};
    std::int64_t total_pred_tubes{0};
    std::vector<std::string> warnings;
};

// Tube video-mAP: per category, tubes are matched per video and pooled
// across videos before the AP computation; per-threshold mAP averages the
// scored categories and the overall number averages the thresholds.
EvalReport video_map(const std::vector<VideoRecord>& gt, const std::vector<VideoRecord>& pred,
                     const EvalConfig& config, const CategoryTable* categories = nullptr);

std::string serialize_report(const EvalReport& report);

}  // namespace stad
