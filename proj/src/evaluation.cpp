#include "stad/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "stad/errors.hpp"

namespace stad {

using json = nlohmann::json;

void require_valid(const EvalConfig& config) {
    if (config.thresholds.empty()) throw ValidationError("eval: no thresholds configured");
    double prev = 0.0;
    for (double t : config.thresholds) {
        if (!(t > 0.0 && t <= 1.0)) throw ValidationError("eval: thresholds must be in (0,1]");
        if (t <= prev) throw ValidationError("eval: thresholds must be strictly increasing");
        prev = t;
    }
}

std::vector<TubeMatch> match_tubes(const std::vector<AgentTube>& gt,
                                   const std::vector<AgentTube>& pred, double threshold,
                                   TubeIouMode mode) {
    std::vector<std::size_t> order(pred.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pred[a].tube_score > pred[b].tube_score;
    });

    std::vector<bool> gt_taken(gt.size(), false);
    std::vector<TubeMatch> matches;
    matches.reserve(pred.size());
    for (const std::size_t p : order) {
        double best_iou = 0.0;
        std::size_t best_gt = gt.size();
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (gt_taken[g] || gt[g].category != pred[p].category) continue;
            const double overlap = tube_iou(gt[g], pred[p], mode);
            if (overlap >= threshold && overlap > best_iou) {
                best_iou = overlap;
                best_gt = g;
            }
        }
        const bool hit = best_gt < gt.size();
        if (hit) gt_taken[best_gt] = true;
        matches.push_back({p, hit});
    }
    return matches;
}

double average_precision(const std::vector<RankedFlag>& ranked, std::int64_t num_gt) {
    if (num_gt < 0) throw ValidationError("average_precision: negative ground-truth count");
    if (num_gt == 0) return ranked.empty() ? 1.0 : 0.0;

    const std::size_t n = ranked.size();
    std::vector<double> precision(n);
    std::int64_t tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (ranked[k].is_true_positive) ++tp;
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    for (std::size_t k = n; k-- > 1;)
        precision[k - 1] = std::max(precision[k - 1], precision[k]);

    double ap = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (ranked[k].is_true_positive) ap += precision[k] / static_cast<double>(num_gt);
    return ap;
}

namespace {

const char* mode_name(TubeIouMode mode) {
    return mode == TubeIouMode::union_span ? "union" : "intersection";
}

std::vector<AgentTube> tubes_of_category(const VideoRecord& record, CategoryId category) {
    std::vector<AgentTube> out;
    for (const auto& tube : record.tubes)
        if (tube.category == category) out.push_back(tube);
    return out;
}

}  // namespace

EvalReport video_map(const std::vector<VideoRecord>& gt, const std::vector<VideoRecord>& pred,
                     const EvalConfig& config, const CategoryTable* categories) {
    require_valid(config);

    EvalReport report;
    report.ap_mode = "all_point";
    report.tube_iou_mode = mode_name(config.tube_iou_mode);
    report.thresholds = config.thresholds;

    std::map<std::string, const VideoRecord*> gt_by_id;
    for (const auto& record : gt)
        if (!gt_by_id.emplace(record.video_id, &record).second)
            throw ValidationError("duplicate ground-truth video_id '" + record.video_id + "'");

    // Evaluation order: ground-truth videos as given, then prediction-only
    // videos (reported; all their tubes are false positives).
    std::vector<std::pair<const VideoRecord*, const VideoRecord*>> videos;  // (gt, pred)
    std::map<std::string, const VideoRecord*> pred_by_id;
    for (const auto& record : pred)
        if (!pred_by_id.emplace(record.video_id, &record).second)
            throw ValidationError("duplicate prediction video_id '" + record.video_id + "'");
    for (const auto& record : gt) {
        auto it = pred_by_id.find(record.video_id);
        videos.emplace_back(&record, it == pred_by_id.end() ? nullptr : it->second);
    }
    for (const auto& record : pred) {
        if (gt_by_id.count(record.video_id)) continue;
        report.warnings.push_back("video '" + record.video_id +
                                  "' has predictions but no ground truth; counted as false positives");
        videos.emplace_back(nullptr, &record);
    }

    std::set<CategoryId> universe;
    for (const auto& [g, p] : videos) {
        if (g)
            for (const auto& tube : g->tubes) universe.insert(tube.category);
        if (p)
            for (const auto& tube : p->tubes) universe.insert(tube.category);
    }
    if (categories)
        for (CategoryId id : universe)
            if (!categories->contains(id))
                throw ValidationError("unknown category id " + std::to_string(id) +
                                      " in evaluation input");

    for (const auto& record : gt) report.total_gt_tubes += static_cast<std::int64_t>(record.tubes.size());
    for (const auto& record : pred) report.total_pred_tubes += static_cast<std::int64_t>(record.tubes.size());

    static const std::vector<AgentTube> kNoTubes;
    for (const double threshold : config.thresholds) {
        ThresholdResult tr;
        tr.threshold = threshold;
        double ap_sum = 0.0;
        int scored = 0;
        for (const CategoryId category : universe) {
            CategoryResult cr;
            cr.category = category;
            if (categories) cr.name = categories->name(category);

            std::vector<RankedFlag> pooled;
            for (const auto& [gv, pv] : videos) {
                const auto gt_tubes = gv ? tubes_of_category(*gv, category) : kNoTubes;
                const auto pred_tubes = pv ? tubes_of_category(*pv, category) : kNoTubes;
                cr.num_gt += static_cast<std::int64_t>(gt_tubes.size());
                cr.num_pred += static_cast<std::int64_t>(pred_tubes.size());
                for (const TubeMatch& m :
                     match_tubes(gt_tubes, pred_tubes, threshold, config.tube_iou_mode)) {
                    pooled.push_back({pred_tubes[m.pred_index].tube_score, m.is_true_positive});
                    if (m.is_true_positive) ++cr.true_positives;
                }
            }
            std::stable_sort(pooled.begin(), pooled.end(),
                             [](const RankedFlag& a, const RankedFlag& b) { return a.score > b.score; });
            cr.ap = average_precision(pooled, cr.num_gt);

            // A category with neither ground truth nor predictions carries
            // no signal and stays out of the mean.
            if (cr.num_gt > 0 || cr.num_pred > 0) {
                ap_sum += cr.ap;
                ++scored;
            }
            tr.categories.push_back(std::move(cr));
        }
        tr.map_percent = scored > 0 ? 100.0 * ap_sum / scored : 0.0;
        report.per_threshold.push_back(std::move(tr));
    }

    double total = 0.0;
    for (const auto& tr : report.per_threshold) total += tr.map_percent;
    report.overall_map_percent =
        report.per_threshold.empty() ? 0.0 : total / static_cast<double>(report.per_threshold.size());
    return report;
}

std::string serialize_report(const EvalReport& report) {
    json j;
    j["ap_mode"] = report.ap_mode;
    j["tube_iou_mode"] = report.tube_iou_mode;
    j["thresholds"] = report.thresholds;
    json per_threshold = json::array();
    for (const auto& tr : report.per_threshold) {
        json cats = json::array();
        for (const auto& cr : tr.categories) {
            json c{{"category", cr.category},
                   {"ap", cr.ap},
                   {"num_gt", cr.num_gt},
                   {"num_pred", cr.num_pred},
                   {"true_positives", cr.true_positives}};
            if (!cr.name.empty()) c["name"] = cr.name;
            cats.push_back(std::move(c));
        }
        per_threshold.push_back(json{{"threshold", tr.threshold},
                                     {"map", tr.map_percent},
                                     {"categories", std::move(cats)}});
    }
    j["per_threshold"] = std::move(per_threshold);
    j["overall_map"] = report.overall_map_percent;
    j["counts"] = json{{"gt_tubes", report.total_gt_tubes}, {"pred_tubes", report.total_pred_tubes}};
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

}  // namespace stad
