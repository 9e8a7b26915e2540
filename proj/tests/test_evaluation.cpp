#include "stad/evaluation.hpp"

#include <doctest.h>

#include <map>
#include <set>
#include <random>

#include "stad/errors.hpp"
#include "oracles.hpp"

using namespace stad;

namespace {

AgentTube make_tube(CategoryId cat, int start, int length, const Boxd& box, double score) {
    AgentTube t;
    t.category = cat;
    t.tube_score = score;
    for (int i = 0; i < length; ++i) t.entries.push_back({start + i, box, score});
    return t;
}

VideoRecord record_with(const std::string& id, std::vector<AgentTube> tubes) {
    VideoRecord r;
    r.video_id = id;
    r.image_size = {640, 480};
    r.frame_count = 64;
    r.tubes = std::move(tubes);
    return r;
}

// Independent evaluation pipeline built from the oracle pieces.
std::map<CategoryId, double> oracle_category_aps(const std::vector<VideoRecord>& gt,
                                                 const std::vector<VideoRecord>& pred,
                                                 double threshold) {
    std::set<CategoryId> universe;
    for (const auto& r : gt)
        for (const auto& t : r.tubes) universe.insert(t.category);
    for (const auto& r : pred)
        for (const auto& t : r.tubes) universe.insert(t.category);

    std::map<std::string, const VideoRecord*> pred_by_id;
    for (const auto& r : pred) pred_by_id[r.video_id] = &r;

    std::map<CategoryId, double> aps;
    for (const CategoryId cat : universe) {
        std::vector<std::pair<double, bool>> pooled;
        std::int64_t num_gt = 0;
        for (const auto& gv : gt) {
            std::vector<AgentTube> g, p;
            for (const auto& t : gv.tubes)
                if (t.category == cat) g.push_back(t);
            if (auto it = pred_by_id.find(gv.video_id); it != pred_by_id.end())
                for (const auto& t : it->second->tubes)
                    if (t.category == cat) p.push_back(t);
            num_gt += static_cast<std::int64_t>(g.size());

            const auto match = oracles::brute_force_match(g, p, threshold);
            // pool in score order with stable ties, like the evaluator
            std::vector<std::size_t> order(p.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return p[a].tube_score > p[b].tube_score;
            });
            for (const std::size_t i : order)
                pooled.emplace_back(p[i].tube_score, match.pred_is_tp[i]);
        }
        std::stable_sort(pooled.begin(), pooled.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        aps[cat] = oracles::brute_force_ap(pooled, num_gt);
    }
    return aps;
}

std::vector<VideoRecord> random_eval_pair(std::mt19937_64& rng, int n_videos,
                                          std::vector<VideoRecord>& pred_out) {
    std::vector<VideoRecord> gt;
    pred_out.clear();
    for (int v = 0; v < n_videos; ++v) {
        VideoRecord g = record_with("v" + std::to_string(v), {});
        VideoRecord p = g;
        const int n_gt = static_cast<int>(rng() % 6);
        for (int t = 0; t < n_gt; ++t) {
            const CategoryId cat = static_cast<CategoryId>(rng() % 3);
            const int start = static_cast<int>(rng() % 20);
            const int len = 2 + static_cast<int>(rng() % 10);
            const Boxd box = oracles::random_box(rng, 0.05);
            g.tubes.push_back(make_tube(cat, start, len, box, oracles::uniform(rng, 0, 1)));

            // derived prediction: sometimes matching, sometimes shifted or dropped
            const double fate = oracles::uniform(rng, 0, 1);
            if (fate < 0.25) continue;  // missed
            AgentTube guess = g.tubes.back();
            guess.tube_score = oracles::uniform(rng, 0, 1);
            if (fate < 0.6) {
                // spatial jitter
                const double dx = oracles::uniform(rng, -0.04, 0.04);
                const double dy = oracles::uniform(rng, -0.04, 0.04);
                for (auto& e : guess.entries) {
                    e.box.x1 = std::clamp(e.box.x1 + dx, 0.0, 1.0);
                    e.box.x2 = std::clamp(e.box.x2 + dx, 0.0, 1.0);
                    e.box.y1 = std::clamp(e.box.y1 + dy, 0.0, 1.0);
                    e.box.y2 = std::clamp(e.box.y2 + dy, 0.0, 1.0);
                }
            }
            p.tubes.push_back(guess);
        }
        const int n_spurious = static_cast<int>(rng() % 3);
        for (int s = 0; s < n_spurious; ++s)
            p.tubes.push_back(make_tube(static_cast<CategoryId>(rng() % 3),
                                        static_cast<int>(rng() % 30), 1 + static_cast<int>(rng() % 6),
                                        oracles::random_box(rng, 0.05),
                                        oracles::uniform(rng, 0, 1)));
        gt.push_back(std::move(g));
        pred_out.push_back(std::move(p));
    }
    return gt;
}

}  // namespace

TEST_CASE("match_tubes: identical sets are all true positives") {
    const auto g1 = make_tube(0, 0, 10, {0.1, 0.1, 0.3, 0.3}, 0.9);
    const auto g2 = make_tube(1, 5, 8, {0.5, 0.5, 0.8, 0.8}, 0.7);
    const auto matches = match_tubes({g1, g2}, {g1, g2}, 0.5);
    REQUIRE(matches.size() == 2);
    for (const auto& m : matches) CHECK(m.is_true_positive);
}

TEST_CASE("match_tubes: single-match rule keeps only the higher-scored duplicate") {
    const auto gt = make_tube(0, 0, 10, {0.1, 0.1, 0.3, 0.3}, 1.0);
    auto dup_hi = gt;
    dup_hi.tube_score = 0.9;
    auto dup_lo = gt;
    dup_lo.tube_score = 0.6;
    const auto matches = match_tubes({gt}, {dup_lo, dup_hi}, 0.5);
    REQUIRE(matches.size() == 2);
    // returned in score order: dup_hi first
    CHECK(matches[0].pred_index == 1);
    CHECK(matches[0].is_true_positive);
    CHECK(matches[1].pred_index == 0);
    CHECK(!matches[1].is_true_positive);
}

TEST_CASE("match_tubes: 3 gt / 4 pred fixture equals the brute-force assignment") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<AgentTube> gt, pred;
        for (int i = 0; i < 3; ++i)
            gt.push_back(make_tube(static_cast<CategoryId>(rng() % 2), static_cast<int>(rng() % 6),
                                   3 + static_cast<int>(rng() % 6), oracles::random_box(rng, 0.05),
                                   0.5));
        for (int i = 0; i < 4; ++i) {
            AgentTube p = gt[static_cast<std::size_t>(rng() % 3)];
            p.tube_score = oracles::uniform(rng, 0, 1);
            if (rng() % 2) {
                const double dx = oracles::uniform(rng, -0.1, 0.1);
                for (auto& e : p.entries) {
                    e.box.x1 = std::clamp(e.box.x1 + dx, 0.0, 1.0);
                    e.box.x2 = std::clamp(e.box.x2 + dx, 0.0, 1.0);
                }
            }
            pred.push_back(std::move(p));
        }
        const auto matches = match_tubes(gt, pred, 0.3);
        const auto expected = oracles::brute_force_match(gt, pred, 0.3);
        for (const auto& m : matches)
            CHECK(m.is_true_positive == expected.pred_is_tp[m.pred_index]);
    }
}

TEST_CASE("average_precision: worked examples") {
    CHECK(average_precision({{0.9, true}}, 1) == 1.0);
    CHECK(average_precision({{0.95, false}, {0.90, true}}, 1) == doctest::Approx(0.5));
    CHECK(average_precision({{0.9, true}, {0.8, true}, {0.7, false}}, 2) == doctest::Approx(1.0));
}

TEST_CASE("average_precision: zero ground truth conventions") {
    CHECK(average_precision({}, 0) == 1.0);
    CHECK(average_precision({{0.5, false}}, 0) == 0.0);
}

TEST_CASE("average_precision agrees with the brute-force formula on random rankings") {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = static_cast<int>(rng() % 12);
        std::vector<RankedFlag> ranked;
        std::vector<std::pair<double, bool>> mirror;
        double score = 1.0;
        std::int64_t tp = 0;
        for (int i = 0; i < n; ++i) {
            score -= oracles::uniform(rng, 0.001, 0.05);
            const bool is_tp = rng() % 2 == 0;
            tp += is_tp;
            ranked.push_back({score, is_tp});
            mirror.emplace_back(score, is_tp);
        }
        const std::int64_t num_gt = tp + static_cast<std::int64_t>(rng() % 4);
        if (num_gt == 0) continue;
        CHECK(average_precision(ranked, num_gt) == oracles::brute_force_ap(mirror, num_gt));
    }
}

TEST_CASE("video_map: ground truth as predictions scores 100 everywhere") {
    std::mt19937_64 rng(63);
    std::vector<VideoRecord> gt;
    for (int v = 0; v < 3; ++v) {
        std::vector<AgentTube> tubes;
        for (int t = 0; t < 4; ++t)
            tubes.push_back(make_tube(static_cast<CategoryId>(t % 2), t * 3, 4,
                                      oracles::random_box(rng, 0.05), oracles::uniform(rng, 0.1, 1)));
        gt.push_back(record_with("v" + std::to_string(v), tubes));
    }
    const EvalReport report = video_map(gt, gt, EvalConfig{});
    REQUIRE(report.per_threshold.size() == 3);
    for (const auto& tr : report.per_threshold) CHECK(tr.map_percent == doctest::Approx(100.0));
    CHECK(report.overall_map_percent == doctest::Approx(100.0));
    CHECK(report.total_gt_tubes == 12);
    CHECK(report.total_pred_tubes == 12);
}

TEST_CASE("video_map: empty predictions score 0 with ground truth present") {
    const auto gt = record_with("v0", {make_tube(0, 0, 5, {0.1, 0.1, 0.4, 0.4}, 0.5)});
    const auto empty = record_with("v0", {});
    const EvalReport report = video_map({gt}, {empty}, EvalConfig{});
    for (const auto& tr : report.per_threshold) CHECK(tr.map_percent == 0.0);
    CHECK(report.overall_map_percent == 0.0);
}

TEST_CASE("video_map: hand-computed 2-video 2-category fixture") {
    const Boxd box_a{0.10, 0.10, 0.30, 0.30};
    const Boxd box_b{0.50, 0.50, 0.80, 0.80};
    const Boxd box_c{0.20, 0.60, 0.45, 0.85};
    const Boxd far{0.85, 0.05, 0.99, 0.20};

    // video 1: cat0 gt 10 frames, pred covers 3 (tube IoU 0.3);
    //          cat1 gt 10 frames, pred covers 1 (tube IoU 0.1)
    const auto g1 = make_tube(0, 0, 10, box_a, 0.5);
    auto p1 = make_tube(0, 0, 3, box_a, 0.9);
    const auto g2 = make_tube(1, 0, 10, box_b, 0.5);
    auto p2 = make_tube(1, 0, 1, box_b, 0.8);

    // video 2: cat0 gt matched perfectly plus one far false positive; cat1 missed
    const auto g3 = make_tube(0, 2, 10, box_c, 0.5);
    auto p3 = g3;
    p3.tube_score = 0.7;
    const auto p4 = make_tube(0, 0, 10, far, 0.95);
    const auto g4 = make_tube(1, 0, 6, box_b, 0.5);

    const std::vector<VideoRecord> gt{record_with("v1", {g1, g2}), record_with("v2", {g3, g4})};
    const std::vector<VideoRecord> pred{record_with("v1", {p1, p2}),
                                        record_with("v2", {p3, p4})};

    const EvalReport report = video_map(gt, pred, EvalConfig{});
    REQUIRE(report.per_threshold.size() == 3);

    // cat0 APs: 2/3, 2/3, 1/6; cat1 APs: 1/2, 0, 0 (worked by hand)
    CHECK(report.per_threshold[0].map_percent == doctest::Approx(100.0 * (2.0 / 3 + 0.5) / 2));
    CHECK(report.per_threshold[1].map_percent == doctest::Approx(100.0 * (2.0 / 3 + 0.0) / 2));
    CHECK(report.per_threshold[2].map_percent == doctest::Approx(100.0 * (1.0 / 6 + 0.0) / 2));

    // monotone non-increasing in threshold
    CHECK(report.per_threshold[0].map_percent >= report.per_threshold[1].map_percent);
    CHECK(report.per_threshold[1].map_percent >= report.per_threshold[2].map_percent);

    const double mean = (report.per_threshold[0].map_percent + report.per_threshold[1].map_percent +
                         report.per_threshold[2].map_percent) /
                        3.0;
    CHECK(report.overall_map_percent == doctest::Approx(mean));
}

TEST_CASE("video_map equals the independent oracle on 50 random videos") {
    std::mt19937_64 rng(64);
    std::vector<VideoRecord> pred;
    const std::vector<VideoRecord> gt = random_eval_pair(rng, 50, pred);

    EvalConfig config;
    const EvalReport report = video_map(gt, pred, config);
    for (std::size_t ti = 0; ti < config.thresholds.size(); ++ti) {
        const auto oracle = oracle_category_aps(gt, pred, config.thresholds[ti]);
        const auto& tr = report.per_threshold[ti];
        REQUIRE(tr.categories.size() == oracle.size());
        double ap_sum = 0.0;
        int scored = 0;
        for (const auto& cr : tr.categories) {
            REQUIRE(oracle.count(cr.category) == 1);
            CHECK(cr.ap == oracle.at(cr.category));  // exact agreement
            if (cr.num_gt > 0 || cr.num_pred > 0) {
                ap_sum += cr.ap;
                ++scored;
            }
        }
        CHECK(tr.map_percent == doctest::Approx(100.0 * ap_sum / scored).epsilon(1e-12));
    }

    // mAP monotone non-increasing in threshold
    for (std::size_t ti = 1; ti < report.per_threshold.size(); ++ti)
        CHECK(report.per_threshold[ti].map_percent <=
              report.per_threshold[ti - 1].map_percent + 1e-12);
}

TEST_CASE("video_map: prediction-only videos are reported and all-FP") {
    const auto gt = record_with("a", {make_tube(0, 0, 5, {0.1, 0.1, 0.4, 0.4}, 0.5)});
    const auto stray = record_with("ghost", {make_tube(0, 0, 5, {0.1, 0.1, 0.4, 0.4}, 0.9)});
    auto matching = gt;
    const EvalReport report = video_map({gt}, {matching, stray}, EvalConfig{});
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("ghost") != std::string::npos);
    // the stray prediction outranks the true one and costs precision
    CHECK(report.per_threshold[0].map_percent < 100.0);
    CHECK(report.per_threshold[0].map_percent > 0.0);
}

TEST_CASE("equal-score ties follow stable input order and keep AP unchanged") {
    const auto gt = make_tube(0, 0, 10, {0.1, 0.1, 0.3, 0.3}, 1.0);
    auto near = gt;
    near.tube_score = 0.5;
    auto also_near = make_tube(0, 0, 8, {0.1, 0.1, 0.3, 0.3}, 0.5);

    // both predictions clear the threshold on the same single GT tube; the
    // first one in input order wins the match
    const auto ab = match_tubes({gt}, {near, also_near}, 0.5);
    CHECK(ab[0].pred_index == 0);
    CHECK(ab[0].is_true_positive);
    CHECK(!ab[1].is_true_positive);
    const auto ba = match_tubes({gt}, {also_near, near}, 0.5);
    CHECK(ba[0].pred_index == 0);
    CHECK(ba[0].is_true_positive);

    // either way one TP leads the ranking, so the AP is permutation-invariant
    const auto ap_of = [&](const std::vector<AgentTube>& preds) {
        std::vector<RankedFlag> flags;
        for (const auto& m : match_tubes({gt}, preds, 0.5))
            flags.push_back({preds[m.pred_index].tube_score, m.is_true_positive});
        return average_precision(flags, 1);
    };
    CHECK(ap_of({near, also_near}) == ap_of({also_near, near}));
}

TEST_CASE("video_map validates config and duplicate ids") {
    EvalConfig bad;
    bad.thresholds = {0.5, 0.2};
    CHECK_THROWS_AS((void)video_map({}, {}, bad), ValidationError);

    const auto r = record_with("dup", {});
    CHECK_THROWS_AS((void)video_map({r, r}, {}, EvalConfig{}), ValidationError);
}

TEST_CASE("serialize_report emits the documented fields") {
    const auto gt = record_with("v0", {make_tube(0, 0, 5, {0.1, 0.1, 0.4, 0.4}, 0.5)});
    const EvalReport report = video_map({gt}, {gt}, EvalConfig{});
    const std::string doc = serialize_report(report);
    for (const char* key : {"\"ap_mode\"", "\"tube_iou_mode\"", "\"thresholds\"",
                            "\"per_threshold\"", "\"overall_map\"", "\"counts\""})
        CHECK(doc.find(key) != std::string::npos);
    CHECK(doc.find("all_point") != std::string::npos);
}
