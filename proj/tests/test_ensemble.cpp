#include "stad/ensemble.hpp"

#include "stad/geometry.hpp"

#include <doctest.h>

#include <map>
#include <random>

#include "stad/errors.hpp"
#include "oracles.hpp"

using namespace stad;

namespace {

BranchOutput branch_of(CategoryId cat, const std::vector<std::pair<int, Boxd>>& boxes) {
    BranchOutput b;
    b.category = cat;
    std::map<int, FrameDetections> by_frame;
    double score = 0.95;
    for (const auto& [frame, box] : boxes) {
        by_frame[frame].frame_index = frame;
        by_frame[frame].detections.push_back({frame, box, cat, score});
        score -= 0.01;
    }
    for (auto& [i, f] : by_frame) b.frames.push_back(std::move(f));
    return b;
}

}  // namespace

TEST_CASE("merge_branches: single branch passes through") {
    const BranchOutput only = branch_of(2, {{0, {0.1, 0.1, 0.2, 0.2}}, {1, {0.3, 0.3, 0.4, 0.4}}});
    const auto merged = merge_branches({only});
    CHECK(merged == only.frames);
}

TEST_CASE("merge_branches: frame union with 3 + 4 detections") {
    const BranchOutput a = branch_of(0, {{0, {0.0, 0.0, 0.1, 0.1}},
                                         {0, {0.2, 0.2, 0.3, 0.3}},
                                         {0, {0.4, 0.4, 0.5, 0.5}}});
    const BranchOutput b = branch_of(1, {{0, {0.1, 0.0, 0.2, 0.1}},
                                         {0, {0.3, 0.2, 0.4, 0.3}},
                                         {0, {0.5, 0.4, 0.6, 0.5}},
                                         {0, {0.7, 0.6, 0.8, 0.7}}});
    const auto merged = merge_branches({a, b});
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].detections.size() == 7);
    // branch-internal ordering preserved, branch a first
    CHECK(merged[0].detections[0].category == 0);
    CHECK(merged[0].detections[3].category == 1);
}

TEST_CASE("merge_branches: grouping the merge by category recovers the branches") {
    std::mt19937_64 rng(71);
    std::vector<BranchOutput> branches;
    for (CategoryId cat = 0; cat < 3; ++cat) {
        std::vector<std::pair<int, Boxd>> boxes;
        const int n = 2 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i)
            boxes.emplace_back(static_cast<int>(rng() % 4), oracles::random_box(rng));
        branches.push_back(branch_of(cat, boxes));
    }
    const auto merged = merge_branches(branches);

    std::size_t merged_count = 0;
    for (const auto& frame : merged) merged_count += frame.detections.size();
    std::size_t input_count = 0;
    for (const auto& b : branches)
        for (const auto& frame : b.frames) input_count += frame.detections.size();
    CHECK(merged_count == input_count);

    for (const auto& original : branches) {
        std::vector<FrameDetections> regrouped;
        for (const auto& frame : merged) {
            FrameDetections filtered;
            filtered.frame_index = frame.frame_index;
            for (const auto& det : frame.detections)
                if (det.category == original.category) filtered.detections.push_back(det);
            if (!filtered.detections.empty()) regrouped.push_back(filtered);
        }
        CHECK(regrouped == original.frames);
    }
}

TEST_CASE("merge_branches rejects duplicates and impure branches") {
    const BranchOutput a = branch_of(0, {{0, {0.1, 0.1, 0.2, 0.2}}});
    CHECK_THROWS_AS((void)merge_branches({a, a}), ValidationError);

    BranchOutput impure = branch_of(1, {{0, {0.1, 0.1, 0.2, 0.2}}});
    impure.frames[0].detections[0].category = 2;
    CHECK_THROWS_AS((void)merge_branches({impure}), ValidationError);
}

TEST_CASE("nms: overlapping duplicate is suppressed, disjoint boxes survive") {
    std::vector<Detection> dets{{0, {0.10, 0.10, 0.50, 0.50}, 0, 0.9},
                                {0, {0.11, 0.11, 0.51, 0.51}, 0, 0.8},
                                {0, {0.70, 0.70, 0.90, 0.90}, 0, 0.5}};
    const auto kept = nms(dets, 0.5);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].score == 0.9);
    CHECK(kept[1].score == 0.5);

    std::vector<Detection> disjoint{{0, {0.0, 0.0, 0.2, 0.2}, 0, 0.3},
                                    {0, {0.5, 0.5, 0.7, 0.7}, 0, 0.9}};
    CHECK(nms(disjoint, 0.5).size() == 2);
}

TEST_CASE("nms: matches the exhaustive reference on 6-box fixtures") {
    std::mt19937_64 rng(72);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Detection> dets;
        std::vector<Boxd> boxes;
        std::vector<double> scores;
        for (int i = 0; i < 6; ++i) {
            const Boxd box = oracles::random_box(rng, 0.0, 0.15);
            const double score = oracles::uniform(rng, 0, 1);
            dets.push_back({0, box, 0, score});
            boxes.push_back(box);
            scores.push_back(score);
        }
        const double threshold = oracles::uniform(rng, 0.2, 0.8);
        const auto kept = nms(dets, threshold);
        const auto expected = oracles::brute_force_nms(boxes, scores, threshold);
        REQUIRE(kept.size() == expected.size());
        for (std::size_t i = 0; i < kept.size(); ++i)
            CHECK(kept[i].box == boxes[expected[i]]);
        // no two survivors overlap at or above the threshold
        for (std::size_t i = 0; i < kept.size(); ++i)
            for (std::size_t j = i + 1; j < kept.size(); ++j)
                CHECK(iou(kept[i].box, kept[j].box) < threshold);
    }
}

TEST_CASE("nms validates threshold and uniformity") {
    std::vector<Detection> dets{{0, {0.1, 0.1, 0.2, 0.2}, 0, 0.5}};
    CHECK_THROWS_AS((void)nms(dets, 0.0), ValidationError);
    CHECK_THROWS_AS((void)nms(dets, 1.5), ValidationError);

    std::vector<Detection> mixed{{0, {0.1, 0.1, 0.2, 0.2}, 0, 0.5},
                                 {1, {0.1, 0.1, 0.2, 0.2}, 0, 0.5}};
    CHECK_THROWS_AS((void)nms(mixed, 0.5), ValidationError);
}

TEST_CASE("training_plan: default confusable group and model sizes") {
    const CategoryTable table({"pedestrian", "car", "small vehicle", "medium vehicle",
                               "large vehicle", "bus", "emergency vehicle"});
    const TrainingPlan plan = training_plan(table);

    CHECK(plan.pretrain.epochs == 30);
    CHECK(plan.pretrain.batch_size == 32);
    CHECK(plan.pretrain.initial_lr == 0.005);
    CHECK(plan.pretrain.optimizer == "SGD");
    CHECK(!plan.pretrain.backbone_frozen);
    CHECK(plan.pretrain.categories.size() == 7);

    REQUIRE(plan.finetune.size() == 7);
    for (const auto& stage : plan.finetune) {
        CHECK(stage.epochs == 20);
        CHECK(stage.batch_size == 32);
        CHECK(stage.initial_lr == 0.0005);
        CHECK(stage.optimizer == "SGD");
        CHECK(stage.backbone_frozen);
        CHECK(stage.augmentations_off_last_epochs == 5);
        CHECK(stage.positive_negative_ratio == 1.0);
        for (CategoryId negative : stage.negative_categories) CHECK(negative != stage.category);
    }

    const auto stage_for = [&](const std::string& name) {
        for (const auto& s : plan.finetune)
            if (s.category_name == name) return s;
        FAIL("missing stage");
        return plan.finetune[0];
    };

    const auto car = stage_for("car");
    CHECK(car.model_size == "x");
    CHECK(car.negative_categories ==
          std::vector<CategoryId>{*table.find("medium vehicle"), *table.find("large vehicle")});

    const auto medium = stage_for("medium vehicle");
    CHECK(medium.model_size == "m");
    CHECK(medium.negative_categories ==
          std::vector<CategoryId>{*table.find("car"), *table.find("large vehicle")});

    const auto pedestrian = stage_for("pedestrian");
    CHECK(pedestrian.model_size == "x");
    CHECK(pedestrian.negative_categories.empty());

    const auto bus = stage_for("bus");
    CHECK(bus.model_size == "m");
    CHECK(bus.negative_categories.empty());
}

TEST_CASE("training_plan: explicit groups and unknown-category error") {
    const CategoryTable table({"car", "bus"});
    const TrainingPlan plan = training_plan(table, {{0, 1}});
    CHECK(plan.finetune[0].negative_categories == std::vector<CategoryId>{1});
    CHECK(plan.finetune[1].negative_categories == std::vector<CategoryId>{0});

    CHECK_THROWS_AS((void)training_plan(table, {{0, 5}}), ValidationError);
}

TEST_CASE("training_plan JSON validates against its schema for any table") {
    std::mt19937_64 rng(73);
    const std::vector<std::vector<std::string>> tables = {
        {"car"},
        {"pedestrian", "car"},
        {"a", "b", "c", "d"},
        {"pedestrian", "car", "small vehicle", "medium vehicle", "large vehicle", "bus",
         "emergency vehicle"},
    };
    for (const auto& names : tables) {
        const TrainingPlan plan = training_plan(CategoryTable(names));
        CHECK_NOTHROW(validate_plan_json(serialize_plan(plan)));
    }

    CHECK_THROWS_AS(validate_plan_json("{}"), ValidationError);
    CHECK_THROWS_AS(validate_plan_json("not json"), ValidationError);

    // corrupted plan: negative set contains the stage's own category
    std::string doc = serialize_plan(training_plan(CategoryTable({"car", "medium vehicle",
                                                                  "large vehicle"})));
    const auto pos = doc.find("\"negative_categories\": [");
    REQUIRE(pos != std::string::npos);
    doc.replace(pos, std::string("\"negative_categories\": [").size(),
                "\"negative_categories\": [0, ");
    CHECK_THROWS_AS(validate_plan_json(doc), ValidationError);
}
