#pragma once

#include <string>
#include <vector>

#include "stad/datamodel.hpp"
#include "stad/types.hpp"

namespace stad {

// Per-category branch of the multi-branch detector: every detection carries
// the branch's category.
struct BranchOutput {
    CategoryId category{0};
    std::vector<FrameDetections> frames;
};

// Pure union of the branch outputs per frame; no cross-category suppression,
// branch-internal ordering preserved.
std::vector<FrameDetections> merge_branches(const std::vector<BranchOutput>& branches);

// Greedy score-descending suppression within one frame and category.
std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold);

struct PretrainStage {
    std::vector<CategoryId> categories;  // all of them
    int epochs{30};
    int batch_size{32};
    double initial_lr{0.005};
    std::string optimizer{"SGD"};
    bool backbone_frozen{false};
};

struct FinetuneStage {
    CategoryId category{0};
    std::string category_name;
    std::string model_size;  // "x" for car and pedestrian, "m" otherwise
    int epochs{20};
    int batch_size{32};
    double initial_lr{0.0005};
    std::string optimizer{"SGD"};
    bool backbone_frozen{true};
    std::vector<CategoryId> negative_categories;
    // Unquantified in the source material; tunable knob, defaults to 1.0.
    double positive_negative_ratio{1.0};
    int augmentations_off_last_epochs{5};
};

struct TrainingPlan {
    PretrainStage pretrain;
    std::vector<FinetuneStage> finetune;  // exactly one stage per category
};

// Builds the staged plan: pretrain on everything, then one frozen-backbone
// fine-tune stage per category whose negative set is the rest of its
// confusable group. With no groups given, the {car, medium vehicle,
// large vehicle} group is formed from whichever of those names the table
// defines (two or more needed).
TrainingPlan training_plan(const CategoryTable& categories,
                           const std::vector<std::vector<CategoryId>>& confusable_groups);
TrainingPlan training_plan(const CategoryTable& categories);

std::string serialize_plan(const TrainingPlan& plan);

// Schema/invariant check for an emitted plan document; throws ValidationError.
void validate_plan_json(const std::string& document);

}  // namespace stad
