#include "stad/ensemble.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "stad/errors.hpp"
#include "stad/geometry.hpp"

namespace stad {

using json = nlohmann::json;

std::vector<FrameDetections> merge_branches(const std::vector<BranchOutput>& branches) {
    std::set<CategoryId> seen;
    for (const auto& branch : branches) {
        if (!seen.insert(branch.category).second)
            throw ValidationError("merge_branches: duplicate branch category " +
                                  std::to_string(branch.category));
        for (const auto& frame : branch.frames)
            for (const auto& det : frame.detections)
                if (det.category != branch.category)
                    throw ValidationError(
                        "merge_branches: branch " + std::to_string(branch.category) +
                        " contains a detection of category " + std::to_string(det.category));
    }

    std::map<int, FrameDetections> merged;
    for (const auto& branch : branches) {
        for (const auto& frame : branch.frames) {
            FrameDetections& out = merged[frame.frame_index];
            out.frame_index = frame.frame_index;
            out.detections.insert(out.detections.end(), frame.detections.begin(),
                                  frame.detections.end());
        }
    }

    std::vector<FrameDetections> result;
    result.reserve(merged.size());
    for (auto& [index, frame] : merged) result.push_back(std::move(frame));
    return result;
}

std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw ValidationError("nms: iou threshold must be in (0,1]");
    for (std::size_t i = 1; i < detections.size(); ++i)
        if (detections[i].frame_index != detections[0].frame_index ||
            detections[i].category != detections[0].category)
            throw ValidationError("nms: expects a single frame and a single category per call");

    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].score > detections[b].score;
    });

    std::vector<Detection> kept;
    for (const std::size_t i : order) {
        bool suppressed = false;
        for (const Detection& k : kept)
            if (iou(detections[i].box, k.box) >= iou_threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(detections[i]);
    }
    return kept;
}

namespace {

std::string size_for(const std::string& name) {
    return (name == "car" || name == "pedestrian") ? "x" : "m";
}

}  // namespace

TrainingPlan training_plan(const CategoryTable& categories,
                           const std::vector<std::vector<CategoryId>>& confusable_groups) {
    for (const auto& group : confusable_groups)
        for (const CategoryId id : group)
            if (!categories.contains(id))
                throw ValidationError("training_plan: confusable group references unknown category " +
                                      std::to_string(id));

    TrainingPlan plan;
    for (CategoryId id = 0; id < categories.size(); ++id)
        plan.pretrain.categories.push_back(id);

    for (CategoryId id = 0; id < categories.size(); ++id) {
        FinetuneStage stage;
        stage.category = id;
        stage.category_name = categories.name(id);
        stage.model_size = size_for(stage.category_name);
        std::set<CategoryId> negatives;
        for (const auto& group : confusable_groups)
            if (std::find(group.begin(), group.end(), id) != group.end())
                for (const CategoryId other : group)
                    if (other != id) negatives.insert(other);
        stage.negative_categories.assign(negatives.begin(), negatives.end());
        plan.finetune.push_back(std::move(stage));
    }
    return plan;
}

TrainingPlan training_plan(const CategoryTable& categories) {
    std::vector<CategoryId> group;
    for (const char* name : {"car", "medium vehicle", "large vehicle"})
        if (auto id = categories.find(name)) group.push_back(*id);
    std::vector<std::vector<CategoryId>> groups;
    if (group.size() >= 2) groups.push_back(std::move(group));
    return training_plan(categories, groups);
}

std::string serialize_plan(const TrainingPlan& plan) {
    json j;
    j["pretrain"] = json{{"categories", plan.pretrain.categories},
                         {"epochs", plan.pretrain.epochs},
                         {"batch_size", plan.pretrain.batch_size},
                         {"initial_lr", plan.pretrain.initial_lr},
                         {"optimizer", plan.pretrain.optimizer},
                         {"backbone_frozen", plan.pretrain.backbone_frozen}};
    json stages = json::array();
    for (const auto& s : plan.finetune)
        stages.push_back(json{{"category", s.category},
                              {"name", s.category_name},
                              {"model_size", s.model_size},
                              {"epochs", s.epochs},
                              {"batch_size", s.batch_size},
                              {"initial_lr", s.initial_lr},
                              {"optimizer", s.optimizer},
                              {"backbone_frozen", s.backbone_frozen},
                              {"negative_categories", s.negative_categories},
                              {"positive_negative_ratio", s.positive_negative_ratio},
                              {"augmentations_off_last_epochs", s.augmentations_off_last_epochs}});
    j["finetune"] = std::move(stages);
    return j.dump(2) + "\n";
}

void validate_plan_json(const std::string& document) {
    json j = json::parse(document, nullptr, false);
    if (j.is_discarded()) throw ValidationError("plan: malformed JSON");

    if (!j.contains("pretrain") || !j["pretrain"].is_object())
        throw ValidationError("plan: missing pretrain stage");
    const json& pre = j["pretrain"];
    for (const char* key : {"categories", "epochs", "batch_size", "initial_lr", "optimizer",
                            "backbone_frozen"})
        if (!pre.contains(key)) throw ValidationError(std::string("plan: pretrain missing '") + key + "'");
    if (!pre["epochs"].is_number_integer() || pre["epochs"].get<int>() < 1)
        throw ValidationError("plan: pretrain.epochs must be a positive integer");
    if (!pre["backbone_frozen"].is_boolean() || pre["backbone_frozen"].get<bool>())
        throw ValidationError("plan: pretrain must not freeze the backbone");

    if (!j.contains("finetune") || !j["finetune"].is_array())
        throw ValidationError("plan: missing finetune stages");
    std::set<int> seen;
    for (std::size_t i = 0; i < j["finetune"].size(); ++i) {
        const json& s = j["finetune"][i];
        const std::string path = "plan: finetune[" + std::to_string(i) + "]";
        for (const char* key :
             {"category", "name", "model_size", "epochs", "batch_size", "initial_lr", "optimizer",
              "backbone_frozen", "negative_categories", "positive_negative_ratio",
              "augmentations_off_last_epochs"})
            if (!s.contains(key)) throw ValidationError(path + " missing '" + key + "'");
        const int category = s["category"].get<int>();
        if (!seen.insert(category).second)
            throw ValidationError(path + ": category " + std::to_string(category) +
                                  " has more than one finetune stage");
        if (!s["backbone_frozen"].get<bool>())
            throw ValidationError(path + ": finetune must freeze the backbone");
        const std::string size = s["model_size"].get<std::string>();
        if (size != "x" && size != "m") throw ValidationError(path + ": model_size must be 'x' or 'm'");
        for (const auto& negative : s["negative_categories"])
            if (negative.get<int>() == category)
                throw ValidationError(path + ": negative_categories contains the stage's own category");
        if (!(s["positive_negative_ratio"].is_number() &&
              s["positive_negative_ratio"].get<double>() > 0.0))
            throw ValidationError(path + ": positive_negative_ratio must be positive");
    }
}

}  // namespace stad
