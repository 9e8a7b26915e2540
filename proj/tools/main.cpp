// stad: batch CLI for the spatiotemporal agent-detection toolkit.
//
// Subcommands: enhance, augment, link, merge, eval, plan, stats, fuse-demo,
// geom, synth. Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stad/augment.hpp"
#include "stad/datamodel.hpp"
#include "stad/enhance.hpp"
#include "stad/ensemble.hpp"
#include "stad/errors.hpp"
#include "stad/evaluation.hpp"
#include "stad/fsio.hpp"
#include "stad/fusionnet.hpp"
#include "stad/geometry.hpp"
#include "stad/imageio.hpp"
#include "stad/rng.hpp"
#include "stad/tubes.hpp"
#include "stad/weights_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace stad;

namespace {

std::vector<double> parse_csv_doubles(const std::string& text, std::size_t expect = 0) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ValidationError("cannot parse number '" + item + "' in '" + text + "'");
        }
    }
    if (expect && values.size() != expect)
        throw ValidationError("expected " + std::to_string(expect) + " comma-separated values in '" +
                              text + "'");
    return values;
}

Boxd parse_box_arg(const std::string& text) {
    const auto v = parse_csv_doubles(text, 4);
    Boxd box{v[0], v[1], v[2], v[3]};
    if (!box_valid(box)) throw ValidationError("invalid box '" + text + "'");
    return box;
}

// Expands files and directories (all *.json inside, sorted) to a flat list.
std::vector<fs::path> expand_json_inputs(const std::vector<std::string>& paths) {
    std::vector<fs::path> files;
    for (const auto& p : paths) {
        const fs::path path(p);
        if (fs::is_directory(path)) {
            std::vector<fs::path> inside;
            for (const auto& entry : fs::directory_iterator(path))
                if (entry.is_regular_file() && entry.path().extension() == ".json")
                    inside.push_back(entry.path());
            std::sort(inside.begin(), inside.end());
            files.insert(files.end(), inside.begin(), inside.end());
        } else if (fs::exists(path)) {
            files.push_back(path);
        } else {
            throw IoError("input '" + p + "' does not exist");
        }
    }
    return files;
}

std::vector<fs::path> png_files_in(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

// Runs fn(i) for i in [0, n) on `jobs` workers; outputs must not overlap.
template <typename Fn>
void parallel_files(std::size_t n, int jobs, Fn&& fn) {
    if (jobs < 1) throw ValidationError("--jobs must be at least 1");
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

CategoryTable load_categories(const std::string& path) {
    return parse_categories(read_text_file(path));
}

// ---------------------------------------------------------------- annotated
// PNG + JSON sidecar pairs used by `augment`.

fs::path sidecar_for(const fs::path& image_path) {
    fs::path p = image_path;
    p.replace_extension(".json");
    return p;
}

AnnotatedImaged load_annotated(const fs::path& image_path) {
    AnnotatedImaged out;
    out.image = read_png(image_path);
    const fs::path sidecar = sidecar_for(image_path);
    if (!fs::exists(sidecar)) return out;  // unannotated image

    json j = json::parse(read_text_file(sidecar), nullptr, false);
    if (j.is_discarded())
        throw ValidationError("malformed JSON sidecar '" + sidecar.string() + "'");
    if (!j.contains("boxes") || !j["boxes"].is_array())
        throw ValidationError(sidecar.string() + ": missing 'boxes' array");
    for (std::size_t i = 0; i < j["boxes"].size(); ++i) {
        const json& b = j["boxes"][i];
        const std::string path = sidecar.string() + ": boxes[" + std::to_string(i) + "]";
        if (!b.contains("box") || !b["box"].is_array() || b["box"].size() != 4)
            throw ValidationError(path + ": expected box [x1,y1,x2,y2]");
        Boxd box{b["box"][0].get<double>(), b["box"][1].get<double>(), b["box"][2].get<double>(),
                 b["box"][3].get<double>()};
        if (!box_clamp_to_unit(box, 1e-6) || box.x1 > box.x2 || box.y1 > box.y2)
            throw ValidationError(path + ": invalid box coordinates");
        if (!b.contains("category") || !b["category"].is_number_integer())
            throw ValidationError(path + ": missing integer category");
        out.boxes.push_back({box, b["category"].get<int>()});
    }
    return out;
}

void store_annotated(const fs::path& image_path, const AnnotatedImaged& annotated) {
    write_png(image_path, annotated.image);
    json boxes = json::array();
    for (const auto& lb : annotated.boxes)
        boxes.push_back(json{{"box", {lb.box.x1, lb.box.y1, lb.box.x2, lb.box.y2}},
                             {"category", lb.category}});
    json j{{"image_size", {{"width", annotated.image.width}, {"height", annotated.image.height}}},
           {"boxes", std::move(boxes)}};
    write_text_file_atomic(sidecar_for(image_path), j.dump(2) + "\n");
}

// ------------------------------------------------------------------- geom

struct GeomOpts {
    std::string pred, gt;
    int width = 1, height = 1;
    std::string convention = "normalized";
    bool grad = false;
};

int run_geom(const GeomOpts& o) {
    const Boxd pred = parse_box_arg(o.pred);
    const Boxd gt = parse_box_arg(o.gt);
    const ImageSize size{o.width, o.height};
    const MpdConvention conv =
        o.convention == "pixel" ? MpdConvention::pixel : MpdConvention::normalized;

    const auto r = mpd_iou(pred, gt, size, conv);
    json j{{"iou", r.iou},
           {"d1_sq", r.d1_sq},
           {"d2_sq", r.d2_sq},
           {"denominator", r.denominator},
           {"mpdiou", r.mpdiou},
           {"loss", 1.0 - r.mpdiou},
           {"convention", o.convention}};
    if (o.grad) {
        const auto g = mpd_iou_grad(pred, gt, size, conv, GradientPolicy::subgradient);
        j["grad"] = {g[0], g[1], g[2], g[3]};
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- enhance

struct EnhanceOpts {
    double gamma = 2.0;
    std::string in_dir, out_dir;
    std::string method = "gamma";
    int jobs = 1;
};

int run_enhance(const EnhanceOpts& o) {
    const auto files = png_files_in(o.in_dir);
    fs::create_directories(o.out_dir);
    const GammaParamsd params{o.gamma};
    if (o.method != "gamma" && o.method != "histeq")
        throw ValidationError("--method must be gamma or histeq");
    if (!(o.gamma > 0.0)) throw ValidationError("--gamma must be positive");

    parallel_files(files.size(), o.jobs, [&](std::size_t i) {
        const Rasterd image = read_png(files[i]);
        const Rasterd enhanced =
            o.method == "gamma" ? gamma_correct(image, params) : hist_equalize(image);
        write_png(fs::path(o.out_dir) / files[i].filename(), enhanced);
    });
    std::cout << "enhanced " << files.size() << " image(s) -> " << o.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------- augment

struct AugmentOpts {
    std::string op;
    std::vector<std::string> inputs;
    std::string source, target, out;
    std::string select;
    double lambda = 0.5;
    double center_x = 0.5, center_y = 0.5;
    double min_visible = 0.25;
    int width = 0, height = 0;
    std::uint64_t seed = 0;
};

int run_augment(const AugmentOpts& o) {
    AnnotatedImaged result;
    if (o.op == "mosaic") {
        if (o.inputs.size() != 4)
            throw ValidationError("mosaic needs --inputs with exactly 4 images");
        std::vector<AnnotatedImaged> inputs;
        for (const auto& p : o.inputs) inputs.push_back(load_annotated(p));
        MosaicParams params;
        params.output_size = {o.width ? o.width : inputs[0].image.width * 2,
                              o.height ? o.height : inputs[0].image.height * 2};
        params.center_x = o.center_x;
        params.center_y = o.center_y;
        params.min_visible_fraction = o.min_visible;
        result = mosaic(inputs, params);
    } else if (o.op == "mixup") {
        if (o.inputs.size() != 2) throw ValidationError("mixup needs --inputs with exactly 2 images");
        result = mixup(load_annotated(o.inputs[0]), load_annotated(o.inputs[1]), o.lambda);
    } else if (o.op == "copypaste") {
        if (o.source.empty() || o.target.empty())
            throw ValidationError("copypaste needs --source and --target");
        std::vector<std::size_t> selection;
        if (!o.select.empty())
            for (double v : parse_csv_doubles(o.select))
                selection.push_back(static_cast<std::size_t>(v));
        result = copy_paste(load_annotated(o.source), load_annotated(o.target), selection, o.seed);
    } else {
        throw ValidationError("unknown --op '" + o.op + "' (mosaic|mixup|copypaste)");
    }
    store_annotated(o.out, result);
    std::cout << "wrote " << o.out << " with " << result.boxes.size() << " box(es)\n";
    return 0;
}

// ------------------------------------------------------------------- link

struct LinkOpts {
    std::string in_path, out_path;
    double iou_threshold = 0.5;
    int max_gap = 0;
    int min_len = 1;
    std::string score_agg = "mean";
    int jobs = 1;
};

int run_link(const LinkOpts& o) {
    LinkParams params;
    params.link_iou_threshold = o.iou_threshold;
    params.max_gap = o.max_gap;
    params.min_tube_length = o.min_len;
    if (o.score_agg == "max")
        params.score_aggregation = ScoreAggregation::max;
    else if (o.score_agg != "mean")
        throw ValidationError("--score-agg must be mean or max");
    require_valid(params);

    const auto link_one = [&](const fs::path& in_file, const fs::path& out_file) {
        const VideoRecord record = parse_detections(read_text_file(in_file));
        VideoRecord out;
        out.video_id = record.video_id;
        out.image_size = record.image_size;
        out.frame_count = record.frame_count;
        out.tubes = link_detections(record.frames, params);
        write_text_file_atomic(out_file, serialize_tubes(out));
    };

    if (fs::is_directory(o.in_path)) {
        const auto files = expand_json_inputs({o.in_path});
        fs::create_directories(o.out_path);
        parallel_files(files.size(), o.jobs, [&](std::size_t i) {
            link_one(files[i], fs::path(o.out_path) / files[i].filename());
        });
        std::cout << "linked " << files.size() << " video(s) -> " << o.out_path << "\n";
    } else {
        link_one(o.in_path, o.out_path);
        std::cout << "linked " << o.in_path << " -> " << o.out_path << "\n";
    }
    return 0;
}

// ------------------------------------------------------------------ merge

struct MergeOpts {
    std::vector<std::string> branches;
    double nms_iou = 0.0;  // 0 disables NMS
    std::string out;
};

int run_merge(const MergeOpts& o) {
    if (o.branches.empty()) throw ValidationError("merge needs --branches");
    std::vector<BranchOutput> branches;
    std::string video_id;
    ImageSize size{};
    int frame_count = 0;
    for (std::size_t b = 0; b < o.branches.size(); ++b) {
        const VideoRecord record = parse_detections(read_text_file(o.branches[b]));
        if (b == 0) {
            video_id = record.video_id;
            size = record.image_size;
            frame_count = record.frame_count;
        } else if (record.video_id != video_id || !(record.image_size == size) ||
                   record.frame_count != frame_count) {
            throw ValidationError("branch '" + o.branches[b] +
                                  "' belongs to a different video than the first branch");
        }
        BranchOutput branch;
        branch.category = -1;
        for (const auto& frame : record.frames)
            for (const auto& det : frame.detections) {
                if (branch.category == -1) branch.category = det.category;
                if (det.category != branch.category)
                    throw ValidationError("branch '" + o.branches[b] +
                                          "' mixes categories " + std::to_string(branch.category) +
                                          " and " + std::to_string(det.category));
            }
        if (branch.category == -1)
            throw ValidationError("branch '" + o.branches[b] + "' contains no detections");
        branch.frames = record.frames;
        branches.push_back(std::move(branch));
    }

    VideoRecord merged;
    merged.video_id = video_id;
    merged.image_size = size;
    merged.frame_count = frame_count;
    merged.frames = merge_branches(branches);

    if (o.nms_iou > 0.0) {
        for (auto& frame : merged.frames) {
            std::map<CategoryId, std::vector<Detection>> per_category;
            std::vector<CategoryId> order;
            for (const auto& det : frame.detections) {
                if (!per_category.count(det.category)) order.push_back(det.category);
                per_category[det.category].push_back(det);
            }
            frame.detections.clear();
            for (const CategoryId cat : order) {
                const auto kept = nms(per_category[cat], o.nms_iou);
                frame.detections.insert(frame.detections.end(), kept.begin(), kept.end());
            }
        }
    }
    write_text_file_atomic(o.out, serialize_detections(merged));
    std::cout << "merged " << branches.size() << " branch(es) -> " << o.out << "\n";
    return 0;
}

// ------------------------------------------------------------------- eval

struct EvalOpts {
    std::vector<std::string> gt, pred;
    std::string thresholds = "0.1,0.2,0.5";
    std::string tube_iou_mode = "union";
    std::string categories_path;
    std::string report_path;
};

int run_eval(const EvalOpts& o) {
    EvalConfig config;
    config.thresholds = parse_csv_doubles(o.thresholds);
    if (o.tube_iou_mode == "intersection")
        config.tube_iou_mode = TubeIouMode::intersection_span;
    else if (o.tube_iou_mode != "union")
        throw ValidationError("--tube-iou must be union or intersection");

    CategoryTable table;
    const CategoryTable* table_ptr = nullptr;
    if (!o.categories_path.empty()) {
        table = load_categories(o.categories_path);
        table_ptr = &table;
    }

    std::vector<VideoRecord> gt, pred;
    for (const auto& file : expand_json_inputs(o.gt))
        gt.push_back(parse_tubes(read_text_file(file), table_ptr));
    for (const auto& file : expand_json_inputs(o.pred))
        pred.push_back(parse_tubes(read_text_file(file), table_ptr));

    const EvalReport report = video_map(gt, pred, config, table_ptr);
    for (const auto& tr : report.per_threshold) {
        std::ostringstream line;
        line << "Agent@" << tr.threshold << ": " << tr.map_percent;
        std::cout << line.str() << "\n";
    }
    std::cout << "Average: " << report.overall_map_percent << "\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

    if (!o.report_path.empty())
        write_text_file_atomic(o.report_path, serialize_report(report));
    return 0;
}

// ------------------------------------------------------------------- plan

struct PlanOpts {
    std::string categories_path;
    std::string out;
    std::vector<std::string> groups;
};

int run_plan(const PlanOpts& o) {
    const CategoryTable table = load_categories(o.categories_path);
    TrainingPlan plan;
    if (o.groups.empty()) {
        plan = training_plan(table);
    } else {
        std::vector<std::vector<CategoryId>> groups;
        for (const auto& group_arg : o.groups) {
            std::vector<CategoryId> group;
            std::stringstream ss(group_arg);
            std::string name;
            while (std::getline(ss, name, ',')) {
                const auto id = table.find(name);
                if (!id) throw ValidationError("--group references unknown category '" + name + "'");
                group.push_back(*id);
            }
            groups.push_back(std::move(group));
        }
        plan = training_plan(table, groups);
    }
    const std::string doc = serialize_plan(plan);
    validate_plan_json(doc);
    write_text_file_atomic(o.out, doc);
    std::cout << "wrote training plan for " << plan.finetune.size() << " categories -> " << o.out
              << "\n";
    return 0;
}

// ------------------------------------------------------------------ stats

struct StatsOpts {
    std::vector<std::string> inputs;
    std::string categories_path;
    std::string out;
};

int run_stats(const StatsOpts& o) {
    CategoryTable table;
    const CategoryTable* table_ptr = nullptr;
    if (!o.categories_path.empty()) {
        table = load_categories(o.categories_path);
        table_ptr = &table;
    }

    std::vector<VideoRecord> records;
    for (const auto& file : expand_json_inputs(o.inputs)) {
        const std::string text = read_text_file(file);
        const json probe = json::parse(text, nullptr, false);
        if (probe.is_discarded())
            throw ValidationError("malformed JSON in '" + file.string() + "'");
        if (probe.contains("tubes"))
            records.push_back(parse_tubes(text, table_ptr));
        else
            records.push_back(parse_detections(text, table_ptr));
    }

    const auto counts = category_stats(records);
    json rows = json::array();
    std::int64_t total = 0;
    for (const auto& [category, count] : counts) {
        json row{{"category", category}, {"count", count}};
        if (table_ptr) row["name"] = table.name(category);
        rows.push_back(std::move(row));
        total += count;
    }
    const json j{{"counts", std::move(rows)}, {"total", total}};
    const std::string doc = j.dump(2) + "\n";
    if (o.out.empty())
        std::cout << doc;
    else
        write_text_file_atomic(o.out, doc);
    return 0;
}

// -------------------------------------------------------------- fuse-demo

struct FuseDemoOpts {
    std::string shape = "8,16,16";
    std::string weights_path;
    std::int64_t random_weights_seed = -1;
    std::uint64_t input_seed = 0;
};

Tensord demo_tensor(std::vector<int> shape, std::mt19937_64& rng) {
    Tensord t(std::move(shape));
    for (Eigen::Index i = 0; i < t.data.size(); ++i)
        t.data[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return t;
}

json tensor_checksums(const Tensord& t) {
    return json{{"shape", t.shape},
                {"sum", t.data.sum()},
                {"l1", t.data.abs().sum()},
                {"l2", std::sqrt((t.data * t.data).sum())}};
}

int run_fuse_demo(const FuseDemoOpts& o) {
    const auto dims = parse_csv_doubles(o.shape, 3);
    const int C = static_cast<int>(dims[0]);
    const int H = static_cast<int>(dims[1]);
    const int W = static_cast<int>(dims[2]);
    if (C < 1 || H < 1 || W < 1) throw ValidationError("--shape must be positive C,H,W");

    FusionNetWeights weights;
    if (!o.weights_path.empty()) {
        weights = parse_weights(read_text_file(o.weights_path));
    } else if (o.random_weights_seed >= 0) {
        const int reduction = C % 4 == 0 ? 4 : (C % 2 == 0 ? 2 : 1);
        weights = random_weights(C, reduction, 7, 2,
                                 static_cast<std::uint64_t>(o.random_weights_seed));
    } else {
        throw ValidationError("fuse-demo needs --weights FILE or --random-weights SEED");
    }

    std::mt19937_64 rng(o.input_seed);
    const Tensord stream_a = demo_tensor({C, H, W}, rng);
    const Tensord stream_b = demo_tensor({C, H, W}, rng);

    const Tensord fused = fuse(stream_a, stream_b, weights.fusion);
    const Tensord upsampled = dysample(fused, weights.dysample);

    const json j{{"input_shape", std::vector<int>{C, H, W}},
                 {"fuse", tensor_checksums(fused)},
                 {"dysample", tensor_checksums(upsampled)}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ------------------------------------------------------------------ synth

struct SynthOpts {
    std::string out_dir;
    int videos = 4;
    int frames = 24;
    int width = 640, height = 480;
    int n_categories = 4;
    int n_images = 3;
    std::uint64_t seed = 0;
};

double synth_uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

int run_synth(const SynthOpts& o) {
    static const std::vector<std::string> kNames = {
        "pedestrian", "car", "small vehicle", "medium vehicle",
        "large vehicle", "bus", "emergency vehicle"};
    if (o.n_categories < 1 || o.n_categories > static_cast<int>(kNames.size()))
        throw ValidationError("--num-categories must be in [1, " +
                              std::to_string(kNames.size()) + "]");
    if (o.videos < 1 || o.frames < 2) throw ValidationError("need at least 1 video and 2 frames");

    const fs::path root(o.out_dir);
    fs::create_directories(root / "gt");
    fs::create_directories(root / "det");
    fs::create_directories(root / "branches");
    fs::create_directories(root / "images");

    const CategoryTable table(
        std::vector<std::string>(kNames.begin(), kNames.begin() + o.n_categories));
    write_text_file_atomic(root / "categories.json", serialize_categories(table));

    for (int v = 0; v < o.videos; ++v) {
        std::mt19937_64 rng(o.seed * 1000003 + static_cast<std::uint64_t>(v));
        const std::string video_id = "synth_" + std::to_string(v);

        VideoRecord gt;
        gt.video_id = video_id;
        gt.image_size = {o.width, o.height};
        gt.frame_count = o.frames;

        std::map<int, std::vector<Detection>> detections;
        const int n_objects = 2 + static_cast<int>(uniform_below(rng, 3));
        for (int obj = 0; obj < n_objects; ++obj) {
            AgentTube tube;
            tube.category = static_cast<CategoryId>(uniform_below(rng, static_cast<std::uint64_t>(o.n_categories)));
            tube.tube_score = 1.0;

            const double w = synth_uniform(rng, 0.06, 0.22);
            const double h = synth_uniform(rng, 0.06, 0.22);
            double x = synth_uniform(rng, 0.0, 1.0 - w);
            double y = synth_uniform(rng, 0.0, 1.0 - h);
            const double vx = synth_uniform(rng, -0.02, 0.02);
            const double vy = synth_uniform(rng, -0.02, 0.02);
            const int start = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(o.frames / 2)));
            const int length = o.frames / 3 +
                               static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(o.frames / 2)));
            const int end = std::min(o.frames - 1, start + length);

            for (int f = start; f <= end; ++f) {
                const Boxd box{x, y, x + w, y + h};
                tube.entries.push_back({f, box, 1.0});

                // derived noisy detection: small positional jitter, most frames
                if (synth_uniform(rng, 0.0, 1.0) < 0.92) {
                    const double jx = synth_uniform(rng, -0.008, 0.008);
                    const double jy = synth_uniform(rng, -0.008, 0.008);
                    const double dx = std::clamp(x + jx, 0.0, 1.0 - w);
                    const double dy = std::clamp(y + jy, 0.0, 1.0 - h);
                    detections[f].push_back({f, {dx, dy, dx + w, dy + h}, tube.category,
                                             synth_uniform(rng, 0.55, 0.98)});
                }
                x = std::clamp(x + vx, 0.0, 1.0 - w);
                y = std::clamp(y + vy, 0.0, 1.0 - h);
            }
            gt.tubes.push_back(std::move(tube));
        }

        // sprinkle spurious detections
        for (int f = 0; f < o.frames; ++f) {
            if (synth_uniform(rng, 0.0, 1.0) < 0.12) {
                const double w = synth_uniform(rng, 0.03, 0.1);
                const double h = synth_uniform(rng, 0.03, 0.1);
                const double x = synth_uniform(rng, 0.0, 1.0 - w);
                const double y = synth_uniform(rng, 0.0, 1.0 - h);
                detections[f].push_back(
                    {f, {x, y, x + w, y + h},
                     static_cast<CategoryId>(uniform_below(rng, static_cast<std::uint64_t>(o.n_categories))),
                     synth_uniform(rng, 0.05, 0.45)});
            }
        }

        write_text_file_atomic(root / "gt" / (video_id + ".json"), serialize_tubes(gt));

        // the canonical detections file lists categories in branch order, so
        // it equals what `merge` reconstructs from the branch files
        VideoRecord det;
        det.video_id = video_id;
        det.image_size = gt.image_size;
        det.frame_count = o.frames;
        std::map<CategoryId, VideoRecord> branches;
        for (auto& [frame_index, dets] : detections) {
            std::stable_sort(dets.begin(), dets.end(),
                             [](const Detection& a, const Detection& b) { return a.category < b.category; });
            det.frames.push_back({frame_index, dets});
            for (const auto& d : dets) {
                VideoRecord& branch = branches[d.category];
                if (branch.frames.empty() || branch.frames.back().frame_index != frame_index)
                    branch.frames.push_back({frame_index, {}});
                branch.frames.back().detections.push_back(d);
            }
        }
        write_text_file_atomic(root / "det" / (video_id + ".json"), serialize_detections(det));
        for (auto& [category, branch] : branches) {
            branch.video_id = video_id;
            branch.image_size = gt.image_size;
            branch.frame_count = o.frames;
            write_text_file_atomic(
                root / "branches" / (video_id + "_cat" + std::to_string(category) + ".json"),
                serialize_detections(branch));
        }
    }

    // small dark scenes for the enhancement stage
    std::mt19937_64 img_rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < o.n_images; ++i) {
        Rasterd image(64, 64, 3);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double base = 0.02 + 0.18 * (x / 63.0) * (y / 63.0);
                for (int c = 0; c < 3; ++c) {
                    const double noise = synth_uniform(img_rng, 0.0, 0.05);
                    image.at(x, y, c) = std::clamp(base + noise + 0.03 * c, 0.0, 1.0);
                }
            }
        write_png(root / "images" / ("scene_" + std::to_string(i) + ".png"), image);
    }

    std::cout << "synthetic dataset with " << o.videos << " video(s) -> " << o.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stad: spatiotemporal agent-detection toolkit"};
    app.require_subcommand(1);

    GeomOpts geom_opts;
    auto* geom_cmd = app.add_subcommand("geom", "MPDIoU diagnostics for a box pair");
    geom_cmd->add_option("--pred", geom_opts.pred, "predicted box x1,y1,x2,y2")->required();
    geom_cmd->add_option("--gt", geom_opts.gt, "ground-truth box x1,y1,x2,y2")->required();
    geom_cmd->add_option("--width", geom_opts.width, "image width in pixels");
    geom_cmd->add_option("--height", geom_opts.height, "image height in pixels");
    geom_cmd->add_option("--convention", geom_opts.convention, "normalized|pixel");
    geom_cmd->add_flag("--grad", geom_opts.grad, "include the loss gradient (subgradient at kinks)");

    EnhanceOpts enhance_opts;
    auto* enhance_cmd = app.add_subcommand("enhance", "low-light enhancement of a PNG directory");
    enhance_cmd->add_option("--gamma", enhance_opts.gamma, "gamma (>1 brightens)");
    enhance_cmd->add_option("--in", enhance_opts.in_dir, "input directory")->required();
    enhance_cmd->add_option("--out", enhance_opts.out_dir, "output directory")->required();
    enhance_cmd->add_option("--method", enhance_opts.method, "gamma|histeq");
    enhance_cmd->add_option("--jobs", enhance_opts.jobs, "parallel workers");

    AugmentOpts augment_opts;
    auto* augment_cmd = app.add_subcommand("augment", "detection-preserving augmentation");
    augment_cmd->add_option("--op", augment_opts.op, "mosaic|mixup|copypaste")->required();
    augment_cmd->add_option("--inputs", augment_opts.inputs, "input images (PNG + .json sidecar)")
        ->delimiter(',');
    augment_cmd->add_option("--source", augment_opts.source, "copypaste source image");
    augment_cmd->add_option("--target", augment_opts.target, "copypaste target image");
    augment_cmd->add_option("--select", augment_opts.select, "copypaste source box indices i,j,...");
    augment_cmd->add_option("--lambda", augment_opts.lambda, "mixup blend weight");
    augment_cmd->add_option("--center", [&augment_opts](const std::vector<std::string>& vals) {
        const auto c = parse_csv_doubles(vals.back(), 2);
        augment_opts.center_x = c[0];
        augment_opts.center_y = c[1];
        return true;
    }, "mosaic center cx,cy");
    augment_cmd->add_option("--min-visible", augment_opts.min_visible, "mosaic box retention fraction");
    augment_cmd->add_option("--width", augment_opts.width, "mosaic canvas width");
    augment_cmd->add_option("--height", augment_opts.height, "mosaic canvas height");
    augment_cmd->add_option("--seed", augment_opts.seed, "seed for stochastic placement");
    augment_cmd->add_option("--out", augment_opts.out, "output PNG path")->required();

    LinkOpts link_opts;
    auto* link_cmd = app.add_subcommand("link", "link detections into agent tubes");
    link_cmd->add_option("--in", link_opts.in_path, "detections.json file or directory")->required();
    link_cmd->add_option("--out", link_opts.out_path, "tubes.json file or directory")->required();
    link_cmd->add_option("--iou", link_opts.iou_threshold, "link IoU threshold");
    link_cmd->add_option("--max-gap", link_opts.max_gap, "frames a tube survives unmatched");
    link_cmd->add_option("--min-len", link_opts.min_len, "minimum tube length");
    link_cmd->add_option("--score-agg", link_opts.score_agg, "mean|max");
    link_cmd->add_option("--jobs", link_opts.jobs, "parallel workers (directory mode)");

    MergeOpts merge_opts;
    auto* merge_cmd = app.add_subcommand("merge", "merge per-category branch detections");
    merge_cmd->add_option("--branches", merge_opts.branches, "branch detections.json files")
        ->required()
        ->expected(-1);
    merge_cmd->add_option("--nms-iou", merge_opts.nms_iou, "per-category NMS threshold (0 = off)");
    merge_cmd->add_option("--out", merge_opts.out, "merged detections.json")->required();

    EvalOpts eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "tube video-mAP evaluation");
    eval_cmd->add_option("--gt", eval_opts.gt, "ground-truth tubes.json files/dirs")
        ->required()
        ->expected(-1);
    eval_cmd->add_option("--pred", eval_opts.pred, "predicted tubes.json files/dirs")
        ->required()
        ->expected(-1);
    eval_cmd->add_option("--thresholds", eval_opts.thresholds, "IoU thresholds t1,t2,...");
    eval_cmd->add_option("--tube-iou", eval_opts.tube_iou_mode, "union|intersection");
    eval_cmd->add_option("--categories", eval_opts.categories_path, "categories.json");
    eval_cmd->add_option("--report", eval_opts.report_path, "report JSON output path");

    PlanOpts plan_opts;
    auto* plan_cmd = app.add_subcommand("plan", "emit the pre-train/fine-tune plan");
    plan_cmd->add_option("--categories", plan_opts.categories_path, "categories.json")->required();
    plan_cmd->add_option("--out", plan_opts.out, "plan JSON output path")->required();
    plan_cmd->add_option("--group", plan_opts.groups,
                         "confusable category names, comma-separated (repeatable)");

    StatsOpts stats_opts;
    auto* stats_cmd = app.add_subcommand("stats", "per-category box counts");
    stats_cmd->add_option("--in", stats_opts.inputs, "tubes/detections JSON files or dirs")
        ->required()
        ->expected(-1);
    stats_cmd->add_option("--categories", stats_opts.categories_path, "categories.json");
    stats_cmd->add_option("--out", stats_opts.out, "output path (default stdout)");

    FuseDemoOpts fuse_opts;
    auto* fuse_cmd = app.add_subcommand("fuse-demo", "forward the toy fusion network");
    fuse_cmd->add_option("--shape", fuse_opts.shape, "input feature shape C,H,W");
    fuse_cmd->add_option("--weights", fuse_opts.weights_path, "weights JSON file");
    fuse_cmd->add_option("--random-weights", fuse_opts.random_weights_seed,
                         "generate weights from this seed");
    fuse_cmd->add_option("--input-seed", fuse_opts.input_seed, "seed for the demo inputs");

    SynthOpts synth_opts;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic mini-dataset");
    synth_cmd->add_option("--out", synth_opts.out_dir, "output directory")->required();
    synth_cmd->add_option("--videos", synth_opts.videos, "number of videos");
    synth_cmd->add_option("--frames", synth_opts.frames, "frames per video");
    synth_cmd->add_option("--width", synth_opts.width, "image width");
    synth_cmd->add_option("--height", synth_opts.height, "image height");
    synth_cmd->add_option("--num-categories", synth_opts.n_categories, "category count");
    synth_cmd->add_option("--images", synth_opts.n_images, "number of demo PNGs");
    synth_cmd->add_option("--seed", synth_opts.seed, "dataset seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (geom_cmd->parsed()) return run_geom(geom_opts);
        if (enhance_cmd->parsed()) return run_enhance(enhance_opts);
        if (augment_cmd->parsed()) return run_augment(augment_opts);
        if (link_cmd->parsed()) return run_link(link_opts);
        if (merge_cmd->parsed()) return run_merge(merge_opts);
        if (eval_cmd->parsed()) return run_eval(eval_opts);
        if (plan_cmd->parsed()) return run_plan(plan_opts);
        if (stats_cmd->parsed()) return run_stats(stats_opts);
        if (fuse_cmd->parsed()) return run_fuse_demo(fuse_opts);
        if (synth_cmd->parsed()) return run_synth(synth_opts);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const NonDifferentiableError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
