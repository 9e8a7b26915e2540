#include "stad/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "stad/errors.hpp"
#include "stad/rng.hpp"

namespace stad {

using json = nlohmann::json;

namespace {

constexpr double kCoordSlack = 1e-6;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ValidationError(path + ": " + what);
}

json parse_json(const std::string& document) {
    json j = json::parse(document, nullptr, false);
    if (j.is_discarded()) throw ValidationError("malformed JSON document");
    return j;
}

const json& need(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (!j.is_object() || it == j.end()) fail(path, std::string("missing field '") + key + "'");
    return *it;
}

int need_int(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

double need_number(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

std::string need_string(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

const json& need_array(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_array()) fail(path + "." + key, "expected an array");
    return v;
}

ImageSize parse_image_size(const json& j, const std::string& path) {
    const json& node = need(j, "image_size", path);
    ImageSize size{need_int(node, "width", path + ".image_size"),
                   need_int(node, "height", path + ".image_size")};
    if (size.width < 1 || size.height < 1)
        fail(path + ".image_size", "dimensions must be positive");
    return size;
}

Boxd parse_box(const json& j, const std::string& path) {
    const json& v = need(j, "box", path);
    if (!v.is_array() || v.size() != 4) fail(path + ".box", "expected [x1,y1,x2,y2]");
    for (const auto& c : v)
        if (!c.is_number()) fail(path + ".box", "coordinates must be numbers");
    Boxd box{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
    if (box.x1 > box.x2) fail(path + ".box", "x1 > x2");
    if (box.y1 > box.y2) fail(path + ".box", "y1 > y2");
    if (!box_clamp_to_unit(box, kCoordSlack))
        fail(path + ".box", "coordinates outside [0,1]");
    return box;
}

double parse_score(const json& j, const std::string& path) {
    double score = need_number(j, "score", path);
    if (score < -kCoordSlack || score > 1.0 + kCoordSlack)
        fail(path + ".score", "score outside [0,1]");
    return std::clamp(score, 0.0, 1.0);
}

CategoryId parse_category(const json& j, const std::string& path,
                          const CategoryTable* categories) {
    const json& v = need(j, "category", path);
    if (!v.is_number_integer()) fail(path + ".category", "expected an integer id");
    const CategoryId id = v.get<int>();
    if (id < 0) fail(path + ".category", "negative category id");
    if (categories && !categories->contains(id))
        fail(path + ".category", "unknown category id " + std::to_string(id));
    return id;
}

struct Header {
    std::string video_id;
    ImageSize image_size;
    int frame_count;
};

Header parse_header(const json& j) {
    Header h;
    h.video_id = need_string(j, "video_id", "$");
    h.image_size = parse_image_size(j, "$");
    h.frame_count = need_int(j, "frame_count", "$");
    if (h.frame_count < 1) fail("$.frame_count", "must be positive");
    return h;
}

void check_frame_index(int frame_index, int frame_count, const std::string& path) {
    if (frame_index < 0) fail(path, "negative frame_index");
    if (frame_index >= frame_count)
        fail(path, "frame_index " + std::to_string(frame_index) +
                       " >= frame_count " + std::to_string(frame_count));
}

json box_to_json(const Boxd& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json header_to_json(const VideoRecord& r) {
    return json{{"video_id", r.video_id},
                {"image_size", {{"width", r.image_size.width}, {"height", r.image_size.height}}},
                {"frame_count", r.frame_count}};
}

}  // namespace

CategoryTable::CategoryTable(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_)
        if (!seen.insert(n).second)
            throw ValidationError("duplicate category name '" + n + "'");
}

const std::string& CategoryTable::name(CategoryId id) const {
    if (!contains(id))
        throw ValidationError("unknown category id " + std::to_string(id));
    return names_[static_cast<std::size_t>(id)];
}

std::optional<CategoryId> CategoryTable::find(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (names_[static_cast<std::size_t>(i)] == name) return i;
    return std::nullopt;
}

VideoRecord parse_detections(const std::string& document, const CategoryTable* categories) {
    const json j = parse_json(document);
    const Header h = parse_header(j);
    VideoRecord record{h.video_id, h.image_size, h.frame_count, {}, {}};

    const json& frames = need_array(j, "frames", "$");
    int prev_index = -1;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const std::string fpath = "frames[" + std::to_string(f) + "]";
        FrameDetections frame;
        frame.frame_index = need_int(frames[f], "frame_index", fpath);
        check_frame_index(frame.frame_index, h.frame_count, fpath + ".frame_index");
        if (frame.frame_index <= prev_index)
            fail(fpath + ".frame_index", "frame indices must be strictly increasing");
        prev_index = frame.frame_index;

        const json& dets = need_array(frames[f], "detections", fpath);
        for (std::size_t d = 0; d < dets.size(); ++d) {
            const std::string dpath = fpath + ".detections[" + std::to_string(d) + "]";
            Detection det;
            det.frame_index = frame.frame_index;
            det.box = parse_box(dets[d], dpath);
            det.category = parse_category(dets[d], dpath, categories);
            det.score = parse_score(dets[d], dpath);
            frame.detections.push_back(det);
        }
        record.frames.push_back(std::move(frame));
    }
    return record;
}

VideoRecord parse_tubes(const std::string& document, const CategoryTable* categories) {
    const json j = parse_json(document);
    const Header h = parse_header(j);
    VideoRecord record{h.video_id, h.image_size, h.frame_count, {}, {}};

    const json& tubes = need_array(j, "tubes", "$");
    for (std::size_t t = 0; t < tubes.size(); ++t) {
        const std::string tpath = "tubes[" + std::to_string(t) + "]";
        AgentTube tube;
        tube.category = parse_category(tubes[t], tpath, categories);
        const double tube_score = need_number(tubes[t], "tube_score", tpath);
        if (tube_score < -kCoordSlack || tube_score > 1.0 + kCoordSlack)
            fail(tpath + ".tube_score", "score outside [0,1]");
        tube.tube_score = std::clamp(tube_score, 0.0, 1.0);
        const json& entries = need_array(tubes[t], "entries", tpath);
        if (entries.empty()) fail(tpath + ".entries", "tube has no entries");
        for (std::size_t e = 0; e < entries.size(); ++e) {
            const std::string epath = tpath + ".entries[" + std::to_string(e) + "]";
            TubeEntry entry;
            entry.frame_index = need_int(entries[e], "frame_index", epath);
            check_frame_index(entry.frame_index, h.frame_count, epath + ".frame_index");
            entry.box = parse_box(entries[e], epath);
            entry.score = parse_score(entries[e], epath);
            if (e > 0 && entry.frame_index != tube.entries.back().frame_index + 1)
                fail(epath + ".frame_index",
                     "tube entries must be contiguous (no temporal gaps)");
            tube.entries.push_back(entry);
        }
        record.tubes.push_back(std::move(tube));
    }
    return record;
}

std::string serialize_detections(const VideoRecord& record) {
    json j = header_to_json(record);
    json frames = json::array();
    for (const auto& frame : record.frames) {
        json dets = json::array();
        for (const auto& det : frame.detections)
            dets.push_back(json{{"box", box_to_json(det.box)},
                                {"category", det.category},
                                {"score", det.score}});
        frames.push_back(json{{"frame_index", frame.frame_index},
                              {"detections", std::move(dets)}});
    }
    j["frames"] = std::move(frames);
    return j.dump(2) + "\n";
}

std::string serialize_tubes(const VideoRecord& record) {
    json j = header_to_json(record);
    json tubes = json::array();
    for (const auto& tube : record.tubes) {
        json entries = json::array();
        for (const auto& entry : tube.entries)
            entries.push_back(json{{"frame_index", entry.frame_index},
                                   {"box", box_to_json(entry.box)},
                                   {"score", entry.score}});
        tubes.push_back(json{{"category", tube.category},
                             {"tube_score", tube.tube_score},
                             {"entries", std::move(entries)}});
    }
    j["tubes"] = std::move(tubes);
    return j.dump(2) + "\n";
}

CategoryTable parse_categories(const std::string& document) {
    const json j = parse_json(document);
    if (!j.is_array()) throw ValidationError("$: expected an array of {id, name}");
    std::vector<std::string> names(j.size());
    std::vector<bool> seen(j.size(), false);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string path = "[" + std::to_string(i) + "]";
        const int id = need_int(j[i], "id", path);
        if (id < 0 || static_cast<std::size_t>(id) >= j.size() || seen[static_cast<std::size_t>(id)])
            fail(path + ".id", "category ids must be dense from 0 and unique");
        seen[static_cast<std::size_t>(id)] = true;
        names[static_cast<std::size_t>(id)] = need_string(j[i], "name", path);
    }
    return CategoryTable(std::move(names));
}

std::string serialize_categories(const CategoryTable& table) {
    json j = json::array();
    for (CategoryId id = 0; id < table.size(); ++id)
        j.push_back(json{{"id", id}, {"name", table.name(id)}});
    return j.dump(2) + "\n";
}

std::map<CategoryId, std::int64_t> category_stats(const std::vector<VideoRecord>& records) {
    std::map<CategoryId, std::int64_t> counts;
    for (const auto& record : records) {
        for (const auto& tube : record.tubes)
            counts[tube.category] += static_cast<std::int64_t>(tube.entries.size());
        for (const auto& frame : record.frames)
            for (const auto& det : frame.detections) counts[det.category] += 1;
    }
    return counts;
}

std::pair<std::vector<std::string>, std::vector<std::string>>
split_dataset(const std::vector<std::string>& video_ids, double ratio, std::uint64_t seed) {
    if (video_ids.empty()) throw ValidationError("split_dataset: empty video list");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ValidationError("split_dataset: ratio must be in (0,1)");

    std::vector<std::string> shuffled = video_ids;
    std::mt19937_64 rng(seed);
    deterministic_shuffle(shuffled, rng);

    const auto n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(shuffled.size())));
    std::vector<std::string> train(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::string> validation(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    return {std::move(train), std::move(validation)};
}

}  // namespace stad
