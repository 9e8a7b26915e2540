#include "stad/datamodel.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "stad/errors.hpp"
#include "oracles.hpp"

using namespace stad;

namespace {

const char* kMinimalDetections = R"({
  "video_id": "v0",
  "image_size": {"width": 64, "height": 48},
  "frame_count": 1,
  "frames": [
    {"frame_index": 0, "detections": [
      {"box": [0.1, 0.2, 0.3, 0.4], "category": 0, "score": 0.9}
    ]}
  ]
})";

VideoRecord random_tube_record(std::mt19937_64& rng, const std::string& id) {
    VideoRecord r;
    r.video_id = id;
    r.image_size = {640, 480};
    r.frame_count = 30;
    const int n_tubes = 1 + static_cast<int>(rng() % 4);
    for (int t = 0; t < n_tubes; ++t) {
        AgentTube tube;
        tube.category = static_cast<CategoryId>(rng() % 3);
        tube.tube_score = oracles::uniform(rng, 0.0, 1.0);
        const int start = static_cast<int>(rng() % 20);
        const int len = 1 + static_cast<int>(rng() % 10);
        for (int f = start; f < start + len; ++f) {
            TubeEntry e;
            e.frame_index = f;
            e.box = oracles::random_box(rng);
            e.score = oracles::uniform(rng, 0.0, 1.0);
            tube.entries.push_back(e);
        }
        r.tubes.push_back(tube);
    }
    return r;
}

}  // namespace

TEST_CASE("parse_detections: minimal document") {
    const VideoRecord r = parse_detections(kMinimalDetections);
    CHECK(r.video_id == "v0");
    CHECK(r.image_size.width == 64);
    CHECK(r.frame_count == 1);
    REQUIRE(r.frames.size() == 1);
    REQUIRE(r.frames[0].detections.size() == 1);
    const Detection& det = r.frames[0].detections[0];
    CHECK(det.box.x1 == 0.1);
    CHECK(det.category == 0);
    CHECK(det.score == 0.9);
    CHECK(det.frame_index == 0);
}

TEST_CASE("parse_detections: x1 > x2 is rejected with the box's path") {
    const std::string bad = R"({
      "video_id": "v0", "image_size": {"width": 10, "height": 10}, "frame_count": 2,
      "frames": [
        {"frame_index": 0, "detections": []},
        {"frame_index": 1, "detections": [
          {"box": [0.5, 0.1, 0.2, 0.4], "category": 0, "score": 0.5}
        ]}
      ]
    })";
    CHECK_THROWS_WITH_AS((void)parse_detections(bad),
                         "frames[1].detections[0].box: x1 > x2", ValidationError);
}

TEST_CASE("parse_detections: 3 frames with 2 detections each") {
    std::string doc = R"({
      "video_id": "v1", "image_size": {"width": 100, "height": 100}, "frame_count": 3,
      "frames": [)";
    for (int f = 0; f < 3; ++f) {
        doc += (f ? "," : "");
        doc += R"({"frame_index": )" + std::to_string(f) + R"(, "detections": [
          {"box": [0.0, 0.0, 0.1, 0.1], "category": 0, "score": 0.5},
          {"box": [0.2, 0.2, 0.4, 0.4], "category": 1, "score": 0.25}]})";
    }
    doc += "]}";
    const VideoRecord r = parse_detections(doc);
    std::size_t total = 0;
    std::set<int> indices;
    for (const auto& frame : r.frames) {
        total += frame.detections.size();
        indices.insert(frame.frame_index);
    }
    CHECK(total == 6);
    CHECK(indices == std::set<int>{0, 1, 2});
}

TEST_CASE("parse_detections: near-boundary coordinates are clamped, far ones rejected") {
    const auto doc = [](const char* box) {
        return std::string(R"({"video_id": "v", "image_size": {"width": 8, "height": 8},
          "frame_count": 1, "frames": [{"frame_index": 0, "detections": [
          {"box": )") + box + R"(, "category": 0, "score": 1.0}]}]})";
    };
    const VideoRecord ok = parse_detections(doc("[-1e-7, 0.0, 0.5, 1.0000000001]"));
    CHECK(ok.frames[0].detections[0].box.x1 == 0.0);
    CHECK(ok.frames[0].detections[0].box.y2 == 1.0);
    CHECK_THROWS_AS((void)parse_detections(doc("[-0.01, 0.0, 0.5, 0.5]")), ValidationError);
    CHECK_THROWS_AS((void)parse_detections(doc("[0.0, 0.0, 0.5, 1.01]")), ValidationError);
}

TEST_CASE("parse_detections: unknown category against a table") {
    CategoryTable table({"car", "bus"});
    CHECK_NOTHROW((void)parse_detections(kMinimalDetections, &table));
    CategoryTable empty_table((std::vector<std::string>{}));
    CHECK_THROWS_AS((void)parse_detections(kMinimalDetections, &empty_table), ValidationError);
}

TEST_CASE("parse_detections: malformed JSON and schema violations") {
    CHECK_THROWS_AS((void)parse_detections("{not json"), ValidationError);
    CHECK_THROWS_AS((void)parse_detections("{}"), ValidationError);
    CHECK_THROWS_AS((void)parse_detections(R"({"video_id": "v",
        "image_size": {"width": 0, "height": 5}, "frame_count": 1, "frames": []})"),
                    ValidationError);
    // frame_index beyond frame_count
    CHECK_THROWS_AS((void)parse_detections(R"({"video_id": "v",
        "image_size": {"width": 5, "height": 5}, "frame_count": 1,
        "frames": [{"frame_index": 1, "detections": []}]})"),
                    ValidationError);
}

TEST_CASE("serialize_tubes: empty and ordered documents") {
    VideoRecord r;
    r.video_id = "empty";
    r.image_size = {10, 10};
    r.frame_count = 5;
    const std::string doc = serialize_tubes(r);
    CHECK(doc.find("\"tubes\": []") != std::string::npos);

    AgentTube tube;
    tube.category = 2;
    tube.tube_score = 0.75;
    tube.entries = {{3, {0.1, 0.1, 0.2, 0.2}, 0.5}, {4, {0.15, 0.1, 0.25, 0.2}, 0.7}};
    r.tubes.push_back(tube);
    const VideoRecord back = parse_tubes(serialize_tubes(r));
    REQUIRE(back.tubes.size() == 1);
    CHECK(back.tubes[0].entries[0].frame_index == 3);
    CHECK(back.tubes[0].entries[1].frame_index == 4);
}

TEST_CASE("tube round-trip is the identity on random records") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 50; ++i) {
        const VideoRecord r = random_tube_record(rng, "v" + std::to_string(i));
        const VideoRecord back = parse_tubes(serialize_tubes(r));
        CHECK(back == r);
    }
}

TEST_CASE("detections round-trip is the identity") {
    std::mt19937_64 rng(43);
    for (int i = 0; i < 30; ++i) {
        VideoRecord r;
        r.video_id = "d" + std::to_string(i);
        r.image_size = {320, 240};
        r.frame_count = 12;
        for (int f = 0; f < 12; f += 1 + static_cast<int>(rng() % 3)) {
            FrameDetections frame;
            frame.frame_index = f;
            const int n = static_cast<int>(rng() % 4);
            for (int d = 0; d < n; ++d)
                frame.detections.push_back(
                    {f, oracles::random_box(rng), static_cast<CategoryId>(rng() % 5),
                     oracles::uniform(rng, 0.0, 1.0)});
            r.frames.push_back(frame);
        }
        CHECK(parse_detections(serialize_detections(r)) == r);
    }
}

TEST_CASE("parse_tubes rejects gaps and empty tubes") {
    const std::string gap = R"({"video_id": "v", "image_size": {"width": 5, "height": 5},
      "frame_count": 10, "tubes": [{"category": 0, "tube_score": 0.5, "entries": [
        {"frame_index": 0, "box": [0,0,0.5,0.5], "score": 0.5},
        {"frame_index": 2, "box": [0,0,0.5,0.5], "score": 0.5}]}]})";
    CHECK_THROWS_WITH_AS((void)parse_tubes(gap),
                         "tubes[0].entries[1].frame_index: tube entries must be contiguous "
                         "(no temporal gaps)",
                         ValidationError);
    const std::string empty = R"({"video_id": "v", "image_size": {"width": 5, "height": 5},
      "frame_count": 10, "tubes": [{"category": 0, "tube_score": 0.5, "entries": []}]})";
    CHECK_THROWS_AS((void)parse_tubes(empty), ValidationError);
}

TEST_CASE("categories.json round-trip and validation") {
    const std::string doc = R"([{"id": 0, "name": "car"}, {"id": 1, "name": "pedestrian"}])";
    const CategoryTable table = parse_categories(doc);
    CHECK(table.size() == 2);
    CHECK(table.name(1) == "pedestrian");
    CHECK(table.find("car") == 0);
    CHECK(!table.find("bus"));
    CHECK(parse_categories(serialize_categories(table)) == table);

    CHECK_THROWS_AS((void)parse_categories(R"([{"id": 1, "name": "x"}])"), ValidationError);
    CHECK_THROWS_AS((void)parse_categories(R"([{"id": 0, "name": "x"}, {"id": 0, "name": "y"}])"),
                    ValidationError);
}

TEST_CASE("category_stats counts box instances") {
    CHECK(category_stats({}).empty());

    std::mt19937_64 rng(1);
    VideoRecord r;
    r.video_id = "v";
    r.image_size = {10, 10};
    r.frame_count = 20;
    const auto tube_with = [&](CategoryId cat, int start, int len) {
        AgentTube t;
        t.category = cat;
        t.tube_score = 0.5;
        for (int f = start; f < start + len; ++f)
            t.entries.push_back({f, oracles::random_box(rng), 0.5});
        return t;
    };
    // one car tube with 5 entries
    r.tubes.push_back(tube_with(0, 0, 5));
    auto counts = category_stats({r});
    CHECK(counts == std::map<CategoryId, std::int64_t>{{0, 5}});

    // fixture: 2 car tubes (3 + 4 entries) and 1 bus tube (2 entries)
    VideoRecord fixture;
    fixture.video_id = "f";
    fixture.image_size = {10, 10};
    fixture.frame_count = 20;
    fixture.tubes.push_back(tube_with(0, 0, 3));
    fixture.tubes.push_back(tube_with(0, 5, 4));
    fixture.tubes.push_back(tube_with(4, 1, 2));
    counts = category_stats({fixture});
    CHECK(counts[0] == 7);
    CHECK(counts[4] == 2);

    std::int64_t total = 0;
    for (const auto& [cat, n] : counts) total += n;
    CHECK(total == 9);
}

TEST_CASE("split_dataset: 75/25 ratio, rounding edge, determinism") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("vid" + std::to_string(i));

    const auto [train, val] = split_dataset(ids, 0.75, 7);
    CHECK(train.size() == 75);
    CHECK(val.size() == 25);

    // partition: disjoint and jointly exhaustive
    std::set<std::string> all(train.begin(), train.end());
    for (const auto& v : val) CHECK(all.insert(v).second);
    CHECK(all == std::set<std::string>(ids.begin(), ids.end()));

    const auto [train2, val2] = split_dataset(ids, 0.75, 7);
    CHECK(train2 == train);
    CHECK(val2 == val);
    const auto [train3, val3] = split_dataset(ids, 0.75, 8);
    CHECK(train3 != train);  // overwhelmingly likely for 100 ids
    (void)val3;

    const auto [one_train, one_val] = split_dataset({"only"}, 0.75, 1);
    CHECK(one_train.size() == 1);
    CHECK(one_val.empty());

    CHECK_THROWS_AS((void)split_dataset({}, 0.5, 0), ValidationError);
    CHECK_THROWS_AS((void)split_dataset(ids, 0.0, 0), ValidationError);
    CHECK_THROWS_AS((void)split_dataset(ids, 1.0, 0), ValidationError);
}

TEST_CASE("split_dataset partition holds for many sizes and ratios") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 40);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
        const double ratio = oracles::uniform(rng, 0.05, 0.95);
        const auto [train, val] = split_dataset(ids, ratio, rng());
        CHECK(train.size() + val.size() == ids.size());
        CHECK(train.size() == static_cast<std::size_t>(std::llround(ratio * n)));
        std::set<std::string> seen;
        for (const auto& v : train) CHECK(seen.insert(v).second);
        for (const auto& v : val) CHECK(seen.insert(v).second);
    }
}
