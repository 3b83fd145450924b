#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "kptdiag/types.hpp"

namespace kptdiag {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// file helpers

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw io_error("read failed: " + path);
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw io_error("write failed: " + path);
}

inline json parse_json_file(const std::string& path) {
    const std::string text = read_file(path);
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw io_error("not valid JSON: " + path);
    return j;
}

namespace detail {

inline double as_double(const json& j, const std::string& what) {
    if (!j.is_number()) throw validation_error(what + ": expected a number");
    return j.get<double>();
}

inline double as_finite(const json& j, const std::string& what) {
    const double v = as_double(j, what);
    if (!std::isfinite(v)) throw validation_error(what + ": must be finite");
    return v;
}

inline std::int64_t as_id(const json& j, const std::string& what) {
    if (!j.is_number_integer() && !j.is_number_unsigned())
        throw validation_error(what + ": expected an integer id");
    return j.get<std::int64_t>();
}

inline Segmentation parse_segmentation(const json& j, const std::string& what) {
    if (j.is_null()) return std::monostate{};
    if (j.is_array()) {
        if (j.empty()) return std::monostate{};
        PolygonMask poly;
        for (const json& ring : j) {
            if (!ring.is_array() || ring.size() < 6 || ring.size() % 2 != 0)
                throw validation_error(what + ": polygon ring needs an even count of >= 6 numbers");
            std::vector<double> flat;
            flat.reserve(ring.size());
            for (const json& v : ring) flat.push_back(as_finite(v, what + ": polygon coordinate"));
            poly.push_back(std::move(flat));
        }
        return poly;
    }
    if (j.is_object()) {
        if (!j.contains("size") || !j["size"].is_array() || j["size"].size() != 2)
            throw validation_error(what + ": RLE needs size [h,w]");
        const int h = static_cast<int>(as_id(j["size"][0], what + ": RLE height"));
        const int w = static_cast<int>(as_id(j["size"][1], what + ": RLE width"));
        if (h <= 0 || w <= 0) throw validation_error(what + ": RLE size must be positive");
        if (!j.contains("counts"))
            throw validation_error(what + ": RLE needs counts");
        const json& counts = j["counts"];
        if (counts.is_string())
            return CompressedRleMask{h, w, counts.get<std::string>()};
        if (counts.is_array()) {
            RleMask rle{h, w, {}};
            std::uint64_t total = 0;
            for (const json& c : counts) {
                const std::int64_t run = as_id(c, what + ": RLE run");
                if (run < 0) throw validation_error(what + ": RLE run must be >= 0");
                rle.counts.push_back(static_cast<std::uint64_t>(run));
                total += static_cast<std::uint64_t>(run);
            }
            if (total != static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w))
                throw validation_error(what + ": RLE runs do not cover size");
            return rle;
        }
        throw validation_error(what + ": RLE counts must be a string or an array");
    }
    throw validation_error(what + ": unsupported segmentation value");
}

inline json segmentation_to_json(const Segmentation& seg) {
    if (std::holds_alternative<PolygonMask>(seg)) return std::get<PolygonMask>(seg);
    if (const auto* rle = std::get_if<RleMask>(&seg))
        return json{{"size", {rle->height, rle->width}}, {"counts", rle->counts}};
    if (const auto* c = std::get_if<CompressedRleMask>(&seg))
        return json{{"size", {c->height, c->width}}, {"counts", c->counts}};
    return nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// schema

inline json schema_to_json(const KeypointSchema& schema) {
    json pairs = json::array();
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const int c = schema.counterpart[i];
        if (c >= 0 && static_cast<std::size_t>(c) > i) pairs.push_back({i, c});
    }
    return json{{"names", schema.names},
                {"counterpart_pairs", pairs},
                {"k_constants", schema.k_constants},
                {"groups",
                 {{"face", schema.face_group},
                  {"upper", schema.upper_group},
                  {"torso", schema.torso_group},
                  {"lower", schema.lower_group}}}};
}

inline KeypointSchema schema_from_json(const json& j) {
    KeypointSchema s;
    if (!j.is_object() || !j.contains("names") || !j.contains("k_constants"))
        throw validation_error("schema: need names and k_constants");
    s.names = j["names"].get<std::vector<std::string>>();
    s.k_constants = j["k_constants"].get<std::vector<double>>();
    s.counterpart.assign(s.names.size(), -1);
    if (j.contains("counterpart_pairs")) {
        for (const json& p : j["counterpart_pairs"]) {
            if (!p.is_array() || p.size() != 2)
                throw validation_error("schema: counterpart pair must be [i,j]");
            const auto a = detail::as_id(p[0], "schema pair");
            const auto b = detail::as_id(p[1], "schema pair");
            if (a < 0 || b < 0 || a >= static_cast<std::int64_t>(s.names.size()) ||
                b >= static_cast<std::int64_t>(s.names.size()))
                throw validation_error("schema: counterpart pair out of range");
            s.counterpart[static_cast<std::size_t>(a)] = static_cast<int>(b);
            s.counterpart[static_cast<std::size_t>(b)] = static_cast<int>(a);
        }
    }
    if (j.contains("groups")) {
        const json& g = j["groups"];
        auto grab = [&](const char* name) -> std::vector<std::size_t> {
            if (!g.contains(name)) return {};
            return g[name].get<std::vector<std::size_t>>();
        };
        s.face_group = grab("face");
        s.upper_group = grab("upper");
        s.torso_group = grab("torso");
        s.lower_group = grab("lower");
    }
    s.validate();
    return s;
}

inline KeypointSchema load_keypoint_schema(const std::string& path) {
    return schema_from_json(parse_json_file(path));
}

inline void save_keypoint_schema(const std::string& path, const KeypointSchema& schema) {
    write_file(path, schema_to_json(schema).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// ground truth (COCO keypoints format)

inline std::pair<std::vector<ImageRecord>, std::vector<GtInstance>> load_ground_truth(
    const std::string& path, const KeypointSchema& schema) {
    const json root = parse_json_file(path);
    if (!root.is_object() || !root.contains("images") || !root.contains("annotations"))
        throw validation_error(path + ": expected object with images and annotations");

    std::vector<ImageRecord> images;
    std::unordered_set<std::int64_t> image_ids;
    for (const json& im : root["images"]) {
        ImageRecord rec;
        rec.id = detail::as_id(im.at("id"), "image id");
        rec.width = im.contains("width") ? static_cast<int>(detail::as_id(im["width"], "image width")) : 0;
        rec.height = im.contains("height") ? static_cast<int>(detail::as_id(im["height"], "image height")) : 0;
        if (rec.width <= 0 || rec.height <= 0)
            throw validation_error("image " + std::to_string(rec.id) + ": width/height must be positive");
        if (!image_ids.insert(rec.id).second)
            throw validation_error("duplicate image id " + std::to_string(rec.id));
        images.push_back(rec);
    }

    const std::size_t k = schema.size();
    std::vector<GtInstance> gts;
    std::unordered_set<std::int64_t> gt_ids;
    for (const json& an : root["annotations"]) {
        GtInstance g;
        g.id = detail::as_id(an.at("id"), "annotation id");
        const std::string what = "annotation " + std::to_string(g.id);
        if (!gt_ids.insert(g.id).second)
            throw validation_error("duplicate annotation id " + std::to_string(g.id));
        g.image_id = detail::as_id(an.at("image_id"), what + ": image_id");
        if (!image_ids.count(g.image_id))
            throw validation_error(what + ": unknown image_id " + std::to_string(g.image_id));

        const json& kj = an.at("keypoints");
        if (!kj.is_array() || kj.size() != 3 * k)
            throw validation_error(what + ": keypoints must be a flat array of " +
                                   std::to_string(3 * k) + " numbers");
        g.keypoints.resize(k);
        g.num_visible = 0;
        for (std::size_t i = 0; i < k; ++i) {
            Keypoint& kp = g.keypoints[i];
            kp.x = detail::as_finite(kj[3 * i], what + ": keypoint x");
            kp.y = detail::as_finite(kj[3 * i + 1], what + ": keypoint y");
            const double v = detail::as_double(kj[3 * i + 2], what + ": visibility");
            if (v != 0.0 && v != 1.0 && v != 2.0)
                throw validation_error(what + ": visibility must be 0, 1 or 2");
            kp.visibility = static_cast<int>(v);
            if (kp.visibility > 0) ++g.num_visible;
        }

        g.area = detail::as_finite(an.at("area"), what + ": area");
        if (!(g.area > 0.0)) throw validation_error(what + ": area must be > 0");
        const json& bj = an.at("bbox");
        if (!bj.is_array() || bj.size() != 4)
            throw validation_error(what + ": bbox must be [x,y,w,h]");
        for (std::size_t i = 0; i < 4; ++i) g.bbox[i] = detail::as_finite(bj[i], what + ": bbox");
        if (g.bbox[2] < 0.0 || g.bbox[3] < 0.0)
            throw validation_error(what + ": bbox w/h must be >= 0");

        if (an.contains("iscrowd")) {
            const json& cj = an["iscrowd"];
            if (cj.is_boolean())
                g.iscrowd = cj.get<bool>();
            else
                g.iscrowd = detail::as_id(cj, what + ": iscrowd") != 0;
        }
        if (an.contains("segmentation"))
            g.segmentation = detail::parse_segmentation(an["segmentation"], what);
        gts.push_back(std::move(g));
    }
    return {std::move(images), std::move(gts)};
}

inline json ground_truth_to_json(const std::vector<ImageRecord>& images,
                                 const std::vector<GtInstance>& gts,
                                 const KeypointSchema& schema) {
    json root;
    root["images"] = json::array();
    for (const ImageRecord& im : images)
        root["images"].push_back({{"id", im.id}, {"width", im.width}, {"height", im.height}});
    root["annotations"] = json::array();
    for (const GtInstance& g : gts) {
        json flat = json::array();
        for (const Keypoint& kp : g.keypoints) {
            flat.push_back(kp.x);
            flat.push_back(kp.y);
            flat.push_back(kp.visibility);
        }
        json an{{"id", g.id},
                {"image_id", g.image_id},
                {"category_id", 1},
                {"keypoints", std::move(flat)},
                {"num_keypoints", g.num_visible},
                {"area", g.area},
                {"bbox", g.bbox},
                {"iscrowd", g.iscrowd ? 1 : 0}};
        const json seg = detail::segmentation_to_json(g.segmentation);
        if (!seg.is_null()) an["segmentation"] = seg;
        root["annotations"].push_back(std::move(an));
    }
    root["categories"] = json::array(
        {{{"id", 1}, {"name", "person"}, {"keypoints", schema.names}}});
    return root;
}

inline void save_ground_truth(const std::string& path, const std::vector<ImageRecord>& images,
                              const std::vector<GtInstance>& gts, const KeypointSchema& schema) {
    write_file(path, ground_truth_to_json(images, gts, schema).dump() + "\n");
}

// ---------------------------------------------------------------------------
// detections (COCO results format)

inline std::vector<Detection> load_detections(const std::string& path,
                                              const KeypointSchema& schema) {
    const json root = parse_json_file(path);
    if (!root.is_array()) throw validation_error(path + ": expected a JSON array of results");

    const std::size_t k = schema.size();
    std::vector<Detection> dets;
    std::unordered_set<std::int64_t> ids;
    std::int64_t next_id = 0;
    for (const json& r : root) {
        Detection d;
        d.id = r.contains("id") ? detail::as_id(r["id"], "detection id") : next_id;
        const std::string what = "detection " + std::to_string(d.id);
        if (!ids.insert(d.id).second)
            throw validation_error("duplicate detection id " + std::to_string(d.id));
        d.image_id = detail::as_id(r.at("image_id"), what + ": image_id");
        d.score = detail::as_double(r.at("score"), what + ": score");
        if (!std::isfinite(d.score)) throw validation_error(what + ": score must be finite");

        const json& kj = r.at("keypoints");
        const bool triplets = kj.is_array() && kj.size() == 3 * k;
        if (!kj.is_array() || (kj.size() != 2 * k && !triplets))
            throw validation_error(what + ": keypoints must be a flat array of " +
                                   std::to_string(2 * k) + " or " + std::to_string(3 * k) +
                                   " numbers");
        const std::size_t stride = triplets ? 3 : 2;
        d.keypoints.resize(k);
        if (triplets) d.keypoint_scores.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            d.keypoints[i].x = detail::as_finite(kj[stride * i], what + ": keypoint x");
            d.keypoints[i].y = detail::as_finite(kj[stride * i + 1], what + ": keypoint y");
            if (triplets)
                d.keypoint_scores[i] = detail::as_finite(kj[3 * i + 2], what + ": keypoint score");
        }
        ++next_id;
        dets.push_back(std::move(d));
    }
    return dets;
}

inline json detections_to_json(const std::vector<Detection>& dets) {
    json root = json::array();
    for (const Detection& d : dets) {
        json flat = json::array();
        const bool triplets = !d.keypoint_scores.empty();
        for (std::size_t i = 0; i < d.keypoints.size(); ++i) {
            flat.push_back(d.keypoints[i].x);
            flat.push_back(d.keypoints[i].y);
            if (triplets) flat.push_back(d.keypoint_scores[i]);
        }
        root.push_back({{"id", d.id},
                        {"image_id", d.image_id},
                        {"category_id", 1},
                        {"keypoints", std::move(flat)},
                        {"score", d.score}});
    }
    return root;
}

inline void save_detections(const std::string& path, const std::vector<Detection>& dets) {
    write_file(path, detections_to_json(dets).dump() + "\n");
}

}  // namespace kptdiag
