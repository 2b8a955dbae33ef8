#pragma once

/**
 * @file ssdkit/io.hpp
 * @brief Line-oriented file formats.
 *
 * Annotations (JSON Lines, one image per line):
 *   {"image_id": "img_001", "width": 640, "height": 480,
 *    "objects": [{"label": "truck", "bbox": [xmin, ymin, xmax, ymax]}]}
 *
 * Detections (JSON Lines, one detection per line):
 *   {"image_id": "img_001", "label": "truck", "score": 0.93, "bbox": [...]}
 * A line carrying only "image_id" declares the image as covered with no
 * detections. Fused output adds an integer "votes" field.
 *
 * Boxes are absolute pixel corners. Unknown keys are ignored. Record numbers
 * are written in shortest round-trip form so write/parse is lossless.
 *
 * Anchors (text, one box per line, 9 decimals, no header):
 *   k i j ratio scale cx cy w h
 *
 * Bag manifests: "# bag <index>", "# base_seed <seed>", "# count <N>", then
 * one image id per line.
 *
 * Predictions (text, one row per default box, whitespace separated):
 *   p_0 ... p_{n-1} dcx dcy dw dh      (class 0 is background)
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssdkit/anchors.hpp"
#include "ssdkit/ensemble.hpp"
#include "ssdkit/errors.hpp"
#include "ssdkit/records.hpp"
#include "ssdkit/training.hpp"

namespace ssdkit {

// Fixed 9-decimal rendering used by every generated report; never "-0".
inline std::string fixed9(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-')
        s.erase(0, 1);
    return s;
}

inline std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    return out;
}

namespace detail {

inline bool is_blank(const std::string& line)
{
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

inline PixelBox bbox_from_json(const nlohmann::json& j, std::size_t line)
{
    if (!j.is_array() || j.size() != 4)
        throw ParseError(line, "bbox must be an array of 4 numbers");
    double v[4];
    for (std::size_t q = 0; q < 4; ++q) {
        if (!j[q].is_number())
            throw ParseError(line, "bbox must be an array of 4 numbers");
        v[q] = j[q].get<double>();
    }
    try {
        return PixelBox(v[0], v[1], v[2], v[3]);
    } catch (const InvalidArgument& e) {
        throw ValidationError("line " + std::to_string(line) + ": " + e.what());
    }
}

inline nlohmann::json bbox_to_json(const PixelBox& b)
{
    return nlohmann::json::array({b.xmin(), b.ymin(), b.xmax(), b.ymax()});
}

template <class T>
T required(const nlohmann::json& obj, const char* key, std::size_t line)
{
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(line, std::string("missing field '") + key + "'");
    try {
        return it->template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(line, std::string("field '") + key + "' has the wrong type");
    }
}

inline nlohmann::json parse_json_line(const std::string& text, std::size_t line)
{
    try {
        auto j = nlohmann::json::parse(text);
        if (!j.is_object())
            throw ParseError(line, "record is not a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
}

} // namespace detail

inline Dataset parse_annotations(std::istream& in)
{
    Dataset dataset;
    std::set<std::string> seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (detail::is_blank(text))
            continue;
        const auto j = detail::parse_json_line(text, line);

        GroundTruthRecord rec;
        rec.image_id = detail::required<std::string>(j, "image_id", line);
        rec.width = detail::required<int>(j, "width", line);
        rec.height = detail::required<int>(j, "height", line);
        if (const auto objs = j.find("objects"); objs != j.end()) {
            if (!objs->is_array())
                throw ParseError(line, "'objects' must be an array");
            for (const auto& o : *objs) {
                if (!o.is_object())
                    throw ParseError(line, "object entry is not a JSON object");
                GroundTruthObject obj;
                obj.label = detail::required<std::string>(o, "label", line);
                obj.box = detail::bbox_from_json(detail::required<nlohmann::json>(o, "bbox", line), line);
                rec.objects.push_back(std::move(obj));
            }
        }
        try {
            rec.validate();
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line) + ": " + e.what());
        }
        if (!seen.insert(rec.image_id).second)
            throw ValidationError("line " + std::to_string(line) + ": duplicate image_id '" + rec.image_id + "'");
        dataset.push_back(std::move(rec));
    }
    return dataset;
}

inline Dataset parse_annotations(const std::string& path)
{
    auto in = open_input(path);
    return parse_annotations(in);
}

inline void write_annotation(std::ostream& out, const GroundTruthRecord& rec)
{
    nlohmann::ordered_json j;
    j["image_id"] = rec.image_id;
    j["width"] = rec.width;
    j["height"] = rec.height;
    j["objects"] = nlohmann::ordered_json::array();
    for (const auto& obj : rec.objects) {
        nlohmann::ordered_json o;
        o["label"] = obj.label;
        o["bbox"] = detail::bbox_to_json(obj.box);
        j["objects"].push_back(std::move(o));
    }
    out << j.dump() << '\n';
}

inline void write_annotations(std::ostream& out, const Dataset& dataset)
{
    for (const auto& rec : dataset)
        write_annotation(out, rec);
}

struct DetectionFile {
    std::vector<Detection> detections;  // file order
    std::vector<std::string> image_ids; // every image mentioned, first-seen order
};

inline DetectionFile parse_detection_file(std::istream& in)
{
    DetectionFile file;
    std::set<std::string> seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (detail::is_blank(text))
            continue;
        const auto j = detail::parse_json_line(text, line);
        const auto image_id = detail::required<std::string>(j, "image_id", line);
        if (seen.insert(image_id).second)
            file.image_ids.push_back(image_id);
        if (!j.contains("label") && !j.contains("score") && !j.contains("bbox"))
            continue; // coverage marker

        Detection det;
        det.image_id = image_id;
        det.label = detail::required<std::string>(j, "label", line);
        det.score = detail::required<double>(j, "score", line);
        det.box = detail::bbox_from_json(detail::required<nlohmann::json>(j, "bbox", line), line);
        try {
            det.validate();
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line) + ": " + e.what());
        }
        file.detections.push_back(std::move(det));
    }
    return file;
}

inline DetectionFile parse_detection_file(const std::string& path)
{
    auto in = open_input(path);
    return parse_detection_file(in);
}

inline std::vector<Detection> parse_detections(std::istream& in) { return parse_detection_file(in).detections; }

inline std::vector<Detection> parse_detections(const std::string& path) { return parse_detection_file(path).detections; }

inline void write_detection(std::ostream& out, const Detection& det, std::optional<std::size_t> votes = {})
{
    nlohmann::ordered_json j;
    j["image_id"] = det.image_id;
    j["label"] = det.label;
    j["score"] = det.score;
    j["bbox"] = detail::bbox_to_json(det.box);
    if (votes)
        j["votes"] = *votes;
    out << j.dump() << '\n';
}

inline void write_coverage_marker(std::ostream& out, const std::string& image_id)
{
    nlohmann::ordered_json j;
    j["image_id"] = image_id;
    out << j.dump() << '\n';
}

inline void write_detections(std::ostream& out, std::span<const Detection> detections)
{
    for (const auto& det : detections)
        write_detection(out, det);
}

// Images in id order; an image without fused detections gets a coverage marker.
inline void write_fused(std::ostream& out, const FusedDetectionSet& fused)
{
    for (const auto& [image_id, dets] : fused) {
        if (dets.empty())
            write_coverage_marker(out, image_id);
        for (const auto& f : dets)
            write_detection(out, f.detection, f.votes);
    }
}

inline void write_anchor_file(std::ostream& out, const DefaultBoxSet& boxes)
{
    for (const auto& b : boxes) {
        const CenterBox c = corner_to_center(b.corner());
        out << b.map << ' ' << b.i << ' ' << b.j << ' ' << fixed9(b.ratio) << ' ' << fixed9(b.scale) << ' '
            << fixed9(c.cx) << ' ' << fixed9(c.cy) << ' ' << fixed9(c.w) << ' ' << fixed9(c.h) << '\n';
    }
}

inline DefaultBoxSet parse_anchor_file(std::istream& in)
{
    DefaultBoxSet boxes;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (detail::is_blank(text) || text.front() == '#')
            continue;
        std::istringstream fields(text);
        DefaultBox b;
        std::string extra;
        if (!(fields >> b.map >> b.i >> b.j >> b.ratio >> b.scale >> b.center.cx >> b.center.cy >> b.center.w >>
              b.center.h) ||
            (fields >> extra))
            throw ParseError(line, "expected 9 fields: k i j ratio scale cx cy w h");
        if (!(b.center.w > 0.0 && b.center.h > 0.0))
            throw ValidationError("line " + std::to_string(line) + ": anchor with non-positive size");
        boxes.push_back(b);
    }
    if (boxes.empty())
        throw EmptyInput("anchor file contains no boxes");
    return boxes;
}

inline DefaultBoxSet parse_anchor_file(const std::string& path)
{
    auto in = open_input(path);
    return parse_anchor_file(in);
}

inline void write_manifest(std::ostream& out, const BagManifest& bag)
{
    out << "# bag " << bag.index << '\n'
        << "# base_seed " << bag.base_seed << '\n'
        << "# count " << bag.ids.size() << '\n';
    for (const auto& id : bag.ids)
        out << id << '\n';
}

inline BagManifest parse_manifest(std::istream& in)
{
    BagManifest bag;
    std::size_t count = 0;
    bool have[3] = {false, false, false};
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (detail::is_blank(text))
            continue;
        if (text.front() == '#') {
            std::istringstream fields(text.substr(1));
            std::string key;
            fields >> key;
            if (key == "bag" && (fields >> bag.index))
                have[0] = true;
            else if (key == "base_seed" && (fields >> bag.base_seed))
                have[1] = true;
            else if (key == "count" && (fields >> count))
                have[2] = true;
            else
                throw ParseError(line, "unrecognized manifest header");
            continue;
        }
        bag.ids.push_back(text);
    }
    if (!(have[0] && have[1] && have[2]))
        throw ParseError(0, "manifest header incomplete");
    if (count != bag.ids.size())
        throw ValidationError("manifest count " + std::to_string(count) + " does not match " +
                              std::to_string(bag.ids.size()) + " listed ids");
    return bag;
}

inline std::vector<std::string> parse_id_list(std::istream& in)
{
    std::vector<std::string> ids;
    std::string text;
    while (std::getline(in, text)) {
        if (detail::is_blank(text) || text.front() == '#')
            continue;
        if (text.back() == '\r')
            text.pop_back();
        ids.push_back(text);
    }
    return ids;
}

inline PredictionMatrix parse_predictions(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (detail::is_blank(text) || text.front() == '#')
            continue;
        std::istringstream fields(text);
        std::vector<double> row;
        std::string token;
        while (fields >> token) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(token, &used));
                if (used != token.size())
                    throw std::invalid_argument(token);
            } catch (const std::exception&) {
                throw ParseError(line, "not a number: '" + token + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(line, "row width differs from the first row");
        if (row.size() < 6)
            throw ParseError(line, "a row needs at least 2 confidences and 4 offsets");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw EmptyInput("prediction file contains no rows");

    const int classes = static_cast<int>(rows.front().size()) - 4;
    PredictionMatrix pred(rows.size(), classes);
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), pred.values().begin() + static_cast<std::ptrdiff_t>(r * pred.stride()));
    return pred;
}

inline void write_predictions(std::ostream& out, const PredictionMatrix& pred)
{
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t q = 0; q < pred.stride(); ++q)
            out << (q ? " " : "") << fixed9(pred.values()[r * pred.stride() + q]);
        out << '\n';
    }
}

} // namespace ssdkit
