#pragma once

// PASCAL VOC XML annotation reader. Only the tags needed for a
// GroundTruthRecord are read; everything else is ignored.

#include <filesystem>
#include <fstream>
#include <istream>
#include <string>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "ssdkit/errors.hpp"
#include "ssdkit/records.hpp"

namespace ssdkit {

// `fallback_id` names the record when the XML has no usable <filename>.
inline GroundTruthRecord parse_voc_xml(std::istream& in, const std::string& fallback_id)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(e.line(), std::string("malformed XML: ") + e.message());
    }

    const auto root = tree.get_child_optional("annotation");
    if (!root)
        throw ParseError(0, "missing <annotation> root element");

    GroundTruthRecord rec;
    try {
        // Image ids are file stems: "site_9.jpg" becomes "site_9".
        const auto filename = root->get_optional<std::string>("filename");
        rec.image_id = filename ? std::filesystem::path(*filename).stem().string() : fallback_id;
        if (rec.image_id.empty())
            rec.image_id = fallback_id;
        rec.width = root->get<int>("size.width");
        rec.height = root->get<int>("size.height");
        for (const auto& [tag, node] : *root) {
            if (tag != "object")
                continue;
            GroundTruthObject obj;
            obj.label = node.get<std::string>("name");
            obj.box = PixelBox(node.get<double>("bndbox.xmin"), node.get<double>("bndbox.ymin"),
                               node.get<double>("bndbox.xmax"), node.get<double>("bndbox.ymax"));
            rec.objects.push_back(std::move(obj));
        }
    } catch (const pt::ptree_error& e) {
        throw ParseError(0, std::string("VOC annotation '") + fallback_id + "': " + e.what());
    } catch (const InvalidArgument& e) {
        throw ValidationError(std::string("VOC annotation '") + fallback_id + "': " + e.what());
    }
    rec.validate();
    return rec;
}

inline GroundTruthRecord parse_voc_xml(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");
    try {
        return parse_voc_xml(in, std::filesystem::path(path).stem().string());
    } catch (const ParseError& e) {
        throw ParseError(0, path + ": " + e.what());
    }
}

} // namespace ssdkit
