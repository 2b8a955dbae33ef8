#pragma once

#include <string>
#include <vector>

#include "ssdkit/errors.hpp"
#include "ssdkit/geometry.hpp"

namespace ssdkit {

struct GroundTruthObject {
    std::string label;
    PixelBox box;

    friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

// One annotated image. Boxes are in absolute pixels; normalized() gives the
// [0,1] view used by the geometry code.
struct GroundTruthRecord {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<GroundTruthObject> objects;

    BoundingBox normalized(std::size_t object_index) const
    {
        return objects.at(object_index).box.normalized(width, height);
    }

    // Throws ValidationError naming the record on the first broken invariant.
    void validate() const
    {
        const auto fail = [&](const std::string& why) {
            throw ValidationError("record '" + image_id + "': " + why);
        };
        if (image_id.empty())
            fail("empty image_id");
        if (width <= 0 || height <= 0)
            fail("image dimensions must be positive");
        for (const auto& obj : objects) {
            if (obj.label.empty())
                fail("object with empty label");
            if (!obj.box.inside(width, height))
                fail("box of '" + obj.label + "' lies outside the image");
        }
    }

    friend bool operator==(const GroundTruthRecord&, const GroundTruthRecord&) = default;
};

using Dataset = std::vector<GroundTruthRecord>;

struct Detection {
    std::string image_id;
    std::string label;
    double score = 0.0;
    PixelBox box;

    void validate() const
    {
        if (image_id.empty())
            throw ValidationError("detection with empty image_id");
        if (label.empty())
            throw ValidationError("detection in '" + image_id + "' has empty label");
        if (!(score >= 0.0 && score <= 1.0))
            throw ValidationError("detection in '" + image_id + "' has score outside [0,1]");
        if (box.xmin() < 0.0 || box.ymin() < 0.0)
            throw ValidationError("detection in '" + image_id + "' has negative coordinates");
    }

    friend bool operator==(const Detection&, const Detection&) = default;
};

} // namespace ssdkit
