#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ssdkit/io.hpp"
#include "ssdkit/reports.hpp"
#include "ssdkit/voc.hpp"

using namespace ssdkit;

namespace {

template <class F>
std::size_t parse_error_line(F&& f)
{
    try {
        f();
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

} // namespace

TEST(Annotations, EmptyFile)
{
    std::istringstream in("");
    EXPECT_TRUE(parse_annotations(in).empty());
}

TEST(Annotations, OneRecord)
{
    std::istringstream in(R"({"image_id":"a","width":100,"height":50,"objects":[{"label":"truck","bbox":[1,2,30,40]}]})");
    const auto ds = parse_annotations(in);
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds[0].objects[0].label, "truck");
    const auto n = ds[0].normalized(0);
    EXPECT_DOUBLE_EQ(n.xmax(), 0.3);
    EXPECT_DOUBLE_EQ(n.ymax(), 0.8);
}

TEST(Annotations, InvertedBoxIsValidationError)
{
    std::istringstream in("{\"image_id\":\"a\",\"width\":100,\"height\":50,\"objects\":[]}\n"
                          "{\"image_id\":\"b\",\"width\":100,\"height\":50,"
                          "\"objects\":[{\"label\":\"x\",\"bbox\":[30,2,10,40]}]}\n");
    try {
        parse_annotations(in);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Annotations, OutOfBoundsNamesRecord)
{
    std::istringstream in(R"({"image_id":"far","width":10,"height":10,"objects":[{"label":"x","bbox":[0,0,11,5]}]})");
    try {
        parse_annotations(in);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("far"), std::string::npos);
    }
}

TEST(Annotations, MalformedLineNumbers)
{
    EXPECT_EQ(parse_error_line([] {
                  std::istringstream in("\n{\"image_id\":\"a\",\"width\":1,\"height\":1}\n{oops\n");
                  parse_annotations(in);
              }),
              3u);
    EXPECT_EQ(parse_error_line([] {
                  std::istringstream in("{\"image_id\":\"a\",\"height\":1}\n");
                  parse_annotations(in);
              }),
              1u);
    EXPECT_EQ(parse_error_line([] {
                  std::istringstream in("[1,2]\n");
                  parse_annotations(in);
              }),
              1u);
}

TEST(Annotations, DuplicateIdRejected)
{
    std::istringstream in("{\"image_id\":\"a\",\"width\":1,\"height\":1}\n{\"image_id\":\"a\",\"width\":1,\"height\":1}\n");
    EXPECT_THROW(parse_annotations(in), ValidationError);
}

TEST(Annotations, RoundTripExact)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset ds;
    for (int i = 0; i < 20; ++i) {
        GroundTruthRecord r{"img" + std::to_string(i), 640, 480, {}};
        for (int o = 0; o < i % 4; ++o) {
            const double x0 = u(rng) * 300, y0 = u(rng) * 200;
            r.objects.push_back({"c" + std::to_string(o), PixelBox(x0, y0, x0 + u(rng) * 300, y0 + u(rng) * 250)});
        }
        ds.push_back(r);
    }
    std::stringstream ss;
    write_annotations(ss, ds);
    EXPECT_EQ(parse_annotations(ss), ds);
}

TEST(Annotations, NormalizationRestoresPixels)
{
    const PixelBox p(13.3, 7.9, 501.2, 399.99);
    const auto back = to_pixels(p.normalized(640, 480), 640, 480);
    EXPECT_NEAR(back.xmin(), p.xmin(), 0.5);
    EXPECT_NEAR(back.ymax(), p.ymax(), 0.5);
}

TEST(Annotations, BundledToyDataset)
{
    const auto ds = parse_annotations(std::string(SSDKIT_DATA_DIR) + "/toy/annotations.jsonl");
    EXPECT_EQ(ds.size(), 16u);
}

TEST(Detections, EmptyAndScoreOutOfRange)
{
    std::istringstream empty("");
    EXPECT_TRUE(parse_detections(empty).empty());
    std::istringstream bad(R"({"image_id":"a","label":"x","score":1.5,"bbox":[0,0,1,1]})");
    EXPECT_THROW(parse_detections(bad), ValidationError);
}

TEST(Detections, CoverageMarkersAndRoundTrip)
{
    const std::vector<Detection> dets{{"a", "x", 0.25, PixelBox(0, 0, 1.5, 2)}, {"c", "y", 1.0, PixelBox(3, 3, 4, 4)}};
    std::stringstream ss;
    write_detections(ss, dets);
    write_coverage_marker(ss, "b");
    const auto file = parse_detection_file(ss);
    EXPECT_EQ(file.detections, dets);
    EXPECT_EQ(file.image_ids, (std::vector<std::string>{"a", "c", "b"}));
}

TEST(Detections, PartialRecordIsParseError)
{
    std::istringstream in(R"({"image_id":"a","label":"x","bbox":[0,0,1,1]})");
    EXPECT_THROW(parse_detections(in), ParseError);
}

TEST(Anchors, FileRoundTrip)
{
    AnchorConfig c;
    c.feature_map_sizes = {3, 1};
    const auto boxes = generate_default_boxes(c);
    std::stringstream ss;
    write_anchor_file(ss, boxes);
    const auto back = parse_anchor_file(ss);
    ASSERT_EQ(back.size(), boxes.size());
    for (std::size_t a = 0; a < boxes.size(); ++a) {
        EXPECT_EQ(back[a].map, boxes[a].map);
        EXPECT_NEAR(jaccard(back[a].corner(), boxes[a].corner()), 1.0, 1e-6);
    }
}

TEST(Anchors, MalformedFile)
{
    std::istringstream short_row("0 0 0 1.0 0.2 0.5 0.5\n");
    EXPECT_THROW(parse_anchor_file(short_row), ParseError);
    std::istringstream empty("# nothing\n");
    EXPECT_THROW(parse_anchor_file(empty), EmptyInput);
}

TEST(Predictions, RoundTripAndErrors)
{
    PredictionMatrix p(2, 3);
    p.conf(0, 0) = 0.5;
    p.conf(0, 1) = 0.25;
    p.conf(0, 2) = 0.25;
    p.loc(1, 3) = -0.125;
    std::stringstream ss;
    write_predictions(ss, p);
    const auto back = parse_predictions(ss);
    EXPECT_EQ(back.rows(), 2u);
    EXPECT_EQ(back.num_classes(), 3);
    EXPECT_EQ(back.loc(1, 3), -0.125);

    std::istringstream ragged("0.5 0.5 0 0 0 0\n1 0 0 0 0\n");
    EXPECT_THROW(parse_predictions(ragged), ParseError);
    std::istringstream text("0.5 abc 0 0 0 0\n");
    EXPECT_THROW(parse_predictions(text), ParseError);
}

TEST(Manifest, CountMismatch)
{
    std::istringstream in("# bag 0\n# base_seed 1\n# count 3\na\nb\n");
    EXPECT_THROW(parse_manifest(in), ValidationError);
}

TEST(Fixed9, NoNegativeZero)
{
    EXPECT_EQ(fixed9(-0.0), "0.000000000");
    EXPECT_EQ(fixed9(-1e-12), "0.000000000");
    EXPECT_EQ(fixed9(0.5), "0.500000000");
}

TEST(Reports, EvalReportRoundTrip)
{
    EvalReport report;
    report.classes = {{"a", 0.25, 1, 3, 2, true}, {"b", 0.0, 0, 1, 0, false}};
    report.map = 0.25;
    std::stringstream ss;
    write_eval_report(ss, report, {});
    const auto summary = parse_eval_report(ss);
    EXPECT_DOUBLE_EQ(summary.map, 0.25);
    ASSERT_EQ(summary.class_ap.size(), 1u);
    EXPECT_DOUBLE_EQ(summary.class_ap.at("a"), 0.25);
}

TEST(Reports, RatioSetRoundTrip)
{
    RatioReport r;
    r.samples = 8;
    r.adaptive_set = {2, 3, 3.125, 4};
    std::stringstream ss;
    write_ratios_block(ss, r);
    EXPECT_EQ(parse_ratio_set(ss), r.adaptive_set);
}

TEST(Voc, ParsesObjects)
{
    std::istringstream xml(R"(<annotation>
  <filename>site_9.jpg</filename>
  <size><width>640</width><height>480</height><depth>3</depth></size>
  <object><name>truck</name><bndbox><xmin>10</xmin><ymin>20</ymin><xmax>110</xmax><ymax>220</ymax></bndbox></object>
  <object><name>worker</name><bndbox><xmin>300</xmin><ymin>100</ymin><xmax>340</xmax><ymax>200</ymax></bndbox></object>
</annotation>)");
    const auto r = parse_voc_xml(xml, "fallback");
    EXPECT_EQ(r.image_id, "site_9");
    EXPECT_EQ(r.width, 640);
    ASSERT_EQ(r.objects.size(), 2u);
    EXPECT_EQ(r.objects[1].label, "worker");
    EXPECT_EQ(r.objects[0].box, PixelBox(10, 20, 110, 220));
}

TEST(Voc, MissingSizeIsError)
{
    std::istringstream xml("<annotation><filename>x.jpg</filename></annotation>");
    EXPECT_ANY_THROW(parse_voc_xml(xml, "x"));
}
