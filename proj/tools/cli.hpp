#pragma once

// Command-line front end. run() is the whole program minus main(), so the
// test suites can drive every subcommand in-process.
//
// Exit status: 0 success, 1 data/validation error, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssdkit/ssdkit.hpp"
#include "ssdkit/voc.hpp"

namespace ssdkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

// Writes to the -o path when given, else to the fallback stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback)
    {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(open_output(path));
            stream_ = file_.get();
        } else {
            stream_ = &fallback;
        }
    }

    std::ostream& operator*() { return *stream_; }

    void finish()
    {
        stream_->flush();
        if (!*stream_)
            throw IoError("write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

// Labels in sorted order unless given explicitly; index = position + 1.
inline std::map<std::string, int> class_indices(const Dataset& dataset, const std::vector<std::string>& explicit_labels)
{
    std::vector<std::string> labels = explicit_labels;
    if (labels.empty()) {
        for (const auto& c : class_stats(dataset).classes)
            labels.push_back(c.label);
    }
    std::map<std::string, int> out;
    for (const auto& label : labels)
        if (!out.emplace(label, static_cast<int>(out.size()) + 1).second)
            throw InvalidArgument("duplicate label '" + label + "' in --labels");
    return out;
}

inline std::vector<GroundTruthBox> image_gts(const GroundTruthRecord& rec, const std::map<std::string, int>& classes)
{
    std::vector<GroundTruthBox> gts;
    for (std::size_t o = 0; o < rec.objects.size(); ++o) {
        const auto it = classes.find(rec.objects[o].label);
        if (it == classes.end())
            throw ValidationError("image '" + rec.image_id + "': label '" + rec.objects[o].label +
                                  "' missing from the class list");
        gts.push_back({rec.normalized(o), it->second});
    }
    return gts;
}

inline std::vector<std::string> image_ids(const Dataset& dataset)
{
    std::vector<std::string> ids;
    for (const auto& rec : dataset)
        ids.push_back(rec.image_id);
    return ids;
}

inline void write_ids(std::ostream& out, const std::vector<std::string>& ids)
{
    for (const auto& id : ids)
        out << id << '\n';
}

inline std::pair<std::string, std::string> split_assignment(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        return {std::filesystem::path(text).stem().string(), text};
    return {text.substr(0, eq), text.substr(eq + 1)};
}

} // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Detection geometry, adaptive default boxes, bagging/fusion and mAP tooling", "ssdkit"};
    app.require_subcommand(1);
    std::function<void()> action;

    // stats
    std::string stats_ann, stats_out;
    auto* stats = app.add_subcommand("stats", "Per-class object counts and percentages");
    stats->add_option("annotations", stats_ann, "Annotation file (JSON Lines)")->required();
    stats->add_option("-o,--output", stats_out, "Output path (default stdout)");
    stats->callback([&] {
        action = [&] {
            const auto dataset = parse_annotations(stats_ann);
            detail::Sink sink(stats_out, out);
            write_stats_report(*sink, class_stats(dataset));
            sink.finish();
        };
    });

    // ratios
    std::string ratios_ann, ratios_out;
    std::optional<double> ratios_origin, ratios_width;
    bool ratios_per_class = false;
    auto* ratios = app.add_subcommand("ratios", "Representative aspect ratios and the adaptive ratio set");
    ratios->add_option("annotations", ratios_ann, "Annotation file (JSON Lines)")->required();
    ratios->add_option("--origin", ratios_origin, "Histogram origin x0 (default: min sample)");
    ratios->add_option("--bin-width", ratios_width, "Histogram bin width h (default: Freedman-Diaconis)")
        ->check(CLI::PositiveNumber);
    ratios->add_flag("--per-class", ratios_per_class, "Also report each class separately");
    ratios->add_option("-o,--output", ratios_out, "Output path (default stdout)");
    ratios->callback([&] {
        action = [&] {
            const auto dataset = parse_annotations(ratios_ann);
            const BinSettings settings{ratios_origin, ratios_width};
            const auto report_for = [&](const std::vector<double>& samples) {
                RatioReport r;
                r.samples = samples.size();
                r.bins = resolve_bin_settings(samples, settings);
                r.ratios = representative_ratios(samples, settings);
                r.adaptive_set = adaptive_ratio_set(samples, settings);
                return r;
            };
            const auto pooled = aspect_ratios(dataset);
            if (pooled.empty())
                throw EmptyInput("no ground-truth objects with positive size");
            detail::Sink sink(ratios_out, out);
            *sink << "# pooled over all classes\n";
            write_ratios_block(*sink, report_for(pooled));
            if (ratios_per_class) {
                for (const auto& c : class_stats(dataset).classes) {
                    const auto samples = aspect_ratios(dataset, c.label);
                    if (samples.empty())
                        continue;
                    *sink << "# class " << c.label << '\n';
                    const auto r = report_for(samples);
                    *sink << "class\t" << c.label << '\t' << fixed9(r.ratios.mode) << '\t' << fixed9(r.ratios.mean)
                          << '\t' << fixed9(r.ratios.median) << '\t' << fixed9(r.ratios.first_quartile) << '\t'
                          << fixed9(r.ratios.third_quartile) << '\n';
                }
            }
            sink.finish();
        };
    });

    // anchors
    int anchors_maps = 0;
    std::vector<int> anchors_sizes;
    double anchors_smin = 0.2, anchors_smax = 0.9;
    std::vector<double> anchors_ratios;
    std::string anchors_ratio_file, anchors_out;
    auto* anchors = app.add_subcommand("anchors", "Generate the default-box set");
    anchors->add_option("--maps", anchors_maps, "Number of feature maps m")->required()->check(CLI::PositiveNumber);
    anchors->add_option("--sizes", anchors_sizes, "Feature map sizes f_1..f_m")->required()->delimiter(',');
    anchors->add_option("--smin", anchors_smin, "Minimum scale")->capture_default_str();
    anchors->add_option("--smax", anchors_smax, "Maximum scale")->capture_default_str();
    auto* ratio_list = anchors->add_option("--ratios", anchors_ratios, "Fixed aspect ratio set")->delimiter(',');
    anchors->add_option("--ratio-file", anchors_ratio_file, "Adaptive ratio set from a `ratios` report")
        ->excludes(ratio_list);
    anchors->add_option("-o,--output", anchors_out, "Output path (default stdout)");
    anchors->callback([&] {
        if (anchors_sizes.size() != static_cast<std::size_t>(anchors_maps))
            throw CLI::ValidationError("--sizes", "expected " + std::to_string(anchors_maps) + " sizes");
        action = [&] {
            AnchorConfig config;
            config.s_min = anchors_smin;
            config.s_max = anchors_smax;
            config.feature_map_sizes = anchors_sizes;
            if (!anchors_ratio_file.empty()) {
                auto in = open_input(anchors_ratio_file);
                config.ratios = parse_ratio_set(in);
                config.mode = RatioMode::adaptive;
            } else if (!anchors_ratios.empty()) {
                config.ratios = anchors_ratios;
            }
            detail::Sink sink(anchors_out, out);
            write_anchor_file(*sink, generate_default_boxes(config));
            sink.finish();
        };
    });

    // match
    std::string match_ann, match_anchors, match_out;
    std::vector<std::string> match_labels;
    MatchConfig match_cfg;
    auto* match = app.add_subcommand("match", "Match default boxes to ground truth for every image");
    match->add_option("annotations", match_ann, "Annotation file (JSON Lines)")->required();
    match->add_option("--anchors", match_anchors, "Anchor file from `anchors`")->required();
    match->add_option("--tau", match_cfg.threshold, "Jaccard overlap threshold")->capture_default_str();
    match->add_flag("--force-best", match_cfg.force_best_match, "Each GT also claims its best anchor");
    match->add_option("--labels", match_labels, "Class order (default: sorted labels)")->delimiter(',');
    match->add_option("-o,--output", match_out, "Output path (default stdout)");
    match->callback([&] {
        action = [&] {
            const auto dataset = parse_annotations(match_ann);
            const auto corners = anchor_corners(parse_anchor_file(match_anchors));
            const auto classes = detail::class_indices(dataset, match_labels);
            const int n = static_cast<int>(classes.size()) + 1;
            std::vector<ImageMatchReport> images;
            for (const auto& rec : dataset) {
                ImageMatchReport img;
                img.image_id = rec.image_id;
                for (const auto& obj : rec.objects)
                    img.gt_labels.push_back(obj.label);
                const auto gts = detail::image_gts(rec, classes);
                img.match = match_boxes(corners, gts, n, match_cfg);
                images.push_back(std::move(img));
            }
            detail::Sink sink(match_out, out);
            write_match_report(*sink, images);
            sink.finish();
        };
    });

    // loss
    std::string loss_ann, loss_anchors, loss_pred, loss_image, loss_out;
    std::vector<std::string> loss_labels;
    MatchConfig loss_match_cfg;
    LossConfig loss_cfg;
    auto* loss = app.add_subcommand("loss", "Evaluate the multibox loss of one image's predictions");
    loss->add_option("annotations", loss_ann, "Annotation file (JSON Lines)")->required();
    loss->add_option("--anchors", loss_anchors, "Anchor file from `anchors`")->required();
    loss->add_option("--pred", loss_pred, "Prediction file: n confidences + 4 offsets per row")->required();
    loss->add_option("--image", loss_image, "Image id (default: first record)");
    loss->add_option("--tau", loss_match_cfg.threshold, "Jaccard overlap threshold")->capture_default_str();
    loss->add_flag("--force-best", loss_match_cfg.force_best_match, "Each GT also claims its best anchor");
    loss->add_option("--neg-ratio", loss_match_cfg.neg_pos_ratio, "Negative:positive ratio")->capture_default_str();
    loss->add_option("--alpha", loss_cfg.alpha, "Localization weight")->capture_default_str();
    loss->add_option("--labels", loss_labels, "Class order (default: sorted labels)")->delimiter(',');
    loss->add_option("-o,--output", loss_out, "Output path (default stdout)");
    loss->callback([&] {
        action = [&] {
            const auto dataset = parse_annotations(loss_ann);
            if (dataset.empty())
                throw EmptyInput("annotation file is empty");
            const auto rec = loss_image.empty()
                                 ? dataset.begin()
                                 : std::find_if(dataset.begin(), dataset.end(),
                                                [&](const auto& r) { return r.image_id == loss_image; });
            if (rec == dataset.end())
                throw ValidationError("image '" + loss_image + "' not in the annotation file");
            const auto corners = anchor_corners(parse_anchor_file(loss_anchors));
            auto pred_in = open_input(loss_pred);
            const auto pred = parse_predictions(pred_in);
            pred.validate_probabilities();
            const auto classes = detail::class_indices(dataset, loss_labels);
            const int n = static_cast<int>(classes.size()) + 1;
            if (pred.num_classes() != n)
                throw ValidationError("prediction file has " + std::to_string(pred.num_classes()) +
                                      " confidences per row; expected " + std::to_string(n));
            const auto gts = detail::image_gts(*rec, classes);
            const auto result = match_boxes(corners, gts, n, loss_match_cfg);
            detail::Sink sink(loss_out, out);
            write_loss_report(*sink, evaluate_loss(pred, result, corners, loss_cfg, loss_match_cfg.neg_pos_ratio));
            sink.finish();
        };
    });

    // split
    std::string split_ann, split_train, split_test;
    double split_fraction = 0.2;
    std::uint64_t split_seed = 0;
    auto* split = app.add_subcommand("split", "Seeded train/test split of image ids");
    split->add_option("annotations", split_ann, "Annotation file (JSON Lines)")->required();
    split->add_option("--fraction", split_fraction, "Test fraction")->capture_default_str();
    split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
    split->add_option("--train", split_train, "Write train ids here");
    split->add_option("--test", split_test, "Write test ids here");
    split->callback([&] {
        action = [&] {
            const auto ids = detail::image_ids(parse_annotations(split_ann));
            const auto parts = split_train_test(ids, split_fraction, split_seed);
            if (split_train.empty() && split_test.empty()) {
                for (const auto& id : parts.train)
                    out << "train\t" << id << '\n';
                for (const auto& id : parts.test)
                    out << "test\t" << id << '\n';
                return;
            }
            if (!split_train.empty()) {
                detail::Sink sink(split_train, out);
                detail::write_ids(*sink, parts.train);
                sink.finish();
            }
            if (!split_test.empty()) {
                detail::Sink sink(split_test, out);
                detail::write_ids(*sink, parts.test);
                sink.finish();
            }
        };
    });

    // bag
    std::string bag_source, bag_dir;
    int bag_count = 1;
    std::uint64_t bag_seed = 0;
    bool bag_from_ids = false;
    auto* bag = app.add_subcommand("bag", "Bootstrap bag manifests");
    bag->add_option("source", bag_source, "Annotation file, or an id list with --from-ids")->required();
    bag->add_option("-k,--bags", bag_count, "Number of bags")->capture_default_str()->check(CLI::PositiveNumber);
    bag->add_option("--seed", bag_seed, "Base seed")->capture_default_str();
    bag->add_flag("--from-ids", bag_from_ids, "Source is a plain list of image ids");
    bag->add_option("--out-dir", bag_dir, "Write bag_<i>.txt files here (default stdout)");
    bag->callback([&] {
        action = [&] {
            std::vector<std::string> ids;
            if (bag_from_ids) {
                auto in = open_input(bag_source);
                ids = parse_id_list(in);
            } else {
                ids = detail::image_ids(parse_annotations(bag_source));
            }
            const auto bags = make_bags(ids, bag_count, bag_seed);
            for (const auto& b : bags) {
                if (bag_dir.empty()) {
                    write_manifest(out, b);
                    continue;
                }
                std::filesystem::create_directories(bag_dir);
                const auto path = (std::filesystem::path(bag_dir) / ("bag_" + std::to_string(b.index) + ".txt")).string();
                detail::Sink sink(path, out);
                write_manifest(*sink, b);
                sink.finish();
            }
        };
    });

    // fuse
    std::vector<std::string> fuse_inputs;
    std::string fuse_out;
    FusionConfig fuse_cfg;
    std::uint64_t fuse_seed = 0;
    auto* fuse = app.add_subcommand("fuse", "Plurality-vote fusion of K detectors' outputs");
    fuse->add_option("detections", fuse_inputs, "One detection file per member")->required();
    fuse->add_option("--iou-cluster", fuse_cfg.iou_threshold, "Cluster IoU threshold")->capture_default_str();
    fuse->add_option("--min-votes", fuse_cfg.min_votes, "Drop clusters with fewer votes")->capture_default_str();
    fuse->add_option("--seed", fuse_seed, "Reserved; fusion is deterministic");
    fuse->add_option("-o,--output", fuse_out, "Output path (default stdout)");
    fuse->callback([&] {
        action = [&] {
            std::vector<DetectionsByImage> members;
            for (const auto& path : fuse_inputs) {
                const auto file = parse_detection_file(path);
                members.push_back(group_by_image(file.detections, file.image_ids));
            }
            const auto fused = fuse_detections(members, fuse_cfg);
            detail::Sink sink(fuse_out, out);
            write_fused(*sink, fused);
            sink.finish();
        };
    });

    // eval
    std::string eval_det, eval_ann, eval_out, eval_json, eval_interp = "all";
    EvalConfig eval_cfg;
    auto* eval = app.add_subcommand("eval", "Per-class AP and mAP");
    eval->add_option("detections", eval_det, "Detection file (JSON Lines)")->required();
    eval->add_option("annotations", eval_ann, "Annotation file (JSON Lines)")->required();
    eval->add_option("--iou", eval_cfg.iou_threshold, "True-positive IoU threshold")->capture_default_str();
    eval->add_option("--interp", eval_interp, "Interpolation: all or 11")->capture_default_str()->check(CLI::IsMember({"all", "11"}));
    eval->add_option("--json", eval_json, "Also write a JSON report here");
    eval->add_option("-o,--output", eval_out, "Output path (default stdout)");
    eval->callback([&] {
        action = [&] {
            eval_cfg.interpolation = eval_interp == "11" ? Interpolation::eleven_point : Interpolation::all_point;
            const auto dataset = parse_annotations(eval_ann);
            const auto detections = parse_detections(eval_det);
            std::map<std::string, const GroundTruthRecord*> by_id;
            for (const auto& rec : dataset)
                by_id[rec.image_id] = &rec;
            for (const auto& det : detections) {
                const auto it = by_id.find(det.image_id);
                if (it != by_id.end() && !det.box.inside(it->second->width, it->second->height))
                    throw ValidationError("detection in '" + det.image_id + "' lies outside the image");
            }
            const auto report = evaluate(dataset, detections, eval_cfg);
            detail::Sink sink(eval_out, out);
            write_eval_report(*sink, report, eval_cfg);
            sink.finish();
            if (!eval_json.empty()) {
                detail::Sink json_sink(eval_json, out);
                write_eval_json(*json_sink, report, eval_cfg);
                json_sink.finish();
            }
        };
    });

    // compare
    std::vector<std::string> compare_reports, compare_values;
    std::string compare_baseline, compare_out;
    auto* compare = app.add_subcommand("compare", "Table of runs with % improvement over a baseline");
    compare->add_option("reports", compare_reports, "Eval reports as NAME=PATH (or PATH; name = file stem)");
    compare->add_option("--value", compare_values, "Literal mAP as NAME=VALUE");
    compare->add_option("--baseline", compare_baseline, "Name of the baseline run")->required();
    compare->add_option("-o,--output", compare_out, "Output path (default stdout)");
    compare->callback([&] {
        if (compare_reports.empty() && compare_values.empty())
            throw CLI::ValidationError("compare", "give at least one report or --value");
        action = [&] {
            std::vector<NamedRun> runs;
            for (const auto& spec : compare_reports) {
                const auto [name, path] = detail::split_assignment(spec);
                auto in = open_input(path);
                runs.push_back({name, parse_eval_report(in)});
            }
            for (const auto& spec : compare_values) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos || eq == 0)
                    throw InvalidArgument("--value expects NAME=VALUE, got '" + spec + "'");
                NamedRun run{spec.substr(0, eq), {}};
                try {
                    run.summary.map = std::stod(spec.substr(eq + 1));
                } catch (const std::exception&) {
                    throw InvalidArgument("--value: not a number in '" + spec + "'");
                }
                runs.push_back(std::move(run));
            }
            detail::Sink sink(compare_out, out);
            write_comparison(*sink, runs, compare_baseline);
            sink.finish();
        };
    });

    // convert
    std::vector<std::string> convert_inputs;
    std::string convert_out;
    auto* convert = app.add_subcommand("convert", "PASCAL VOC XML files to the annotation format");
    convert->add_option("xml", convert_inputs, "VOC XML annotation files")->required();
    convert->add_option("-o,--output", convert_out, "Output path (default stdout)");
    convert->callback([&] {
        action = [&] {
            Dataset dataset;
            for (const auto& path : convert_inputs)
                dataset.push_back(parse_voc_xml(path));
            detail::Sink sink(convert_out, out);
            write_annotations(*sink, dataset);
            sink.finish();
        };
    });

    std::vector<const char*> argv;
    argv.push_back("ssdkit");
    for (const auto& a : args)
        argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (action)
            action();
        return kExitOk;
    } catch (const std::exception& e) {
        err << "ssdkit: error: " << e.what() << '\n';
        return kExitDataError;
    }
}

} // namespace ssdkit::cli
