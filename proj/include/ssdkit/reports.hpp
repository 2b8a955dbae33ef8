#pragma once

/**
 * @file ssdkit/reports.hpp
 * @brief Tab-separated text reports emitted by the CLI, plus the eval report
 *        reader used by `compare`.
 *
 * All reals are printed with 9 decimals except percent improvements (1
 * decimal). Lines starting with '#' are comments.
 */

#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssdkit/distribution.hpp"
#include "ssdkit/evaluation.hpp"
#include "ssdkit/io.hpp"
#include "ssdkit/training.hpp"

namespace ssdkit {

inline std::string fixed1(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", v == 0.0 ? 0.0 : v);
    return buf;
}

inline void write_stats_report(std::ostream& out, const ClassStats& stats)
{
    out << "# class statistics\n"
        << "label\tcount\tpercent\n";
    for (const auto& c : stats.classes)
        out << c.label << '\t' << c.count << '\t' << fixed9(c.percent) << '\n';
    out << "total\t" << stats.total << '\t' << fixed9(stats.total ? 100.0 : 0.0) << '\n';
}

struct RatioReport {
    std::size_t samples = 0;
    ResolvedBins bins{0.0, 1.0};
    RepresentativeRatios ratios;
    std::vector<double> adaptive_set;
};

inline void write_ratios_block(std::ostream& out, const RatioReport& r)
{
    out << "samples\t" << r.samples << '\n'
        << "bin_origin\t" << fixed9(r.bins.origin) << '\n'
        << "bin_width\t" << fixed9(r.bins.bin_width) << '\n'
        << "mode\t" << fixed9(r.ratios.mode) << '\n'
        << "mean\t" << fixed9(r.ratios.mean) << '\n'
        << "median\t" << fixed9(r.ratios.median) << '\n'
        << "q1\t" << fixed9(r.ratios.first_quartile) << '\n'
        << "q3\t" << fixed9(r.ratios.third_quartile) << '\n'
        << "set";
    for (double v : r.adaptive_set)
        out << '\t' << fixed9(v);
    out << '\n';
}

// Reads the "set" line of a ratios report (or a bare list of numbers).
inline std::vector<double> parse_ratio_set(std::istream& in)
{
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        std::istringstream fields(text);
        std::string key;
        if (!(fields >> key) || key != "set")
            continue;
        std::vector<double> ratios;
        double v = 0.0;
        while (fields >> v)
            ratios.push_back(v);
        if (!fields.eof() || ratios.empty())
            throw ParseError(line, "malformed ratio set");
        return ratios;
    }
    throw ParseError(0, "no 'set' line in ratio file");
}

struct ImageMatchReport {
    std::string image_id;
    MatchResult match;
    std::vector<std::string> gt_labels;
};

inline void write_match_report(std::ostream& out, const std::vector<ImageMatchReport>& images)
{
    out << "# image\tanchors\tpositives\tnegatives\n"
        << "# gt\tindex\tlabel\tbest_iou\n";
    for (const auto& img : images) {
        out << "image\t" << img.image_id << '\t' << img.match.num_anchors << '\t' << img.match.num_positive() << '\t'
            << img.match.negatives.size() << '\n';
        for (std::size_t g = 0; g < img.gt_labels.size(); ++g)
            out << "gt\t" << g << '\t' << img.gt_labels[g] << '\t' << fixed9(img.match.gt_best_iou[g]) << '\n';
    }
}

inline void write_loss_report(std::ostream& out, const LossBreakdown& loss)
{
    out << "positives\t" << loss.num_positive << '\n'
        << "mined_negatives\t" << loss.num_mined << '\n'
        << "classification\t" << fixed9(loss.classification) << '\n'
        << "localization\t" << fixed9(loss.localization) << '\n'
        << "total\t" << fixed9(loss.total) << '\n';
}

inline void write_eval_report(std::ostream& out, const EvalReport& report, const EvalConfig& config)
{
    out << "# iou_threshold " << fixed9(config.iou_threshold) << " interpolation "
        << (config.interpolation == Interpolation::all_point ? "all-point" : "11-point") << '\n'
        << "label\tgt\ttp\tfp\tap\tnote\n";
    for (const auto& c : report.classes) {
        out << c.label << '\t' << c.num_gt << '\t' << c.true_positives << '\t' << c.false_positives << '\t'
            << (c.evaluable ? fixed9(c.ap) : "-") << '\t' << (c.evaluable ? "-" : "no-gt") << '\n';
    }
    out << "mAP\t" << fixed9(report.map) << '\n';
}

inline void write_eval_json(std::ostream& out, const EvalReport& report, const EvalConfig& config)
{
    nlohmann::ordered_json j;
    j["iou_threshold"] = config.iou_threshold;
    j["interpolation"] = config.interpolation == Interpolation::all_point ? "all-point" : "11-point";
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : report.classes) {
        nlohmann::ordered_json row;
        row["label"] = c.label;
        row["gt"] = c.num_gt;
        row["tp"] = c.true_positives;
        row["fp"] = c.false_positives;
        row["ap"] = c.evaluable ? nlohmann::ordered_json(c.ap) : nlohmann::ordered_json(nullptr);
        row["evaluable"] = c.evaluable;
        j["classes"].push_back(std::move(row));
    }
    j["mAP"] = report.map;
    out << j.dump(2) << '\n';
}

// What `compare` needs from an eval report.
struct ReportSummary {
    double map = 0.0;
    std::map<std::string, double> class_ap; // evaluable classes only
};

inline ReportSummary parse_eval_report(std::istream& in)
{
    ReportSummary summary;
    bool have_map = false;
    bool header_seen = false;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty() || text.front() == '#')
            continue;
        std::vector<std::string> cols;
        std::istringstream fields(text);
        for (std::string col; std::getline(fields, col, '\t');)
            cols.push_back(col);
        if (!header_seen) {
            if (cols.empty() || cols[0] != "label")
                throw ParseError(line, "expected eval report header");
            header_seen = true;
            continue;
        }
        try {
            if (cols.size() == 2 && cols[0] == "mAP") {
                summary.map = std::stod(cols[1]);
                have_map = true;
            } else if (cols.size() == 6) {
                if (cols[4] != "-")
                    summary.class_ap[cols[0]] = std::stod(cols[4]);
            } else {
                throw ParseError(line, "unexpected eval report row");
            }
        } catch (const std::invalid_argument&) {
            throw ParseError(line, "non-numeric value in eval report");
        }
    }
    if (!have_map)
        throw ParseError(0, "eval report has no mAP row");
    return summary;
}

struct NamedRun {
    std::string name;
    ReportSummary summary;
};

// Comparison table: one column per run, class AP rows, mAP, % improvement.
inline void write_comparison(std::ostream& out, const std::vector<NamedRun>& runs, const std::string& baseline)
{
    std::vector<RunResult> maps;
    std::map<std::string, bool> labels;
    for (const auto& r : runs) {
        maps.push_back({r.name, r.summary.map});
        for (const auto& entry : r.summary.class_ap)
            labels[entry.first] = true;
    }
    const auto rows = compare_runs(maps, baseline);

    out << "class";
    for (const auto& r : runs)
        out << '\t' << r.name;
    out << '\n';
    for (const auto& entry : labels) {
        out << entry.first;
        for (const auto& r : runs) {
            const auto it = r.summary.class_ap.find(entry.first);
            out << '\t' << (it != r.summary.class_ap.end() ? fixed9(it->second) : "-");
        }
        out << '\n';
    }
    out << "mAP";
    for (const auto& row : rows)
        out << '\t' << fixed9(row.map);
    out << "\n% improvement";
    for (const auto& row : rows)
        out << '\t' << (row.name == baseline ? "-" : fixed1(row.improvement));
    out << '\n';
}

} // namespace ssdkit
