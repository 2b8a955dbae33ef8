// Compares the fixed and adaptive default-box sets for an annotation file.
//
//   adaptive_anchors data/toy/annotations.jsonl

#include <iostream>

#include "ssdkit/ssdkit.hpp"

int main(int argc, char** argv)
{
    if (argc != 2) {
        std::cerr << "usage: adaptive_anchors <annotations.jsonl>\n";
        return 2;
    }
    try {
        const auto dataset = ssdkit::parse_annotations(argv[1]);
        const auto samples = ssdkit::aspect_ratios(dataset);
        const auto rep = ssdkit::representative_ratios(samples);
        std::cout << "objects: " << samples.size() << '\n'
                  << "mode " << rep.mode << "  mean " << rep.mean << "  median " << rep.median
                  << "  q1 " << rep.first_quartile << "  q3 " << rep.third_quartile << '\n';

        ssdkit::AnchorConfig fixed;
        fixed.feature_map_sizes = {19, 10, 5, 3, 2, 1};
        ssdkit::AnchorConfig adaptive = fixed;
        adaptive.ratios = ssdkit::adaptive_ratio_set(std::span<const double>(samples));
        adaptive.mode = ssdkit::RatioMode::adaptive;

        std::cout << "adaptive ratios:";
        for (double r : adaptive.ratios)
            std::cout << ' ' << r;
        std::cout << '\n';

        // Mean best IoU of every ground-truth box against each anchor set.
        for (const auto* config : {&fixed, &adaptive}) {
            const auto anchors = ssdkit::anchor_corners(ssdkit::generate_default_boxes(*config));
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& rec : dataset)
                for (std::size_t o = 0; o < rec.objects.size(); ++o) {
                    const auto gt = rec.normalized(o);
                    double best = 0.0;
                    for (const auto& a : anchors)
                        best = std::max(best, ssdkit::jaccard(a, gt));
                    sum += best;
                    ++n;
                }
            std::cout << (config == &fixed ? "fixed   " : "adaptive") << "  boxes " << anchors.size()
                      << "  mean best IoU " << (n ? sum / n : 0.0) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
