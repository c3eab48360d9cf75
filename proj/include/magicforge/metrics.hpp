#pragma once

#include <map>
#include <string>
#include <vector>

#include "magicforge/losses.hpp"
#include "magicforge/rng.hpp"
#include "magicforge/types.hpp"

namespace magicforge {

inline constexpr int kBackgroundLabel = -1;

// Per-pixel category labels; kBackgroundLabel marks background.
struct LabelGrid {
    int width = 0, height = 0;
    std::vector<int> labels;

    LabelGrid() = default;
    LabelGrid(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, kBackgroundLabel) {}
};

// Argmax over planes with a background threshold: background unless the best
// score reaches bg_threshold; score ties go to the lowest category id.
// category_ids maps plane index -> global category id.
LabelGrid assign_labels(const Tensor3& pred, const std::vector<int>& category_ids,
                        double bg_threshold);

struct MetricReport {
    std::map<int, double> per_category_iou;  // only categories with nonzero union
    double mean_iou = 0.0;
    std::size_t images = 0;
    bool background_excluded_from_mean = true;

    json to_json(const Vocabulary* vocab = nullptr) const;
};

// Dataset-wide intersection/union counters, mergeable across workers.
struct ConfusionAccumulator {
    std::map<int, std::uint64_t> intersection;
    std::map<int, std::uint64_t> union_;
    std::size_t images = 0;

    void add(const LabelGrid& pred, const LabelGrid& gt, const std::vector<int>& categories);
    // Point-sampled variant over the given pixel indices only.
    void add_points(const LabelGrid& pred, const LabelGrid& gt, const std::vector<int>& categories,
                    const std::vector<std::size_t>& points);
    void merge(const ConfusionAccumulator& other);
    MetricReport report() const;
};

MetricReport miou(const std::vector<LabelGrid>& pred, const std::vector<LabelGrid>& gt,
                  const std::vector<int>& categories);

// Stratified point-sampled mIoU: each gt category present in an image (the
// background included) receives ceil(K / #present) points, capped by its pixel
// count; K >= all pixels degenerates to exhaustive evaluation.
MetricReport p_miou(const std::vector<LabelGrid>& pred, const std::vector<LabelGrid>& gt,
                    const std::vector<int>& categories, std::size_t points_per_image, Rng& rng);

// Label grid from per-category binary masks; overlapping masks resolve to the
// lowest category id.
LabelGrid label_grid_from_masks(const std::vector<ClassMask>& masks);

}  // namespace magicforge
