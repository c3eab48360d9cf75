#include "magicforge/metrics.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace magicforge {

LabelGrid assign_labels(const Tensor3& pred, const std::vector<int>& category_ids,
                        double bg_threshold) {
    if (static_cast<std::size_t>(pred.planes) != category_ids.size())
        throw std::invalid_argument("assign_labels: plane count does not match category ids");
    LabelGrid grid(pred.width, pred.height);
    const std::size_t plane_size = static_cast<std::size_t>(pred.height) * pred.width;
    for (std::size_t k = 0; k < plane_size; ++k) {
        double best = -1.0;
        int best_id = kBackgroundLabel;
        for (int p = 0; p < pred.planes; ++p) {
            const double s = pred.v[static_cast<std::size_t>(p) * plane_size + k];
            const int id = category_ids[static_cast<std::size_t>(p)];
            if (s > best || (s == best && id < best_id)) {
                best = s;
                best_id = id;
            }
        }
        grid.labels[k] = (best >= bg_threshold) ? best_id : kBackgroundLabel;
    }
    return grid;
}

void ConfusionAccumulator::add(const LabelGrid& pred, const LabelGrid& gt,
                               const std::vector<int>& categories) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("miou: pred/gt dimension mismatch");
    for (std::size_t k = 0; k < gt.labels.size(); ++k) {
        const int pl = pred.labels[k];
        const int gl = gt.labels[k];
        if (pl == gl) {
            if (pl != kBackgroundLabel) {
                ++intersection[pl];
                ++union_[pl];
            }
        } else {
            if (pl != kBackgroundLabel) ++union_[pl];
            if (gl != kBackgroundLabel) ++union_[gl];
        }
    }
    for (int c : categories) {
        intersection.try_emplace(c, 0);
        union_.try_emplace(c, 0);
    }
    ++images;
}

void ConfusionAccumulator::add_points(const LabelGrid& pred, const LabelGrid& gt,
                                      const std::vector<int>& categories,
                                      const std::vector<std::size_t>& points) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("p_miou: pred/gt dimension mismatch");
    for (std::size_t k : points) {
        const int pl = pred.labels[k];
        const int gl = gt.labels[k];
        if (pl == gl) {
            if (pl != kBackgroundLabel) {
                ++intersection[pl];
                ++union_[pl];
            }
        } else {
            if (pl != kBackgroundLabel) ++union_[pl];
            if (gl != kBackgroundLabel) ++union_[gl];
        }
    }
    for (int c : categories) {
        intersection.try_emplace(c, 0);
        union_.try_emplace(c, 0);
    }
    ++images;
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
    for (const auto& [c, v] : other.intersection) intersection[c] += v;
    for (const auto& [c, v] : other.union_) union_[c] += v;
    images += other.images;
}

MetricReport ConfusionAccumulator::report() const {
    MetricReport rep;
    rep.images = images;
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [c, u] : union_) {
        if (u == 0) continue;  // absent from both gt and pred
        auto it = intersection.find(c);
        const double iou = static_cast<double>(it == intersection.end() ? 0 : it->second) /
                           static_cast<double>(u);
        rep.per_category_iou[c] = iou;
        sum += iou;
        ++count;
    }
    rep.mean_iou = count ? sum / static_cast<double>(count) : 0.0;
    return rep;
}

MetricReport miou(const std::vector<LabelGrid>& pred, const std::vector<LabelGrid>& gt,
                  const std::vector<int>& categories) {
    if (pred.size() != gt.size()) throw std::invalid_argument("miou: image count mismatch");
    ConfusionAccumulator acc;
    for (std::size_t i = 0; i < pred.size(); ++i) acc.add(pred[i], gt[i], categories);
    return acc.report();
}

MetricReport p_miou(const std::vector<LabelGrid>& pred, const std::vector<LabelGrid>& gt,
                    const std::vector<int>& categories, std::size_t points_per_image, Rng& rng) {
    if (pred.size() != gt.size()) throw std::invalid_argument("p_miou: image count mismatch");
    if (points_per_image == 0) throw std::invalid_argument("p_miou: need at least one point");
    ConfusionAccumulator acc;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto& g = gt[i];
        const std::size_t total = g.labels.size();
        if (total == 0) {
            std::cerr << "p_miou: skipping image " << i << " with zero annotated pixels\n";
            continue;
        }
        std::vector<std::size_t> points;
        if (points_per_image >= total) {
            points.resize(total);
            for (std::size_t k = 0; k < total; ++k) points[k] = k;
        } else {
            // Stratify per gt label present in this image.
            std::map<int, std::vector<std::size_t>> strata;
            for (std::size_t k = 0; k < total; ++k) strata[g.labels[k]].push_back(k);
            const std::size_t quota =
                (points_per_image + strata.size() - 1) / strata.size();
            for (auto& [label, pixels] : strata) {
                const std::size_t take = std::min(quota, pixels.size());
                for (std::size_t j = 0; j < take; ++j) {
                    std::size_t r = j + rng.below(pixels.size() - j);
                    std::swap(pixels[j], pixels[r]);
                    points.push_back(pixels[j]);
                }
            }
        }
        acc.add_points(pred[i], g, categories, points);
    }
    return acc.report();
}

LabelGrid label_grid_from_masks(const std::vector<ClassMask>& masks) {
    if (masks.empty()) throw std::invalid_argument("label_grid_from_masks: no masks");
    LabelGrid grid(masks.front().width, masks.front().height);
    // Iterate ids descending so the lowest id wins on overlap.
    std::vector<const ClassMask*> ordered;
    for (const auto& m : masks) ordered.push_back(&m);
    std::sort(ordered.begin(), ordered.end(),
              [](const ClassMask* a, const ClassMask* b) { return a->category_id > b->category_id; });
    for (const ClassMask* m : ordered) {
        if (m->width != grid.width || m->height != grid.height)
            throw std::invalid_argument("label_grid_from_masks: mask dimension mismatch");
        auto bits = rle_decode(*m);
        for (std::size_t k = 0; k < bits.size(); ++k)
            if (bits[k]) grid.labels[k] = m->category_id;
    }
    return grid;
}

json MetricReport::to_json(const Vocabulary* vocab) const {
    json j;
    j["mean_iou"] = mean_iou;
    j["images"] = images;
    j["background_excluded_from_mean"] = background_excluded_from_mean;
    json per = json::object();
    for (const auto& [c, iou] : per_category_iou) {
        std::string key = vocab ? vocab->name(c) : std::to_string(c);
        per[key] = iou;
    }
    j["per_category_iou"] = std::move(per);
    return j;
}

}  // namespace magicforge
