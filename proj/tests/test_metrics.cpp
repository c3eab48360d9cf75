#include <doctest.h>

#include <cmath>
#include <vector>

#include "magicforge/metrics.hpp"

using namespace magicforge;

namespace {

LabelGrid grid_from(const std::vector<int>& labels, int w, int h) {
    LabelGrid g(w, h);
    g.labels = labels;
    return g;
}

}  // namespace

TEST_CASE("assign_labels threshold behavior") {
    SUBCASE("all scores below a 0.95 threshold give background everywhere") {
        Tensor3 pred(2, 2, 2);
        for (auto& v : pred.v) v = 0.3;
        auto g = assign_labels(pred, {4, 7}, 0.95);
        for (auto l : g.labels) CHECK(l == kBackgroundLabel);
    }
    SUBCASE("a dominant plane claims every pixel") {
        Tensor3 pred(2, 2, 2);
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                pred.at(0, y, x) = 0.99;
                pred.at(1, y, x) = 0.01;
            }
        auto g = assign_labels(pred, {4, 7}, 0.95);
        for (auto l : g.labels) CHECK(l == 4);
    }
    SUBCASE("score ties go to the lowest category id") {
        Tensor3 pred(2, 1, 1);
        pred.at(0, 0, 0) = 0.97;
        pred.at(1, 0, 0) = 0.97;
        CHECK(assign_labels(pred, {9, 4}, 0.95).labels[0] == 4);
    }
}

TEST_CASE("assign_labels is scale-monotone toward background") {
    Tensor3 pred(2, 4, 4);
    Rng rng(55);
    for (auto& v : pred.v) v = rng.uniform(0.01, 0.99);
    auto before = assign_labels(pred, {0, 1}, 0.5);
    Tensor3 scaled = pred;
    for (auto& v : scaled.v) v *= 0.7;
    auto after = assign_labels(scaled, {0, 1}, 0.5);
    for (std::size_t i = 0; i < before.labels.size(); ++i) {
        if (after.labels[i] != kBackgroundLabel) CHECK(after.labels[i] == before.labels[i]);
    }
}

TEST_CASE("miou trivial cases") {
    SUBCASE("identical labels give every IoU 1") {
        auto g = grid_from({0, 0, 1, kBackgroundLabel}, 2, 2);
        auto r = miou({g}, {g}, {0, 1});
        CHECK(r.mean_iou == doctest::Approx(1.0));
        CHECK(r.per_category_iou.at(0) == doctest::Approx(1.0));
        CHECK(r.per_category_iou.at(1) == doctest::Approx(1.0));
    }
    SUBCASE("disjoint masks give IoU 0") {
        auto pred = grid_from({0, kBackgroundLabel}, 2, 1);
        auto gt = grid_from({kBackgroundLabel, 0}, 2, 1);
        CHECK(miou({pred}, {gt}, {0}).per_category_iou.at(0) == doctest::Approx(0.0));
    }
}

TEST_CASE("hand-counted overlapping rectangles give IoU exactly 1/3") {
    // 4-wide x 2-tall rectangles on a 4x3 canvas, overlapping in a 4x1 strip:
    // areas 8 and 8, intersection 4, union 12.
    LabelGrid pred(4, 3), gt(4, 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) pred.labels[static_cast<std::size_t>(y) * 4 + x] = 0;
    for (int y = 1; y < 3; ++y)
        for (int x = 0; x < 4; ++x) gt.labels[static_cast<std::size_t>(y) * 4 + x] = 0;
    auto r = miou({pred}, {gt}, {0});
    CHECK(r.per_category_iou.at(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("categories absent from both gt and pred are excluded from the mean") {
    auto g = grid_from({0, 0, kBackgroundLabel, kBackgroundLabel}, 2, 2);
    auto r = miou({g}, {g}, {0, 5});
    CHECK(r.per_category_iou.count(5) == 0);
    CHECK(r.mean_iou == doctest::Approx(1.0));
}

TEST_CASE("miou accumulates dataset-wide and is order invariant") {
    auto p1 = grid_from({0, kBackgroundLabel}, 2, 1);
    auto g1 = grid_from({0, 0}, 2, 1);
    auto p2 = grid_from({0, 0}, 2, 1);
    auto g2 = grid_from({0, kBackgroundLabel}, 2, 1);
    auto forward = miou({p1, p2}, {g1, g2}, {0});
    auto backward = miou({p2, p1}, {g2, g1}, {0});
    CHECK(forward.mean_iou == doctest::Approx(backward.mean_iou).epsilon(1e-15));
    // Dataset-wide counters: intersection 1+1, union 2+2 -> 2/4.
    CHECK(forward.per_category_iou.at(0) == doctest::Approx(0.5));
}

TEST_CASE("accumulator merge equals serial accumulation") {
    auto p1 = grid_from({0, 1, kBackgroundLabel, 0}, 2, 2);
    auto g1 = grid_from({0, 1, 1, kBackgroundLabel}, 2, 2);
    auto p2 = grid_from({1, 1, 0, kBackgroundLabel}, 2, 2);
    auto g2 = grid_from({1, kBackgroundLabel, 0, 0}, 2, 2);

    ConfusionAccumulator serial;
    serial.add(p1, g1, {0, 1});
    serial.add(p2, g2, {0, 1});

    ConfusionAccumulator a, b;
    a.add(p1, g1, {0, 1});
    b.add(p2, g2, {0, 1});
    a.merge(b);

    CHECK(a.report().mean_iou == doctest::Approx(serial.report().mean_iou).epsilon(1e-15));
    CHECK(a.intersection == serial.intersection);
    CHECK(a.union_ == serial.union_);
}

TEST_CASE("p_miou with exhaustive points equals miou") {
    Rng rng(71);
    std::vector<LabelGrid> pred, gt;
    Rng data_rng(72);
    for (int i = 0; i < 6; ++i) {
        LabelGrid p(8, 8), g(8, 8);
        for (std::size_t k = 0; k < p.labels.size(); ++k) {
            p.labels[k] = static_cast<int>(data_rng.below(3)) - 1;  // -1, 0, 1
            g.labels[k] = static_cast<int>(data_rng.below(3)) - 1;
        }
        pred.push_back(p);
        gt.push_back(g);
    }
    auto exact = miou(pred, gt, {0, 1});
    auto sampled = p_miou(pred, gt, {0, 1}, 8 * 8 * 4, rng);  // K >= all pixels
    CHECK(std::fabs(sampled.mean_iou - exact.mean_iou) < 1e-9);
    for (const auto& [cat, iou] : exact.per_category_iou)
        CHECK(std::fabs(sampled.per_category_iou.at(cat) - iou) < 1e-9);
}

TEST_CASE("p_miou on a perfect prediction is 1 for any point count") {
    auto g = grid_from({0, 1, kBackgroundLabel, 0}, 2, 2);
    Rng rng(73);
    CHECK(p_miou({g}, {g}, {0, 1}, 2, rng).mean_iou == doctest::Approx(1.0));
}

TEST_CASE("point-sampled IoU concentrates near the exact value") {
    // Same rectangles as the hand-counted case, many points, several seeds.
    LabelGrid pred(100, 60), gt(100, 60);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 100; ++x) pred.labels[static_cast<std::size_t>(y) * 100 + x] = 0;
    for (int y = 20; y < 60; ++y)
        for (int x = 0; x < 100; ++x) gt.labels[static_cast<std::size_t>(y) * 100 + x] = 0;
    const double exact = miou({pred}, {gt}, {0}).per_category_iou.at(0);

    double sum = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(1000 + static_cast<std::uint64_t>(s));
        sum += p_miou({pred}, {gt}, {0}, 10000, rng).per_category_iou.at(0);
    }
    CHECK(std::fabs(sum / seeds - exact) < 0.02);
}

TEST_CASE("label_grid_from_masks resolves overlap to the lowest category id") {
    std::vector<std::uint8_t> m0{1, 1, 0, 0}, m5{0, 1, 1, 0};
    std::vector<ClassMask> masks{rle_encode(m5, 2, 2, 5), rle_encode(m0, 2, 2, 0)};
    auto g = label_grid_from_masks(masks);
    CHECK(g.labels == std::vector<int>{0, 0, 5, kBackgroundLabel});
}
