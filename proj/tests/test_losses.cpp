#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "magicforge/gradcheck.hpp"
#include "magicforge/losses.hpp"
#include "magicforge/rng.hpp"

using namespace magicforge;

namespace {

Tensor3 random_pred(int p, int h, int w, Rng& rng) {
    Tensor3 t(p, h, w);
    for (auto& v : t.v) v = rng.uniform(0.02, 0.98);
    return t;
}

Tensor3 random_gt(int p, int h, int w, Rng& rng) {
    Tensor3 t(p, h, w);
    for (auto& v : t.v) v = rng.real() < 0.4 ? 1.0 : 0.0;
    return t;
}

// Independently coded mean binary cross-entropy for the alpha=0 reduction.
double reference_bce(const Tensor3& pred, const Tensor3& gt) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const double p = std::clamp(pred.v[i], kProbEps, 1.0 - kProbEps);
        sum += gt.v[i] * std::log(p) + (1.0 - gt.v[i]) * std::log(1.0 - p);
    }
    return -sum / static_cast<double>(pred.v.size());
}

// Central finite differences through a scalar loss of one tensor argument.
template <typename F>
double max_rel_err_fd(const Tensor3& x, const Tensor3& analytic_grad, F loss) {
    const double h = 1e-6;
    double max_err = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        Tensor3 xp = x, xm = x;
        xp.v[i] += h;
        xm.v[i] -= h;
        const double fd = (loss(xp) - loss(xm)) / (2.0 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic_grad.v[i]), 1e-8});
        max_err = std::max(max_err, std::fabs(fd - analytic_grad.v[i]) / denom);
    }
    return max_err;
}

}  // namespace

TEST_CASE("focal loss single-pixel analytic value") {
    Tensor3 pred(1, 1, 1), gt(1, 1, 1);
    pred.v[0] = 0.5;
    gt.v[0] = 1.0;
    auto r = focal_loss(pred, gt, 2.0);
    // -(1-0.5)^2 * log(0.5)
    CHECK(std::fabs(r.value - 0.173287) < 1e-6);
    CHECK(r.value == doctest::Approx(-0.25 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("focal loss near zero on a perfect prediction") {
    Tensor3 pred(2, 3, 3), gt(2, 3, 3);
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        gt.v[i] = (i % 3 == 0) ? 1.0 : 0.0;
        pred.v[i] = gt.v[i] == 1.0 ? 1.0 - kProbEps : kProbEps;
    }
    CHECK(focal_loss(pred, gt, 2.0).value < 1e-5);
}

TEST_CASE("focal loss with alpha=0 equals independently coded BCE") {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        auto pred = random_pred(2, 4, 4, rng);
        auto gt = random_gt(2, 4, 4, rng);
        CHECK(std::fabs(focal_loss(pred, gt, 0.0).value - reference_bce(pred, gt)) < 1e-9);
    }
}

TEST_CASE("focal loss is non-negative and rejects bad inputs") {
    Rng rng(102);
    for (int trial = 0; trial < 20; ++trial) {
        auto pred = random_pred(1, 4, 4, rng);
        auto gt = random_gt(1, 4, 4, rng);
        CHECK(focal_loss(pred, gt, 2.0).value >= 0.0);
    }
    Tensor3 a(1, 2, 2), mismatched(1, 2, 3);
    CHECK_THROWS(focal_loss(a, mismatched, 2.0));
    Tensor3 bad_gt(1, 2, 2);
    bad_gt.v[0] = 0.5;
    CHECK_THROWS(focal_loss(a, bad_gt, 2.0));
}

TEST_CASE("focal gradient matches central finite differences") {
    Rng rng(103);
    auto pred = random_pred(2, 4, 4, rng);
    auto gt = random_gt(2, 4, 4, rng);
    auto r = focal_loss(pred, gt, 2.0);
    const double err = max_rel_err_fd(pred, r.grad, [&](const Tensor3& x) {
        return focal_loss(x, gt, 2.0).value;
    });
    CHECK(err < 1e-5);
}

TEST_CASE("dice loss trivial cases") {
    SUBCASE("exact binary match gives zero") {
        Tensor3 pred(2, 2, 2), gt(2, 2, 2);
        for (std::size_t i = 0; i < gt.v.size(); ++i) {
            gt.v[i] = (i % 2 == 0) ? 1.0 : 0.0;
            pred.v[i] = gt.v[i];
        }
        CHECK(dice_loss(pred, gt).value == doctest::Approx(0.0));
    }
    SUBCASE("all-ones prediction against an all-zero mask gives one") {
        Tensor3 pred(1, 2, 2), gt(1, 2, 2);
        for (auto& v : pred.v) v = 1.0;
        CHECK(dice_loss(pred, gt).value == doctest::Approx(1.0));
    }
    SUBCASE("an all-zero plane on both sides contributes loss zero") {
        Tensor3 pred(1, 2, 2), gt(1, 2, 2);
        auto r = dice_loss(pred, gt);
        CHECK(r.value == 0.0);
        for (auto g : r.grad.v) CHECK(g == 0.0);
    }
}

TEST_CASE("dice loss stays in [0,1] and its gradient matches finite differences") {
    Rng rng(104);
    auto pred = random_pred(2, 4, 4, rng);
    auto gt = random_gt(2, 4, 4, rng);
    auto r = dice_loss(pred, gt);
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
    const double err = max_rel_err_fd(pred, r.grad, [&](const Tensor3& x) {
        return dice_loss(x, gt).value;
    });
    CHECK(err < 1e-5);
}

TEST_CASE("cosine loss trivial cases") {
    SUBCASE("identical unit vectors give one") {
        std::vector<double> p{1.0, 0.0, 0.0};
        auto r = counterfactual_cosine_loss(p, p);
        CHECK(r.value == doctest::Approx(1.0));
        // At the maximum the projection gradient vanishes.
        for (auto g : r.grad_cls) CHECK(std::fabs(g) < 1e-12);
    }
    SUBCASE("orthogonal vectors give zero") {
        std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
        CHECK(counterfactual_cosine_loss(a, b).value == doctest::Approx(0.0));
    }
    SUBCASE("anti-parallel vectors hinge off with zero gradient") {
        std::vector<double> a{1.0, 2.0}, b{-1.0, -2.0};
        auto r = counterfactual_cosine_loss(a, b);
        CHECK(r.value == 0.0);
        for (auto g : r.grad_cls) CHECK(g == 0.0);
        for (auto g : r.grad_co) CHECK(g == 0.0);
    }
    SUBCASE("zero-norm vector is rejected") {
        std::vector<double> a{0.0, 0.0}, b{1.0, 0.0};
        CHECK_THROWS(counterfactual_cosine_loss(a, b));
    }
}

TEST_CASE("cosine gradients match finite differences on hinged-on inputs") {
    Rng rng(105);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> a(5), b(5);
        for (auto& v : a) v = rng.uniform(0.1, 1.0);
        for (auto& v : b) v = rng.uniform(0.1, 1.0);  // positive: hinge active
        auto r = counterfactual_cosine_loss(a, b);
        for (std::size_t i = 0; i < a.size(); ++i) {
            auto ap = a, am = a;
            ap[i] += h;
            am[i] -= h;
            const double fd = (counterfactual_cosine_loss(ap, b).value -
                               counterfactual_cosine_loss(am, b).value) / (2.0 * h);
            CHECK(std::fabs(fd - r.grad_cls[i]) < 1e-6);
        }
        for (std::size_t i = 0; i < b.size(); ++i) {
            auto bp = b, bm = b;
            bp[i] += h;
            bm[i] -= h;
            const double fd = (counterfactual_cosine_loss(a, bp).value -
                               counterfactual_cosine_loss(a, bm).value) / (2.0 * h);
            CHECK(std::fabs(fd - r.grad_co[i]) < 1e-6);
        }
    }
}

TEST_CASE("permuting category planes consistently leaves losses unchanged") {
    Rng rng(106);
    auto pred = random_pred(4, 4, 4, rng);
    auto gt = random_gt(4, 4, 4, rng);
    const std::vector<int> perm{2, 0, 3, 1};
    Tensor3 pred_p(4, 4, 4), gt_p(4, 4, 4);
    for (int p = 0; p < 4; ++p)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                pred_p.at(p, y, x) = pred.at(perm[p], y, x);
                gt_p.at(p, y, x) = gt.at(perm[p], y, x);
            }
    CHECK(focal_loss(pred, gt, 2.0).value ==
          doctest::Approx(focal_loss(pred_p, gt_p, 2.0).value).epsilon(1e-12));
    CHECK(dice_loss(pred, gt).value ==
          doctest::Approx(dice_loss(pred_p, gt_p).value).epsilon(1e-12));
}

TEST_CASE("total loss with zero weights is zero") {
    Rng rng(107);
    auto pred = random_pred(2, 4, 4, rng);
    auto gt = random_gt(2, 4, 4, rng);
    std::vector<double> p_cls{1.0, 0.5}, p_co{0.3, 0.9};
    LossWeights w;
    w.w1 = w.w2 = w.w3 = 0.0;
    auto r = total_loss(pred, gt, p_cls, p_co, w);
    CHECK(r.value == 0.0);
    for (auto g : r.grad_pred.v) CHECK(g == 0.0);
    for (auto g : r.grad_cls) CHECK(g == 0.0);
}

TEST_CASE("total loss near zero on perfect prediction with orthogonal tokens") {
    Tensor3 pred(1, 2, 2), gt(1, 2, 2);
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        gt.v[i] = (i < 2) ? 1.0 : 0.0;
        pred.v[i] = gt.v[i] == 1.0 ? 1.0 - kProbEps : kProbEps;
    }
    std::vector<double> p_cls{1.0, 0.0}, p_co{0.0, 1.0};
    LossWeights w;  // defaults: 100, 1, 1
    CHECK(total_loss(pred, gt, p_cls, p_co, w).value < 1e-3);
}

TEST_CASE("total loss is linear in its weights") {
    Rng rng(108);
    auto pred = random_pred(2, 4, 4, rng);
    auto gt = random_gt(2, 4, 4, rng);
    std::vector<double> p_cls{0.4, 0.8, 0.1}, p_co{0.2, 0.7, 0.5};
    LossWeights w;
    w.w1 = 3.0;
    w.w2 = 0.5;
    w.w3 = 2.0;
    LossWeights w2x = w;
    w2x.w1 *= 2;
    w2x.w2 *= 2;
    w2x.w3 *= 2;
    auto r1 = total_loss(pred, gt, p_cls, p_co, w);
    auto r2 = total_loss(pred, gt, p_cls, p_co, w2x);
    CHECK(r2.value == doctest::Approx(2.0 * r1.value).epsilon(1e-12));
    for (std::size_t i = 0; i < r1.grad_pred.v.size(); ++i)
        CHECK(r2.grad_pred.v[i] == doctest::Approx(2.0 * r1.grad_pred.v[i]).epsilon(1e-12));
}

TEST_CASE("gradcheck suite passes across 10 seeds") {
    auto report = run_gradcheck(10);
    CHECK(report.focal_max_rel_err < 1e-5);
    CHECK(report.dice_max_rel_err < 1e-5);
    CHECK(report.cosine_max_rel_err < 1e-5);
    CHECK(report.end_to_end_max_rel_err < 1e-4);
}
