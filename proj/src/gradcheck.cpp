#include "magicforge/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "magicforge/losses.hpp"
#include "magicforge/rng.hpp"
#include "magicforge/trainer.hpp"

namespace magicforge {

namespace {

constexpr double kStep = 1e-5;
// Relative-error scale floor: below this magnitude the comparison is
// dominated by the finite-difference truncation error itself.
constexpr double kScaleFloor = 1e-3;

double rel_err(double analytic, double fd) {
    return std::fabs(analytic - fd) / std::max({std::fabs(analytic), std::fabs(fd), kScaleFloor});
}

Tensor3 random_pred(Rng& rng, int p, int h, int w) {
    Tensor3 t(p, h, w);
    for (auto& x : t.v) x = rng.uniform(0.05, 0.95);
    return t;
}

Tensor3 random_gt(Rng& rng, int p, int h, int w) {
    Tensor3 t(p, h, w);
    for (auto& x : t.v) x = rng.below(2) ? 1.0 : 0.0;
    return t;
}

template <typename Fn>
double check_tensor_grad(Tensor3& pred, const Tensor3& grad, Fn value) {
    double worst = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double keep = pred.v[i];
        pred.v[i] = keep + kStep;
        const double hi = value(pred);
        pred.v[i] = keep - kStep;
        const double lo = value(pred);
        pred.v[i] = keep;
        worst = std::max(worst, rel_err(grad.v[i], (hi - lo) / (2.0 * kStep)));
    }
    return worst;
}

double check_focal(Rng& rng) {
    const int p = 1 + static_cast<int>(rng.below(4));
    const int h = 2 + static_cast<int>(rng.below(7));
    const int w = 2 + static_cast<int>(rng.below(7));
    const double alpha = (rng.below(3) == 0) ? 0.0 : rng.uniform(1.0, 3.0);
    auto pred = random_pred(rng, p, h, w);
    const auto gt = random_gt(rng, p, h, w);
    const auto analytic = focal_loss(pred, gt, alpha);
    return check_tensor_grad(pred, analytic.grad,
                             [&](const Tensor3& x) { return focal_loss(x, gt, alpha).value; });
}

double check_dice(Rng& rng) {
    const int p = 1 + static_cast<int>(rng.below(4));
    const int h = 2 + static_cast<int>(rng.below(7));
    const int w = 2 + static_cast<int>(rng.below(7));
    auto pred = random_pred(rng, p, h, w);
    auto gt = random_gt(rng, p, h, w);
    // Exercise the empty-ground-truth plane path too.
    if (p > 1)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) gt.at(0, y, x) = 0.0;
    const auto analytic = dice_loss(pred, gt);
    return check_tensor_grad(pred, analytic.grad,
                             [&](const Tensor3& x) { return dice_loss(x, gt).value; });
}

double check_cosine(Rng& rng) {
    const std::size_t d = 2 + rng.below(15);
    std::vector<double> a(d), b(d);
    double cosine;
    do {
        for (auto& x : a) x = rng.uniform(-1.0, 1.0);
        for (auto& x : b) x = rng.uniform(-1.0, 1.0);
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < d; ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        cosine = dot / std::sqrt(na * nb);
    } while (std::fabs(cosine) < 5e-3);  // stay clear of the hinge kink

    const auto analytic = counterfactual_cosine_loss(a, b);
    double worst = 0.0;
    auto sweep = [&](std::vector<double>& vec, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < d; ++i) {
            const double keep = vec[i];
            vec[i] = keep + kStep;
            const double hi = counterfactual_cosine_loss(a, b).value;
            vec[i] = keep - kStep;
            const double lo = counterfactual_cosine_loss(a, b).value;
            vec[i] = keep;
            worst = std::max(worst, rel_err(grad[i], (hi - lo) / (2.0 * kStep)));
        }
    };
    sweep(a, analytic.grad_cls);
    sweep(b, analytic.grad_co);
    return worst;
}

Image random_image(Rng& rng, int w, int h) {
    Image img(w, h);
    for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

double check_end_to_end(Rng& rng) {
    const int num_categories = 6;
    const int embed_dim = 4;
    const int w = 6, h = 6;

    TrainingExample ex;
    ex.categories = {0, 2};
    for (std::size_t i = 0; i < ex.categories.size(); ++i) {
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h);
        for (auto& v : mask) v = static_cast<std::uint8_t>(rng.below(2));
        ex.masks.push_back(std::move(mask));
    }
    ex.features = extract_features(random_image(rng, w, h));
    ex.counterfactual_features = extract_features(random_image(rng, w, h));

    CategorySubset subset;
    subset.ids = {0, 2, 3, 5};
    subset.known = {true, true, false, false};

    LossWeights weights;  // defaults: w1=100, w2=w3=1, alpha=2
    auto model = ToyModelState::init(num_categories, embed_dim, rng.next());
    auto analytic = example_gradients(model, ex, subset, weights);

    auto value = [&](const ToyModelState& m) {
        LossReport r;
        example_gradients(m, ex, subset, weights, &r);
        return r.total;
    };
    double worst = 0.0;
    auto sweep = [&](std::vector<double>& param, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double keep = param[i];
            param[i] = keep + kStep;
            const double hi = value(model);
            param[i] = keep - kStep;
            const double lo = value(model);
            param[i] = keep;
            worst = std::max(worst, rel_err(grad[i], (hi - lo) / (2.0 * kStep)));
        }
    };
    sweep(model.W, analytic.W);
    sweep(model.E, analytic.E);
    sweep(model.b, analytic.b);
    return worst;
}

}  // namespace

GradcheckReport run_gradcheck(int seeds, std::uint64_t base_seed) {
    GradcheckReport report;
    for (int s = 0; s < seeds; ++s) {
        Rng rng(derive_seed(base_seed, static_cast<std::uint64_t>(s)));
        report.focal_max_rel_err = std::max(report.focal_max_rel_err, check_focal(rng));
        report.dice_max_rel_err = std::max(report.dice_max_rel_err, check_dice(rng));
        report.cosine_max_rel_err = std::max(report.cosine_max_rel_err, check_cosine(rng));
        report.end_to_end_max_rel_err = std::max(report.end_to_end_max_rel_err, check_end_to_end(rng));
    }
    return report;
}

}  // namespace magicforge
