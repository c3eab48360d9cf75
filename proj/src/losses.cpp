#include "magicforge/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace magicforge {

namespace {

void check_shapes(const Tensor3& pred, const Tensor3& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("loss: pred/gt shape mismatch");
    if (pred.size() == 0) throw std::invalid_argument("loss: empty tensors");
}

}  // namespace

ScalarWithGrad focal_loss(const Tensor3& pred, const Tensor3& gt, double alpha) {
    check_shapes(pred, gt);
    ScalarWithGrad out;
    out.grad = Tensor3(pred.planes, pred.height, pred.width);
    const double scale = 1.0 / static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double y = gt.v[i];
        if (y != 0.0 && y != 1.0) throw std::invalid_argument("focal_loss: ground truth must be binary");
        const double p = std::clamp(pred.v[i], kProbEps, 1.0 - kProbEps);
        const double q = 1.0 - p;
        const double lp = std::log(p);
        const double lq = std::log(q);
        const double pa = std::pow(p, alpha);
        const double qa = std::pow(q, alpha);
        sum += qa * y * lp + pa * (1.0 - y) * lq;
        // d/dp of -(q^a y ln p + p^a (1-y) ln q)
        double d = 0.0;
        if (y != 0.0)
            d += y * (-alpha * (alpha == 0.0 ? 0.0 : std::pow(q, alpha - 1.0)) * lp + qa / p);
        if (y != 1.0)
            d += (1.0 - y) * (alpha * (alpha == 0.0 ? 0.0 : std::pow(p, alpha - 1.0)) * lq - pa / q);
        out.grad.v[i] = -d * scale;
    }
    out.value = -sum * scale;
    return out;
}

ScalarWithGrad dice_loss(const Tensor3& pred, const Tensor3& gt) {
    check_shapes(pred, gt);
    ScalarWithGrad out;
    out.grad = Tensor3(pred.planes, pred.height, pred.width);
    const std::size_t plane_size = static_cast<std::size_t>(pred.height) * pred.width;
    double sum = 0.0;
    for (int p = 0; p < pred.planes; ++p) {
        const std::size_t base = static_cast<std::size_t>(p) * plane_size;
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < plane_size; ++k) {
            const double yh = pred.v[base + k];
            const double y = gt.v[base + k];
            num += 2.0 * yh * y;
            den += yh * yh + y * y;
        }
        if (den == 0.0) continue;  // empty plane on both sides
        sum += 1.0 - num / den;
        const double inv_m = 1.0 / static_cast<double>(pred.planes);
        for (std::size_t k = 0; k < plane_size; ++k) {
            const double yh = pred.v[base + k];
            const double y = gt.v[base + k];
            out.grad.v[base + k] = -(2.0 * y * den - num * 2.0 * yh) / (den * den) * inv_m;
        }
    }
    out.value = sum / static_cast<double>(pred.planes);
    return out;
}

CosineWithGrad counterfactual_cosine_loss(const std::vector<double>& p_cls,
                                          const std::vector<double>& p_co) {
    if (p_cls.size() != p_co.size() || p_cls.empty())
        throw std::invalid_argument("cosine loss: vector size mismatch");
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t i = 0; i < p_cls.size(); ++i) {
        dot += p_cls[i] * p_co[i];
        na2 += p_cls[i] * p_cls[i];
        nb2 += p_co[i] * p_co[i];
    }
    if (na2 == 0.0 || nb2 == 0.0) throw std::invalid_argument("cosine loss: zero-norm vector");
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);
    const double cosine = dot / (na * nb);

    CosineWithGrad out;
    out.grad_cls.assign(p_cls.size(), 0.0);
    out.grad_co.assign(p_co.size(), 0.0);
    if (cosine <= 0.0) {
        out.value = 0.0;  // hinge inactive; subgradient 0 at the boundary
        return out;
    }
    out.value = cosine;
    for (std::size_t i = 0; i < p_cls.size(); ++i) {
        out.grad_cls[i] = p_co[i] / (na * nb) - cosine * p_cls[i] / na2;
        out.grad_co[i] = p_cls[i] / (na * nb) - cosine * p_co[i] / nb2;
    }
    return out;
}

TotalLossResult total_loss(const Tensor3& pred, const Tensor3& gt,
                           const std::vector<double>& p_cls, const std::vector<double>& p_co,
                           const LossWeights& weights) {
    auto focal = focal_loss(pred, gt, weights.alpha);
    auto dice = dice_loss(pred, gt);
    auto cosine = counterfactual_cosine_loss(p_cls, p_co);

    TotalLossResult out;
    out.focal = focal.value;
    out.dice = dice.value;
    out.cosine = cosine.value;
    out.value = weights.w1 * focal.value + weights.w2 * dice.value + weights.w3 * cosine.value;
    out.grad_pred = Tensor3(pred.planes, pred.height, pred.width);
    for (std::size_t i = 0; i < pred.size(); ++i)
        out.grad_pred.v[i] = weights.w1 * focal.grad.v[i] + weights.w2 * dice.grad.v[i];
    out.grad_cls.resize(p_cls.size());
    out.grad_co.resize(p_co.size());
    for (std::size_t i = 0; i < p_cls.size(); ++i) {
        out.grad_cls[i] = weights.w3 * cosine.grad_cls[i];
        out.grad_co[i] = weights.w3 * cosine.grad_co[i];
    }
    return out;
}

}  // namespace magicforge
