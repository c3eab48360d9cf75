#pragma once

#include <cstddef>
#include <vector>

namespace magicforge {

// Dense planes x height x width tensor of doubles.
struct Tensor3 {
    int planes = 0, height = 0, width = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(int p, int h, int w)
        : planes(p), height(h), width(w), v(static_cast<std::size_t>(p) * h * w, 0.0) {}

    std::size_t size() const { return v.size(); }
    double& at(int p, int y, int x) {
        return v[(static_cast<std::size_t>(p) * height + y) * width + x];
    }
    double at(int p, int y, int x) const {
        return v[(static_cast<std::size_t>(p) * height + y) * width + x];
    }
    bool same_shape(const Tensor3& o) const {
        return planes == o.planes && height == o.height && width == o.width;
    }
};

struct LossWeights {
    double w1 = 100.0;  // focal
    double w2 = 1.0;    // dice
    double w3 = 1.0;    // counterfactual cosine
    double alpha = 2.0;
};

inline constexpr double kProbEps = 1e-7;

struct ScalarWithGrad {
    double value = 0.0;
    Tensor3 grad;  // d value / d pred
};

struct CosineWithGrad {
    double value = 0.0;
    std::vector<double> grad_cls;
    std::vector<double> grad_co;
};

struct TotalLossResult {
    double value = 0.0;
    double focal = 0.0, dice = 0.0, cosine = 0.0;
    Tensor3 grad_pred;  // w1 * dfocal + w2 * ddice
    std::vector<double> grad_cls;
    std::vector<double> grad_co;
};

// Focal binary cross-entropy, mean over all elements. pred holds post-sigmoid
// probabilities (clamped to [eps, 1-eps] internally), gt is binary.
ScalarWithGrad focal_loss(const Tensor3& pred, const Tensor3& gt, double alpha);

// Mean over planes of (1 - dice coefficient). An all-zero-denominator plane
// contributes loss 0 and gradient 0.
ScalarWithGrad dice_loss(const Tensor3& pred, const Tensor3& gt);

// Hinged cosine similarity max(0, cos(p_cls, p_co)). Gradients are zero when
// the hinge is inactive. Throws on a zero-norm vector.
CosineWithGrad counterfactual_cosine_loss(const std::vector<double>& p_cls,
                                          const std::vector<double>& p_co);

TotalLossResult total_loss(const Tensor3& pred, const Tensor3& gt,
                           const std::vector<double>& p_cls, const std::vector<double>& p_co,
                           const LossWeights& weights);

}  // namespace magicforge
