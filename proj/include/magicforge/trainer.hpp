#pragma once

#include <string>
#include <vector>

#include "magicforge/image.hpp"
#include "magicforge/losses.hpp"
#include "magicforge/metrics.hpp"
#include "magicforge/rng.hpp"
#include "magicforge/sampler.hpp"
#include "magicforge/types.hpp"

namespace magicforge {

// Handcrafted per-pixel features standing in for a frozen image encoder:
// normalized RGB (3), normalized x,y (2), gradient magnitude (1),
// 3x3 mean color (3).
inline constexpr int kFeatureDim = 9;

struct FeatureGrid {
    int width = 0, height = 0;
    std::vector<double> v;  // pixel-major: [k * kFeatureDim + f]

    const double* at(std::size_t k) const { return v.data() + k * kFeatureDim; }
    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

FeatureGrid extract_features(const Image& image);

// Linear scorer over fixed features: pred = sigmoid(E_c . (W phi_k) + b_c),
// class token p = mean_k(W phi_k).
struct ToyModelState {
    int feat_dim = kFeatureDim;
    int embed_dim = 0;
    int num_categories = 0;
    std::vector<double> W;  // embed_dim x feat_dim
    std::vector<double> E;  // num_categories x embed_dim
    std::vector<double> b;  // num_categories

    static ToyModelState init(int num_categories, int embed_dim, std::uint64_t seed);

    json to_json() const;
    static ToyModelState from_json(const json& j);
    void save(const std::string& path) const;
    static ToyModelState load(const std::string& path);
};

struct ForwardResult {
    Tensor3 pred;               // m x H x W probabilities
    std::vector<double> token;  // class token, embed_dim
};

ForwardResult forward(const ToyModelState& model, const FeatureGrid& features,
                      const std::vector<int>& category_ids);

struct TrainConfig {
    double learning_rate = 0.0002;
    int batch_size = 8;
    int steps = 300;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::size_t m_subset = 100;
    int embed_dim = 64;
    LossWeights weights;
    std::uint64_t seed = 0;
};

struct LossReport {
    double focal = 0, dice = 0, cosine = 0, total = 0;
};

// Sample with features and ground truth decoded once up front.
struct TrainingExample {
    std::vector<int> categories;
    std::vector<std::vector<std::uint8_t>> masks;  // parallel to categories
    FeatureGrid features;
    FeatureGrid counterfactual_features;
};

TrainingExample prepare_example(const SampleRecord& record, const std::string& dataset_dir);

struct AdamState {
    std::vector<double> mW, vW, mE, vE, mb, vb;
    long t = 0;

    static AdamState zeros(const ToyModelState& model);
};

struct ModelGradients {
    std::vector<double> W, E, b;
};

// Gradients of the weighted total loss for one example under a given subset.
// Exposed for the finite-difference suite.
ModelGradients example_gradients(const ToyModelState& model, const TrainingExample& example,
                                 const CategorySubset& subset, const LossWeights& weights,
                                 LossReport* report = nullptr);

// One Adam update on the batch-mean gradient; subsets drawn per image.
LossReport train_step(ToyModelState& model, AdamState& adam,
                      const std::vector<const TrainingExample*>& batch, const Vocabulary& vocab,
                      const TrainConfig& config, Rng& rng);

struct FitResult {
    ToyModelState model;
    std::vector<LossReport> history;
};

FitResult fit(const Manifest& manifest, const std::string& dataset_dir, const Vocabulary& vocab,
              const TrainConfig& config);

// Forward over the given evaluation categories, labels assigned with
// bg_threshold, mIoU against the records' stored masks.
MetricReport evaluate_model(const ToyModelState& model, const Manifest& manifest,
                            const std::string& dataset_dir, const std::vector<int>& categories,
                            double bg_threshold);

}  // namespace magicforge
