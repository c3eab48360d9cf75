#include "magicforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace magicforge {

namespace fs = std::filesystem;

FeatureGrid extract_features(const Image& image) {
    FeatureGrid grid;
    grid.width = image.width;
    grid.height = image.height;
    grid.v.resize(grid.pixels() * kFeatureDim);

    const int w = image.width, h = image.height;
    auto luma = [&](int x, int y) {
        const auto* px = image.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
        return (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double* f = grid.v.data() + (static_cast<std::size_t>(y) * w + x) * kFeatureDim;
            const auto* px = image.at(x, y);
            // Channels are centered on zero so the class-specific chroma and
            // position signal is not swamped by a shared positive offset.
            f[0] = px[0] / 127.5 - 1.0;
            f[1] = px[1] / 127.5 - 1.0;
            f[2] = px[2] / 127.5 - 1.0;
            f[3] = w > 1 ? 2.0 * x / (w - 1) - 1.0 : 0.0;
            f[4] = h > 1 ? 2.0 * y / (h - 1) - 1.0 : 0.0;
            const double gx = luma(x + 1, y) - luma(x - 1, y);
            const double gy = luma(x, y + 1) - luma(x, y - 1);
            f[5] = std::sqrt(gx * gx + gy * gy);
            double mr = 0, mg = 0, mb = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const auto* q = image.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1));
                    mr += q[0];
                    mg += q[1];
                    mb += q[2];
                }
            f[6] = mr / (9.0 * 127.5) - 1.0;
            f[7] = mg / (9.0 * 127.5) - 1.0;
            f[8] = mb / (9.0 * 127.5) - 1.0;
        }
    }
    return grid;
}

ToyModelState ToyModelState::init(int num_categories, int embed_dim, std::uint64_t seed) {
    ToyModelState m;
    m.embed_dim = embed_dim;
    m.num_categories = num_categories;
    m.W.resize(static_cast<std::size_t>(embed_dim) * kFeatureDim);
    m.E.resize(static_cast<std::size_t>(num_categories) * embed_dim);
    m.b.assign(static_cast<std::size_t>(num_categories), 0.0);
    Rng rng(mix64(seed ^ 0x696e6974ULL));
    for (auto& w : m.W) w = rng.uniform(-0.1, 0.1);
    for (auto& e : m.E) e = rng.uniform(-0.1, 0.1);
    return m;
}

json ToyModelState::to_json() const {
    json j;
    j["feat_dim"] = feat_dim;
    j["embed_dim"] = embed_dim;
    j["num_categories"] = num_categories;
    j["W"] = W;
    j["E"] = E;
    j["b"] = b;
    return j;
}

ToyModelState ToyModelState::from_json(const json& j) {
    ToyModelState m;
    m.feat_dim = j.at("feat_dim").get<int>();
    m.embed_dim = j.at("embed_dim").get<int>();
    m.num_categories = j.at("num_categories").get<int>();
    m.W = j.at("W").get<std::vector<double>>();
    m.E = j.at("E").get<std::vector<double>>();
    m.b = j.at("b").get<std::vector<double>>();
    if (m.feat_dim != kFeatureDim || m.W.size() != static_cast<std::size_t>(m.embed_dim) * kFeatureDim ||
        m.E.size() != static_cast<std::size_t>(m.num_categories) * m.embed_dim ||
        m.b.size() != static_cast<std::size_t>(m.num_categories))
        throw std::invalid_argument("ToyModelState: inconsistent checkpoint");
    return m;
}

void ToyModelState::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << to_json().dump() << '\n';
}

ToyModelState ToyModelState::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    in >> j;
    return from_json(j.contains("model") ? j.at("model") : j);
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Projected features f_k = W phi_k for every pixel, plus their mean (the
// class token).
void project(const ToyModelState& model, const FeatureGrid& features,
             std::vector<double>& projected, std::vector<double>& token) {
    const std::size_t n = features.pixels();
    const int d = model.embed_dim;
    projected.assign(n * static_cast<std::size_t>(d), 0.0);
    token.assign(static_cast<std::size_t>(d), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double* phi = features.at(k);
        double* out = projected.data() + k * static_cast<std::size_t>(d);
        for (int j = 0; j < d; ++j) {
            const double* wrow = model.W.data() + static_cast<std::size_t>(j) * kFeatureDim;
            double s = 0.0;
            for (int f = 0; f < kFeatureDim; ++f) s += wrow[f] * phi[f];
            out[j] = s;
            token[static_cast<std::size_t>(j)] += s;
        }
    }
    for (int j = 0; j < d; ++j) token[static_cast<std::size_t>(j)] /= static_cast<double>(n);
}

}  // namespace

ForwardResult forward(const ToyModelState& model, const FeatureGrid& features,
                      const std::vector<int>& category_ids) {
    for (int c : category_ids)
        if (c < 0 || c >= model.num_categories)
            throw std::invalid_argument("forward: category id out of range");
    std::vector<double> projected, token;
    project(model, features, projected, token);

    const std::size_t n = features.pixels();
    const int d = model.embed_dim;
    ForwardResult out;
    out.token = std::move(token);
    out.pred = Tensor3(static_cast<int>(category_ids.size()), features.height, features.width);
    for (std::size_t i = 0; i < category_ids.size(); ++i) {
        const double* erow = model.E.data() + static_cast<std::size_t>(category_ids[i]) * d;
        const double bias = model.b[static_cast<std::size_t>(category_ids[i])];
        for (std::size_t k = 0; k < n; ++k) {
            const double* f = projected.data() + k * static_cast<std::size_t>(d);
            double s = bias;
            for (int j = 0; j < d; ++j) s += erow[j] * f[j];
            out.pred.v[i * n + k] = sigmoid(s);
        }
    }
    return out;
}

TrainingExample prepare_example(const SampleRecord& record, const std::string& dataset_dir) {
    TrainingExample ex;
    ex.categories = record.categories;
    for (const auto& mask : record.masks) ex.masks.push_back(rle_decode(mask));
    fs::path dir(dataset_dir);
    ex.features = extract_features(read_png((dir / record.image_ref).string()));
    ex.counterfactual_features = extract_features(read_png((dir / record.counterfactual_image_ref).string()));
    return ex;
}

AdamState AdamState::zeros(const ToyModelState& model) {
    AdamState a;
    a.mW.assign(model.W.size(), 0.0);
    a.vW.assign(model.W.size(), 0.0);
    a.mE.assign(model.E.size(), 0.0);
    a.vE.assign(model.E.size(), 0.0);
    a.mb.assign(model.b.size(), 0.0);
    a.vb.assign(model.b.size(), 0.0);
    return a;
}

ModelGradients example_gradients(const ToyModelState& model, const TrainingExample& example,
                                 const CategorySubset& subset, const LossWeights& weights,
                                 LossReport* report) {
    const std::size_t n = example.features.pixels();
    const int d = model.embed_dim;
    const std::size_t m = subset.size();

    std::vector<double> projected, token_cls;
    project(model, example.features, projected, token_cls);

    // Counterfactual token only needs the mean feature: W * mean(phi_co).
    const std::size_t n_co = example.counterfactual_features.pixels();
    std::vector<double> mean_phi_co(kFeatureDim, 0.0);
    for (std::size_t k = 0; k < n_co; ++k) {
        const double* phi = example.counterfactual_features.at(k);
        for (int f = 0; f < kFeatureDim; ++f) mean_phi_co[static_cast<std::size_t>(f)] += phi[f];
    }
    for (auto& x : mean_phi_co) x /= static_cast<double>(n_co);
    std::vector<double> token_co(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < d; ++j) {
        const double* wrow = model.W.data() + static_cast<std::size_t>(j) * kFeatureDim;
        double s = 0.0;
        for (int f = 0; f < kFeatureDim; ++f) s += wrow[f] * mean_phi_co[static_cast<std::size_t>(f)];
        token_co[static_cast<std::size_t>(j)] = s;
    }

    // Forward on the subset.
    Tensor3 pred(static_cast<int>(m), example.features.height, example.features.width);
    for (std::size_t i = 0; i < m; ++i) {
        const double* erow = model.E.data() + static_cast<std::size_t>(subset.ids[i]) * d;
        const double bias = model.b[static_cast<std::size_t>(subset.ids[i])];
        for (std::size_t k = 0; k < n; ++k) {
            const double* f = projected.data() + k * static_cast<std::size_t>(d);
            double s = bias;
            for (int j = 0; j < d; ++j) s += erow[j] * f[j];
            pred.v[i * n + k] = sigmoid(s);
        }
    }

    // Ground truth: known planes from the stored masks, negatives all zero.
    Tensor3 gt(static_cast<int>(m), example.features.height, example.features.width);
    for (std::size_t i = 0; i < m; ++i) {
        if (!subset.known[i]) continue;
        auto it = std::find(example.categories.begin(), example.categories.end(), subset.ids[i]);
        if (it == example.categories.end())
            throw std::logic_error("subset marks unknown category as known");
        const auto& mask = example.masks[static_cast<std::size_t>(it - example.categories.begin())];
        for (std::size_t k = 0; k < n; ++k) gt.v[i * n + k] = mask[k];
    }

    auto loss = total_loss(pred, gt, token_cls, token_co, weights);
    if (report) {
        report->focal = loss.focal;
        report->dice = loss.dice;
        report->cosine = loss.cosine;
        report->total = loss.value;
    }

    ModelGradients g;
    g.W.assign(model.W.size(), 0.0);
    g.E.assign(model.E.size(), 0.0);
    g.b.assign(model.b.size(), 0.0);

    // dL/dscore = dL/dpred * pred * (1 - pred); accumulate per-pixel
    // dL/df_k = sum_i dL/dscore_ik * E_ci before mapping back to W.
    std::vector<double> dproj(n * static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const int cat = subset.ids[i];
        const double* erow = model.E.data() + static_cast<std::size_t>(cat) * d;
        double* ge = g.E.data() + static_cast<std::size_t>(cat) * d;
        double gb = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double p = pred.v[i * n + k];
            const double ds = loss.grad_pred.v[i * n + k] * p * (1.0 - p);
            if (ds == 0.0) continue;
            const double* f = projected.data() + k * static_cast<std::size_t>(d);
            double* df = dproj.data() + k * static_cast<std::size_t>(d);
            for (int j = 0; j < d; ++j) {
                ge[j] += ds * f[j];
                df[j] += ds * erow[j];
            }
            gb += ds;
        }
        g.b[static_cast<std::size_t>(cat)] += gb;
    }

    // Token path: p = W * mean(phi); fold dL/dp into dproj via the mean, or
    // equivalently add (dL/dp_j / n) to every pixel's df. Do it directly on W
    // with the mean feature instead.
    std::vector<double> mean_phi(kFeatureDim, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double* phi = example.features.at(k);
        for (int f = 0; f < kFeatureDim; ++f) mean_phi[static_cast<std::size_t>(f)] += phi[f];
    }
    for (auto& x : mean_phi) x /= static_cast<double>(n);

    // dL/dW from the pixel path...
    for (std::size_t k = 0; k < n; ++k) {
        const double* phi = example.features.at(k);
        const double* df = dproj.data() + k * static_cast<std::size_t>(d);
        for (int j = 0; j < d; ++j) {
            if (df[j] == 0.0) continue;
            double* gw = g.W.data() + static_cast<std::size_t>(j) * kFeatureDim;
            for (int f = 0; f < kFeatureDim; ++f) gw[f] += df[j] * phi[f];
        }
    }
    // ...and from the two tokens.
    for (int j = 0; j < d; ++j) {
        double* gw = g.W.data() + static_cast<std::size_t>(j) * kFeatureDim;
        for (int f = 0; f < kFeatureDim; ++f) {
            gw[f] += loss.grad_cls[static_cast<std::size_t>(j)] * mean_phi[static_cast<std::size_t>(f)];
            gw[f] += loss.grad_co[static_cast<std::size_t>(j)] * mean_phi_co[static_cast<std::size_t>(f)];
        }
    }
    return g;
}

namespace {

void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, long t,
                 const TrainConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

}  // namespace

LossReport train_step(ToyModelState& model, AdamState& adam,
                      const std::vector<const TrainingExample*>& batch, const Vocabulary& vocab,
                      const TrainConfig& config, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    ModelGradients acc;
    acc.W.assign(model.W.size(), 0.0);
    acc.E.assign(model.E.size(), 0.0);
    acc.b.assign(model.b.size(), 0.0);
    LossReport mean_report;

    for (const TrainingExample* ex : batch) {
        // Per-image floor: the subset always contains the known categories.
        const std::size_t m = std::max(config.m_subset, ex->categories.size());
        auto subset = sample_categories(ex->categories, vocab, m, rng);
        LossReport r;
        auto g = example_gradients(model, *ex, subset, config.weights, &r);
        for (std::size_t i = 0; i < acc.W.size(); ++i) acc.W[i] += g.W[i];
        for (std::size_t i = 0; i < acc.E.size(); ++i) acc.E[i] += g.E[i];
        for (std::size_t i = 0; i < acc.b.size(); ++i) acc.b[i] += g.b[i];
        mean_report.focal += r.focal;
        mean_report.dice += r.dice;
        mean_report.cosine += r.cosine;
        mean_report.total += r.total;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& x : acc.W) x *= inv;
    for (auto& x : acc.E) x *= inv;
    for (auto& x : acc.b) x *= inv;
    mean_report.focal *= inv;
    mean_report.dice *= inv;
    mean_report.cosine *= inv;
    mean_report.total *= inv;

    ++adam.t;
    adam_update(model.W, acc.W, adam.mW, adam.vW, adam.t, config);
    adam_update(model.E, acc.E, adam.mE, adam.vE, adam.t, config);
    adam_update(model.b, acc.b, adam.mb, adam.vb, adam.t, config);
    return mean_report;
}

FitResult fit(const Manifest& manifest, const std::string& dataset_dir, const Vocabulary& vocab,
              const TrainConfig& config) {
    if (manifest.records.empty()) throw std::invalid_argument("fit: empty manifest");
    std::vector<TrainingExample> examples;
    examples.reserve(manifest.records.size());
    for (const auto& rec : manifest.records) examples.push_back(prepare_example(rec, dataset_dir));

    FitResult result;
    result.model = ToyModelState::init(static_cast<int>(vocab.size()), config.embed_dim, config.seed);
    AdamState adam = AdamState::zeros(result.model);
    Rng rng(mix64(config.seed ^ 0x747261696eULL));

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // forces a shuffle on first use

    for (int step = 0; step < config.steps; ++step) {
        std::vector<const TrainingExample*> batch;
        for (int i = 0; i < config.batch_size; ++i) {
            if (cursor >= order.size()) {
                for (std::size_t j = order.size(); j > 1; --j)
                    std::swap(order[j - 1], order[rng.below(j)]);
                cursor = 0;
            }
            batch.push_back(&examples[order[cursor++]]);
        }
        result.history.push_back(train_step(result.model, adam, batch, vocab, config, rng));
    }
    return result;
}

MetricReport evaluate_model(const ToyModelState& model, const Manifest& manifest,
                            const std::string& dataset_dir, const std::vector<int>& categories,
                            double bg_threshold) {
    std::vector<LabelGrid> pred_grids, gt_grids;
    fs::path dir(dataset_dir);
    for (const auto& rec : manifest.records) {
        auto features = extract_features(read_png((dir / rec.image_ref).string()));
        auto fwd = forward(model, features, categories);
        pred_grids.push_back(assign_labels(fwd.pred, categories, bg_threshold));
        gt_grids.push_back(label_grid_from_masks(rec.masks));
    }
    return miou(pred_grids, gt_grids, categories);
}

}  // namespace magicforge
