#include "magicforge/config.hpp"

#include <fstream>

namespace magicforge {

namespace {

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

AppConfig AppConfig::load(const std::string& path) {
    AppConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
        try {
            if (j.contains("prompt"))
                get_if_present(j.at("prompt"), "conditions", cfg.conditions.conditions);
            if (j.contains("backend")) {
                const auto& b = j.at("backend");
                get_if_present(b, "text_endpoint", cfg.backend.text_endpoint);
                get_if_present(b, "image_endpoint", cfg.backend.image_endpoint);
                get_if_present(b, "detect_endpoint", cfg.backend.detect_endpoint);
                get_if_present(b, "segment_endpoint", cfg.backend.segment_endpoint);
                get_if_present(b, "timeout_s", cfg.backend.timeout_s);
                get_if_present(b, "retries", cfg.backend.retries);
                get_if_present(b, "image_width", cfg.backend.image_width);
                get_if_present(b, "image_height", cfg.backend.image_height);
                if (b.contains("noise")) {
                    const auto& n = b.at("noise");
                    get_if_present(n, "box_jitter_sigma", cfg.backend.noise.box_jitter_sigma);
                    get_if_present(n, "dropout_prob", cfg.backend.noise.dropout_prob);
                    get_if_present(n, "noise_seed", cfg.backend.noise.noise_seed);
                }
            }
            if (j.contains("pipeline")) {
                const auto& p = j.at("pipeline");
                get_if_present(p, "samples_target", cfg.pipeline.samples_target);
                get_if_present(p, "categories_per_sample", cfg.pipeline.categories_per_sample);
                get_if_present(p, "detection_gate_threshold", cfg.pipeline.detection_gate_threshold);
                get_if_present(p, "master_seed", cfg.pipeline.master_seed);
                get_if_present(p, "retry_budget_factor", cfg.pipeline.retry_budget_factor);
            }
            if (j.contains("loss")) {
                const auto& l = j.at("loss");
                get_if_present(l, "w1", cfg.loss.w1);
                get_if_present(l, "w2", cfg.loss.w2);
                get_if_present(l, "w3", cfg.loss.w3);
                get_if_present(l, "alpha", cfg.loss.alpha);
            }
            if (j.contains("train")) {
                const auto& t = j.at("train");
                get_if_present(t, "learning_rate", cfg.train.learning_rate);
                get_if_present(t, "batch_size", cfg.train.batch_size);
                get_if_present(t, "steps", cfg.train.steps);
                get_if_present(t, "m_subset", cfg.train.m_subset);
                get_if_present(t, "embed_dim", cfg.train.embed_dim);
                get_if_present(t, "seed", cfg.train.seed);
            }
            if (j.contains("eval")) {
                const auto& e = j.at("eval");
                get_if_present(e, "bg_threshold", cfg.eval_bg_threshold);
                get_if_present(e, "points", cfg.eval_points);
            }
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config field error: ") + e.what());
        }
    }
    cfg.train.weights = cfg.loss;
    cfg.pipeline.conditions = cfg.conditions;
    cfg.pipeline.backend = cfg.backend;
    cfg.validate();
    return cfg;
}

void AppConfig::validate() const {
    if (conditions.conditions.empty()) throw ConfigError("prompt.conditions must be non-empty");
    if (backend.timeout_s <= 0) throw ConfigError("backend.timeout_s must be > 0");
    if (backend.retries < 0) throw ConfigError("backend.retries must be >= 0");
    if (backend.image_width < 16 || backend.image_height < 16)
        throw ConfigError("backend image dimensions must be at least 16");
    if (backend.noise.dropout_prob < 0 || backend.noise.dropout_prob > 1)
        throw ConfigError("backend.noise.dropout_prob must be in [0,1]");
    if (pipeline.samples_target < 1) throw ConfigError("pipeline.samples_target must be >= 1");
    if (pipeline.categories_per_sample < 1 || pipeline.categories_per_sample > 2)
        throw ConfigError("pipeline.categories_per_sample must be 1 or 2");
    if (pipeline.detection_gate_threshold < 0 || pipeline.detection_gate_threshold > 1)
        throw ConfigError("pipeline.detection_gate_threshold must be in [0,1]");
    if (loss.w1 < 0 || loss.w2 < 0 || loss.w3 < 0 || loss.alpha < 0)
        throw ConfigError("loss weights and alpha must be non-negative");
    if (train.learning_rate <= 0) throw ConfigError("train.learning_rate must be > 0");
    if (train.steps < 1) throw ConfigError("train.steps must be >= 1");
    if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (train.m_subset < 1) throw ConfigError("train.m_subset must be >= 1");
    if (train.embed_dim < 1) throw ConfigError("train.embed_dim must be >= 1");
    if (eval_bg_threshold < 0 || eval_bg_threshold > 1)
        throw ConfigError("eval.bg_threshold must be in [0,1]");
    if (eval_points < 1) throw ConfigError("eval.points must be >= 1");
}

json AppConfig::to_json() const {
    json j;
    j["prompt"] = {{"conditions", conditions.conditions}};
    j["backend"] = {{"text_endpoint", backend.text_endpoint},
                    {"image_endpoint", backend.image_endpoint},
                    {"detect_endpoint", backend.detect_endpoint},
                    {"segment_endpoint", backend.segment_endpoint},
                    {"timeout_s", backend.timeout_s},
                    {"retries", backend.retries},
                    {"image_width", backend.image_width},
                    {"image_height", backend.image_height},
                    {"noise",
                     {{"box_jitter_sigma", backend.noise.box_jitter_sigma},
                      {"dropout_prob", backend.noise.dropout_prob},
                      {"noise_seed", backend.noise.noise_seed}}}};
    j["pipeline"] = {{"samples_target", pipeline.samples_target},
                     {"categories_per_sample", pipeline.categories_per_sample},
                     {"detection_gate_threshold", pipeline.detection_gate_threshold},
                     {"master_seed", pipeline.master_seed},
                     {"retry_budget_factor", pipeline.retry_budget_factor}};
    j["loss"] = {{"w1", loss.w1}, {"w2", loss.w2}, {"w3", loss.w3}, {"alpha", loss.alpha}};
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"batch_size", train.batch_size},
                  {"steps", train.steps},
                  {"m_subset", train.m_subset},
                  {"embed_dim", train.embed_dim},
                  {"seed", train.seed}};
    j["eval"] = {{"bg_threshold", eval_bg_threshold}, {"points", eval_points}};
    return j;
}

}  // namespace magicforge
