#pragma once

#include <stdexcept>
#include <string>

#include "magicforge/pipeline.hpp"
#include "magicforge/trainer.hpp"

namespace magicforge {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Merged view of every module's configuration. Precedence is
// flags > config file > defaults; flag overrides are applied by the CLI after
// loading.
struct AppConfig {
    ConditionSet conditions = ConditionSet::defaults();
    BackendConfig backend;
    PipelineConfig pipeline;
    LossWeights loss;
    TrainConfig train;
    double eval_bg_threshold = 0.95;
    std::size_t eval_points = 256;

    // Parses the file if path is non-empty, then validates bounds.
    // Throws ConfigError on malformed input or out-of-range values.
    static AppConfig load(const std::string& path);

    void validate() const;
    json to_json() const;
};

}  // namespace magicforge
