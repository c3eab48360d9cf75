#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "magicforge/backends.hpp"
#include "magicforge/prompt.hpp"
#include "magicforge/types.hpp"

namespace magicforge {

struct PipelineConfig {
    int samples_target = 1;
    int categories_per_sample = 1;  // 1 or 2
    double detection_gate_threshold = 0.35;
    std::uint64_t master_seed = 0;
    BackendConfig backend;
    ConditionSet conditions = ConditionSet::defaults();
    std::string out_dir;
    int retry_budget_factor = 20;  // max attempts = factor * samples_target
    int jobs = 1;
};

struct Rejection {
    std::string reason;
};

struct SynthesizedSample {
    SampleRecord record;
    Image image;
    Image counterfactual_image;
};

using SynthResult = std::variant<SynthesizedSample, Rejection>;

// One quadruplet: instruction -> text -> image pair -> detect -> segment.
// Quality-gate failures come back as Rejection; transport errors propagate as
// exceptions. The record id and image refs are filled in by run_pipeline.
SynthResult synthesize_sample(const std::vector<int>& categories, std::uint64_t seed,
                              Backend& backend, const Vocabulary& vocab,
                              const PipelineConfig& config);

struct RunReport {
    int accepted = 0;
    int attempts = 0;
    std::map<std::string, int> rejected_by_reason;

    json to_json() const;
};

// Generates exactly samples_target accepted records, retrying rejected
// attempts with fresh derived seeds. Writes manifest.jsonl, vocabulary.json,
// images/ and run-report.json under config.out_dir when out_dir is non-empty.
// Throws when the retry budget is exhausted.
std::pair<Manifest, RunReport> run_pipeline(const Vocabulary& vocab, const PipelineConfig& config);

}  // namespace magicforge
