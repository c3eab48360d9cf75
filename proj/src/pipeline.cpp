#include "magicforge/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <stdexcept>

#include "magicforge/rng.hpp"

namespace magicforge {

namespace fs = std::filesystem;

SynthResult synthesize_sample(const std::vector<int>& categories, std::uint64_t seed,
                              Backend& backend, const Vocabulary& vocab,
                              const PipelineConfig& config) {
    std::vector<std::string> names;
    for (int c : categories) names.push_back(vocab.name(c));

    const std::string instruction = build_instruction(names, config.conditions, 1);
    const std::string text = backend.generate_text(instruction, seed);
    for (const auto& name : names)
        if (!contains_category(text, name))
            return Rejection{"category absent from text: " + name};

    auto counterfactual = counterfactualize(text, names);

    Image image = backend.generate_image(text, seed);
    Image image_co = backend.generate_image(counterfactual.text, seed);
    if (image.width != image_co.width || image.height != image_co.height)
        throw std::runtime_error("counterfactual image dimensions differ from original");

    auto boxes = backend.detect(image, names);

    SynthesizedSample sample;
    sample.image = std::move(image);
    sample.counterfactual_image = std::move(image_co);
    SampleRecord& record = sample.record;
    record.text = text;
    record.counterfactual_text = counterfactual.text;
    record.categories = categories;
    record.seed = seed;
    record.provenance["backend"] = backend.name();

    for (std::size_t i = 0; i < categories.size(); ++i) {
        const auto& name = names[i];
        // All boxes of this category above the gate; masks from multiple
        // instances are unioned into one per-category mask.
        std::vector<const DetectionBox*> hits;
        for (const auto& b : boxes)
            if (b.category == name && b.confidence >= config.detection_gate_threshold)
                hits.push_back(&b);
        if (hits.empty()) return Rejection{"target not detected: " + name};

        std::vector<std::uint8_t> merged(
            static_cast<std::size_t>(sample.image.width) * sample.image.height, 0);
        for (const auto* box : hits) {
            auto grid = backend.segment(sample.image, *box);
            if (grid.size() != merged.size())
                throw std::runtime_error("segmenter returned mask of unexpected size");
            for (std::size_t k = 0; k < merged.size(); ++k) merged[k] |= grid[k];
        }
        record.masks.push_back(
            rle_encode(merged, sample.image.width, sample.image.height, categories[i]));
    }
    return sample;
}

json RunReport::to_json() const {
    json j;
    j["accepted"] = accepted;
    j["attempts"] = attempts;
    j["rejected_by_reason"] = rejected_by_reason;
    return j;
}

namespace {

std::vector<int> draw_categories(const Vocabulary& vocab, int count, Rng& rng) {
    std::vector<int> ids(vocab.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    std::vector<int> picked;
    for (int i = 0; i < count; ++i) {
        std::size_t j = static_cast<std::size_t>(i) + rng.below(ids.size() - i);
        std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
        picked.push_back(ids[static_cast<std::size_t>(i)]);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace

std::pair<Manifest, RunReport> run_pipeline(const Vocabulary& vocab, const PipelineConfig& config) {
    if (vocab.size() == 0) throw std::invalid_argument("run_pipeline: empty vocabulary");
    if (config.samples_target < 1) throw std::invalid_argument("run_pipeline: samples_target >= 1");
    if (config.categories_per_sample < 1 || config.categories_per_sample > 2)
        throw std::invalid_argument("run_pipeline: categories_per_sample must be 1 or 2");

    auto backend = make_backend(config.backend, vocab);
    const int max_attempts = config.retry_budget_factor * config.samples_target;
    const int jobs = std::max(1, config.jobs);

    Manifest manifest;
    RunReport report;

    const bool write_outputs = !config.out_dir.empty();
    fs::path out_dir(config.out_dir);
    if (write_outputs) fs::create_directories(out_dir / "images");

    // Attempt i is a pure function of (master_seed, i); waves of `jobs`
    // attempts run concurrently and results are consumed in index order, so
    // concurrency never changes the output.
    int next_attempt = 0;
    while (report.accepted < config.samples_target) {
        if (next_attempt >= max_attempts)
            throw std::runtime_error(
                "retry budget exhausted after " + std::to_string(next_attempt) + " attempts (" +
                std::to_string(report.accepted) + "/" + std::to_string(config.samples_target) +
                " accepted)");
        const int wave = std::min(jobs, max_attempts - next_attempt);
        std::vector<std::future<SynthResult>> futures;
        for (int w = 0; w < wave; ++w) {
            const int attempt = next_attempt + w;
            futures.push_back(std::async(
                jobs > 1 ? std::launch::async : std::launch::deferred, [&, attempt] {
                    const std::uint64_t seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(attempt));
                    Rng rng(seed);
                    auto categories = draw_categories(vocab, config.categories_per_sample, rng);
                    return synthesize_sample(categories, seed, *backend, vocab, config);
                }));
        }
        for (int w = 0; w < wave && report.accepted < config.samples_target; ++w) {
            ++report.attempts;
            auto result = futures[static_cast<std::size_t>(w)].get();
            if (auto* rejection = std::get_if<Rejection>(&result)) {
                ++report.rejected_by_reason[rejection->reason];
                continue;
            }
            auto& sample = std::get<SynthesizedSample>(result);
            auto& record = sample.record;
            char idbuf[16];
            std::snprintf(idbuf, sizeof idbuf, "s%06d", report.accepted);
            record.id = idbuf;
            record.image_ref = "images/" + record.id + ".png";
            record.counterfactual_image_ref = "images/" + record.id + "_co.png";

            auto violations = validate_sample(record, vocab, sample.image.width, sample.image.height);
            if (!violations.empty())
                throw std::runtime_error("pipeline produced invalid record " + record.id + ": " +
                                         violations.front());
            if (write_outputs) {
                write_png(sample.image, (out_dir / record.image_ref).string());
                write_png(sample.counterfactual_image, (out_dir / record.counterfactual_image_ref).string());
            }
            manifest.records.push_back(std::move(record));
            ++report.accepted;
        }
        next_attempt += wave;
    }

    if (write_outputs) {
        vocab.save((out_dir / "vocabulary.json").string());
        manifest.save((out_dir / "manifest.jsonl").string());
        json rj = report.to_json();
        rj["master_seed"] = config.master_seed;
        rj["detection_gate_threshold"] = config.detection_gate_threshold;
        rj["categories_per_sample"] = config.categories_per_sample;
        std::ofstream rep(out_dir / "run-report.json");
        rep << rj.dump(2) << '\n';
    }
    return {std::move(manifest), std::move(report)};
}

}  // namespace magicforge
