#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "magicforge/config.hpp"
#include "magicforge/gradcheck.hpp"
#include "magicforge/metrics.hpp"
#include "magicforge/pipeline.hpp"
#include "magicforge/trainer.hpp"

namespace fs = std::filesystem;
using namespace magicforge;

namespace {

void log_event(const json& j) { std::cerr << j.dump() << '\n'; }

std::string default_config_path() {
    const char* env = std::getenv("MAGICFORGE_CONFIG");
    return env ? env : "";
}

Vocabulary vocab_for_manifest(const std::string& manifest_path, const std::string& vocab_path) {
    if (!vocab_path.empty()) return Vocabulary::load(vocab_path);
    fs::path sibling = fs::path(manifest_path).parent_path() / "vocabulary.json";
    return Vocabulary::load(sibling.string());
}

void write_effective_config(const AppConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "config.json");
    out << cfg.to_json().dump(2) << '\n';
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_synth(const AppConfig& cfg_in, const std::string& vocab_path, int count,
              std::uint64_t seed, const std::string& out_dir, int jobs, bool seed_set,
              int count_set) {
    AppConfig cfg = cfg_in;
    auto vocab = Vocabulary::load(vocab_path);
    if (count_set) cfg.pipeline.samples_target = count;
    if (seed_set) cfg.pipeline.master_seed = seed;
    cfg.pipeline.out_dir = out_dir;
    cfg.pipeline.jobs = jobs;
    cfg.validate();
    write_effective_config(cfg, out_dir);

    log_event({{"event", "synth_start"},
               {"target", cfg.pipeline.samples_target},
               {"seed", cfg.pipeline.master_seed}});
    auto [manifest, report] = run_pipeline(vocab, cfg.pipeline);
    log_event({{"event", "synth_done"}, {"report", report.to_json()}});
    std::cout << "accepted " << report.accepted << " samples in " << report.attempts
              << " attempts -> " << out_dir << "/manifest.jsonl\n";
    for (const auto& [reason, n] : report.rejected_by_reason)
        std::cout << "  rejected " << n << "x: " << reason << '\n';
    return 0;
}

int cmd_validate(const std::string& manifest_path, const std::string& vocab_path) {
    auto vocab = vocab_for_manifest(manifest_path, vocab_path);
    auto manifest = Manifest::load(manifest_path);
    fs::path dir = fs::path(manifest_path).parent_path();
    std::size_t bad = 0;
    for (const auto& rec : manifest.records) {
        int w = 0, h = 0;
        fs::path img = dir / rec.image_ref;
        if (fs::exists(img)) {
            auto image = read_png(img.string());
            w = image.width;
            h = image.height;
        }
        auto violations = validate_sample(rec, vocab, w, h);
        for (const auto& v : violations) {
            ++bad;
            log_event({{"event", "violation"}, {"id", rec.id}, {"detail", v}});
            std::cout << rec.id << ": " << v << '\n';
        }
    }
    std::cout << manifest.records.size() << " records, " << bad << " violations\n";
    return bad == 0 ? 0 : 1;
}

int cmd_label(const AppConfig& cfg, const std::string& vocab_path,
              const std::vector<std::string>& images, const std::string& categories_csv,
              const std::string& out_path) {
    auto vocab = Vocabulary::load(vocab_path);
    auto categories = split_csv(categories_csv);
    if (categories.empty()) throw ConfigError("label: --categories must name at least one category");
    for (const auto& c : categories)
        if (vocab.id_of(c) < 0) throw ConfigError("label: category not in vocabulary: " + c);

    auto backend = make_backend(cfg.backend, vocab);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write: " + out_path);
    for (const auto& path : images) {
        auto image = read_png(path);
        auto boxes = backend->detect(image, categories);
        for (const auto& name : categories) {
            std::vector<std::uint8_t> merged(static_cast<std::size_t>(image.width) * image.height, 0);
            int hits = 0;
            for (const auto& b : boxes) {
                if (b.category != name || b.confidence < cfg.pipeline.detection_gate_threshold)
                    continue;
                ++hits;
                auto grid = backend->segment(image, b);
                for (std::size_t k = 0; k < merged.size(); ++k) merged[k] |= grid[k];
            }
            auto mask = rle_encode(merged, image.width, image.height, vocab.id_of(name));
            json line{{"image", path},       {"category", name},
                      {"category_id", mask.category_id}, {"detections", hits},
                      {"width", mask.width}, {"height", mask.height},
                      {"runs", mask.runs}};
            out << line.dump() << '\n';
        }
        log_event({{"event", "labeled"}, {"image", path}});
    }
    std::cout << "wrote labels for " << images.size() << " image(s) -> " << out_path << '\n';
    return 0;
}

int cmd_train(const AppConfig& cfg, const std::string& manifest_path,
              const std::string& vocab_path, const std::string& out_path) {
    auto vocab = vocab_for_manifest(manifest_path, vocab_path);
    auto manifest = Manifest::load(manifest_path);
    const std::string dir = fs::path(manifest_path).parent_path().string();

    log_event({{"event", "train_start"}, {"records", manifest.records.size()},
               {"steps", cfg.train.steps}});
    auto result = fit(manifest, dir, vocab, cfg.train);

    json out;
    out["model"] = result.model.to_json();
    out["config"] = cfg.to_json();
    json history = json::array();
    for (const auto& r : result.history)
        history.push_back({{"focal", r.focal}, {"dice", r.dice}, {"cosine", r.cosine}, {"total", r.total}});
    out["history"] = std::move(history);
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + out_path);
    f << out.dump() << '\n';

    std::cout << "trained " << cfg.train.steps << " steps; total loss " << result.history.front().total
              << " -> " << result.history.back().total << "; checkpoint " << out_path << '\n';
    return 0;
}

std::vector<int> manifest_categories(const Manifest& m) {
    std::set<int> cats;
    for (const auto& r : m.records)
        for (int c : r.categories) cats.insert(c);
    return {cats.begin(), cats.end()};
}

int cmd_eval(const AppConfig& cfg, const std::string& gt_path, const std::string& pred_path,
             const std::string& model_path, const std::string& vocab_path, const std::string& mode,
             std::size_t points, double bg_threshold, std::uint64_t seed,
             const std::string& report_path) {
    auto vocab = vocab_for_manifest(gt_path, vocab_path);
    auto gt_manifest = Manifest::load(gt_path);
    const std::string gt_dir = fs::path(gt_path).parent_path().string();

    std::vector<LabelGrid> gt_grids, pred_grids;
    for (const auto& rec : gt_manifest.records) gt_grids.push_back(label_grid_from_masks(rec.masks));

    std::vector<int> categories;
    if (!model_path.empty()) {
        auto model = ToyModelState::load(model_path);
        categories.resize(vocab.size());
        for (std::size_t i = 0; i < vocab.size(); ++i) categories[i] = static_cast<int>(i);
        for (const auto& rec : gt_manifest.records) {
            auto features = extract_features(read_png((fs::path(gt_dir) / rec.image_ref).string()));
            auto fwd = forward(model, features, categories);
            pred_grids.push_back(assign_labels(fwd.pred, categories, bg_threshold));
        }
    } else if (!pred_path.empty()) {
        auto pred_manifest = Manifest::load(pred_path);
        if (pred_manifest.records.size() != gt_manifest.records.size())
            throw std::runtime_error("eval: gt and pred manifests differ in record count");
        for (const auto& rec : pred_manifest.records)
            pred_grids.push_back(label_grid_from_masks(rec.masks));
        categories = manifest_categories(gt_manifest);
        for (int c : manifest_categories(pred_manifest))
            if (std::find(categories.begin(), categories.end(), c) == categories.end())
                categories.push_back(c);
        std::sort(categories.begin(), categories.end());
    } else {
        throw ConfigError("eval: provide either --pred or --model");
    }

    MetricReport report;
    if (mode == "miou") {
        report = miou(pred_grids, gt_grids, categories);
    } else if (mode == "pmiou") {
        Rng rng(seed);
        report = p_miou(pred_grids, gt_grids, categories, points, rng);
    } else {
        throw ConfigError("eval: --mode must be miou or pmiou");
    }

    json rj = report.to_json(&vocab);
    rj["mode"] = mode;
    rj["bg_threshold"] = bg_threshold;
    if (mode == "pmiou") rj["points_per_image"] = points;
    rj["config"] = cfg.to_json();
    std::ofstream f(report_path);
    f << rj.dump(2) << '\n';
    std::cout << mode << " = " << report.mean_iou << " over " << report.per_category_iou.size()
              << " categories -> " << report_path << '\n';
    return 0;
}

int cmd_gradcheck() {
    auto report = run_gradcheck();
    std::cout << "focal      max rel err " << report.focal_max_rel_err << "  (tol 1e-5)\n";
    std::cout << "dice       max rel err " << report.dice_max_rel_err << "  (tol 1e-5)\n";
    std::cout << "cosine     max rel err " << report.cosine_max_rel_err << "  (tol 1e-5)\n";
    std::cout << "end-to-end max rel err " << report.end_to_end_max_rel_err << "  (tol 1e-4)\n";
    std::cout << (report.pass() ? "gradcheck PASS\n" : "gradcheck FAIL\n");
    return report.pass() ? 0 : 1;
}

int cmd_ablate(const AppConfig& cfg, const std::string& manifest_path,
               const std::string& eval_manifest_path, const std::string& vocab_path,
               const std::string& sweep, int seeds, double bg_threshold,
               const std::string& out_path) {
    auto vocab = vocab_for_manifest(manifest_path, vocab_path);
    auto train_manifest = Manifest::load(manifest_path);
    auto eval_manifest = Manifest::load(eval_manifest_path);
    const std::string train_dir = fs::path(manifest_path).parent_path().string();
    const std::string eval_dir = fs::path(eval_manifest_path).parent_path().string();

    std::string spec = sweep;
    if (spec.rfind("m=", 0) == 0) spec = spec.substr(2);
    std::vector<int> eval_cats(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) eval_cats[i] = static_cast<int>(i);

    json table = json::array();
    std::cout << "m\tseed\tmIoU\n";
    for (const auto& token : split_csv(spec)) {
        std::size_t m = (token == "full") ? vocab.size() : static_cast<std::size_t>(std::stoul(token));
        for (int s = 0; s < seeds; ++s) {
            TrainConfig tc = cfg.train;
            tc.m_subset = m;
            tc.seed = cfg.train.seed + static_cast<std::uint64_t>(s);
            auto fitres = fit(train_manifest, train_dir, vocab, tc);
            auto report = evaluate_model(fitres.model, eval_manifest, eval_dir, eval_cats, bg_threshold);
            std::cout << token << '\t' << tc.seed << '\t' << report.mean_iou << '\n';
            table.push_back({{"m", token}, {"seed", tc.seed}, {"miou", report.mean_iou}});
            log_event({{"event", "ablate_run"}, {"m", token}, {"seed", tc.seed},
                       {"miou", report.mean_iou}});
        }
    }
    if (!out_path.empty()) {
        json out{{"sweep", table}, {"bg_threshold", bg_threshold}, {"config", cfg.to_json()}};
        std::ofstream f(out_path);
        f << out.dump(2) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MagicForge: counterfactual synthetic segmentation pipeline and trainer"};
    app.require_subcommand(1);
    app.fallthrough();  // allow --config after the subcommand name

    std::string config_path = default_config_path();
    app.add_option("--config", config_path, "JSON config file (env MAGICFORGE_CONFIG as fallback)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string vocab_path, out_dir;
    int count = 0;
    std::uint64_t seed = 0;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    synth->add_option("--vocab", vocab_path, "vocabulary.json")->required();
    auto* count_opt = synth->add_option("--count", count, "accepted samples to produce");
    auto* seed_opt = synth->add_option("--seed", seed, "master seed");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--jobs", jobs, "concurrent sample workers");

    // label
    auto* label = app.add_subcommand("label", "detect+segment masks for supplied images");
    std::vector<std::string> label_images;
    std::string label_categories, label_out = "labels.jsonl";
    label->add_option("--vocab", vocab_path, "vocabulary.json")->required();
    label->add_option("--image", label_images, "input PNG (repeatable)")->required();
    label->add_option("--categories", label_categories, "comma-separated category names")->required();
    label->add_option("--out", label_out, "output JSONL path");

    // validate
    auto* validate = app.add_subcommand("validate", "check a manifest against the data model");
    std::string manifest_path;
    validate->add_option("--manifest", manifest_path, "manifest.jsonl")->required();
    validate->add_option("--vocab", vocab_path, "vocabulary.json (default: sibling of manifest)");

    // train
    auto* train = app.add_subcommand("train", "fit the desk-scale segmenter");
    std::string model_out = "model.json";
    train->add_option("--manifest", manifest_path, "training manifest.jsonl")->required();
    train->add_option("--vocab", vocab_path, "vocabulary.json (default: sibling of manifest)");
    train->add_option("--out", model_out, "checkpoint path");

    // eval
    auto* eval = app.add_subcommand("eval", "mIoU / p-mIoU evaluation");
    std::string pred_path, model_path, mode = "miou", report_path = "report.json";
    std::size_t points = 256;
    double bg_threshold = 0.95;
    std::uint64_t eval_seed = 0;
    eval->add_option("--manifest", manifest_path, "ground-truth manifest.jsonl")->required();
    eval->add_option("--pred", pred_path, "predicted-mask manifest.jsonl");
    eval->add_option("--model", model_path, "model checkpoint to run instead of --pred");
    eval->add_option("--vocab", vocab_path, "vocabulary.json (default: sibling of manifest)");
    eval->add_option("--mode", mode, "miou|pmiou");
    eval->add_option("--points", points, "points per image for pmiou");
    auto* bg_opt = eval->add_option("--bg-threshold", bg_threshold, "background threshold");
    eval->add_option("--seed", eval_seed, "point-sampling seed");
    eval->add_option("--report", report_path, "output report path");

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference gradient verification");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train+eval sweep over subset size m");
    std::string eval_manifest_path, sweep = "m=1,8,full", ablate_out = "ablation.json";
    int ablate_seeds = 3;
    double ablate_bg = 0.5;
    ablate->add_option("--manifest", manifest_path, "training manifest.jsonl")->required();
    ablate->add_option("--eval-manifest", eval_manifest_path, "held-out manifest.jsonl")->required();
    ablate->add_option("--vocab", vocab_path, "vocabulary.json (default: sibling of manifest)");
    ablate->add_option("--sweep", sweep, "e.g. m=1,8,full");
    ablate->add_option("--seeds", ablate_seeds, "seeds per setting");
    ablate->add_option("--bg-threshold", ablate_bg, "background threshold for evaluation");
    ablate->add_option("--out", ablate_out, "output table path");

    CLI11_PARSE(app, argc, argv);

    try {
        AppConfig cfg = AppConfig::load(config_path);
        if (bg_opt->count() == 0) bg_threshold = cfg.eval_bg_threshold;

        if (*synth)
            return cmd_synth(cfg, vocab_path, count, seed, out_dir, jobs, seed_opt->count() > 0,
                             count_opt->count() > 0);
        if (*label) return cmd_label(cfg, vocab_path, label_images, label_categories, label_out);
        if (*validate) return cmd_validate(manifest_path, vocab_path);
        if (*train) return cmd_train(cfg, manifest_path, vocab_path, model_out);
        if (*eval)
            return cmd_eval(cfg, manifest_path, pred_path, model_path, vocab_path, mode, points,
                            bg_threshold, eval_seed, report_path);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
        if (*ablate)
            return cmd_ablate(cfg, manifest_path, eval_manifest_path, vocab_path, sweep,
                              ablate_seeds, ablate_bg, ablate_out);
    } catch (const ConfigError& e) {
        log_event({{"event", "config_error"}, {"detail", e.what()}});
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log_event({{"event", "error"}, {"detail", e.what()}});
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
