// formstruct command-line front end. All heavy lifting goes through the
// shared library's C API; this file only parses arguments/config and
// formats output.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "formstruct/formstruct.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CliError {
    int code;
    std::string message;
};

[[noreturn]] void fail_validation(const std::string& msg) { throw CliError{kExitValidation, msg}; }

[[noreturn]] void fail_api(formstruct_status st) {
    const std::string msg = formstruct_last_error();
    const bool validation = st == FORMSTRUCT_ERR_INVALID_ARGUMENT || st == FORMSTRUCT_ERR_CONFIG ||
                            st == FORMSTRUCT_ERR_PARSE;
    throw CliError{validation ? kExitValidation : kExitRuntime, msg};
}

void check(formstruct_status st) {
    if (st != FORMSTRUCT_OK) fail_api(st);
}

std::string take_string(char* s) {
    std::string out = s ? s : "";
    formstruct_string_free(s);
    return out;
}

// RAII wrappers over the opaque handles.
struct DatasetHandle {
    formstruct_dataset* ptr = nullptr;
    ~DatasetHandle() { formstruct_dataset_free(ptr); }
};
struct ModelHandle {
    formstruct_model* ptr = nullptr;
    ~ModelHandle() { formstruct_model_free(ptr); }
};
struct ReportHandle {
    formstruct_report* ptr = nullptr;
    ~ReportHandle() { formstruct_report_free(ptr); }
};

struct RunConfig {
    json root;
    std::string source;  // synthetic | funsd | dump
    fs::path out_dir = "out";
    uint64_t seed = 1;
};

RunConfig load_config(const std::string& path, const std::optional<uint64_t>& seed_override,
                      const std::optional<std::string>& out_override) {
    std::ifstream in(path);
    if (!in) fail_validation("config file not found: " + path);
    RunConfig cfg;
    try {
        in >> cfg.root;
    } catch (const json::exception& e) {
        fail_validation("config " + path + ": invalid JSON: " + e.what());
    }
    if (!cfg.root.contains("dataset") || !cfg.root["dataset"].is_object())
        fail_validation("config: missing 'dataset' section");
    const json& ds = cfg.root["dataset"];
    if (!ds.contains("source")) fail_validation("config: dataset.source is required");
    cfg.source = ds["source"].get<std::string>();
    int provided = 0;
    if (ds.contains("synthetic")) ++provided;
    if (ds.contains("funsd_root")) ++provided;
    if (ds.contains("dump_train") || ds.contains("dump_test")) ++provided;
    if (provided > 1)
        fail_validation("config: exactly one dataset source may be configured (found " +
                        std::to_string(provided) + ")");
    if (cfg.source == "synthetic") {
        if (!ds.contains("synthetic")) fail_validation("config: dataset.synthetic section missing");
    } else if (cfg.source == "funsd") {
        if (!ds.contains("funsd_root")) fail_validation("config: dataset.funsd_root missing");
        if (!fs::is_directory(ds["funsd_root"].get<std::string>()))
            fail_validation("config: dataset.funsd_root does not exist: " +
                            ds["funsd_root"].get<std::string>());
    } else if (cfg.source == "dump") {
        for (const char* key : {"dump_train", "dump_test"}) {
            if (ds.contains(key) && !fs::exists(ds[key].get<std::string>()))
                fail_validation(std::string("config: dataset.") + key +
                                " does not exist: " + ds[key].get<std::string>());
        }
        if (!ds.contains("dump_train") && !ds.contains("dump_test"))
            fail_validation("config: dump source needs dump_train and/or dump_test");
    } else {
        fail_validation("config: unknown dataset.source '" + cfg.source + "'");
    }
    cfg.seed = cfg.root.value("seed", 1u);
    if (seed_override) cfg.seed = *seed_override;
    if (cfg.root.contains("output_dir")) cfg.out_dir = cfg.root["output_dir"].get<std::string>();
    if (out_override) cfg.out_dir = *out_override;
    return cfg;
}

json synth_section(const RunConfig& cfg, const std::string& split, int pages, uint64_t* seed_out) {
    json s = cfg.root["dataset"]["synthetic"];
    s["pages"] = pages;
    s["split_name"] = split;
    s.erase("train_pages");
    s.erase("test_pages");
    *seed_out = cfg.seed + (split == "test" ? 1 : 0);
    return s;
}

// Loads the requested split for any source. Synthetic datasets regenerate
// deterministically from (config, seed).
DatasetHandle load_split(const RunConfig& cfg, const std::string& split, bool with_images = true) {
    DatasetHandle h;
    const json& ds = cfg.root["dataset"];
    if (cfg.source == "synthetic") {
        const json& s = ds["synthetic"];
        const int pages = split == "test" ? s.value("test_pages", 20) : s.value("train_pages", 60);
        uint64_t seed = 0;
        json section = synth_section(cfg, split, pages, &seed);
        check(formstruct_dataset_synthesize(section.dump().c_str(), seed, &h.ptr));
    } else if (cfg.source == "funsd") {
        check(formstruct_dataset_load_funsd(ds["funsd_root"].get<std::string>().c_str(),
                                            split.c_str(), with_images ? 1 : 0, &h.ptr));
    } else {
        const std::string key = split == "test" ? "dump_test" : "dump_train";
        if (!ds.contains(key)) fail_validation("config: dataset." + key + " is required here");
        check(formstruct_dataset_load_dump(ds[key].get<std::string>().c_str(), &h.ptr));
    }
    return h;
}

json dataset_stats(const DatasetHandle& h) {
    char* s = nullptr;
    check(formstruct_dataset_stats_json(h.ptr, &s));
    return json::parse(take_string(s));
}

std::string model_section_json(const RunConfig& cfg) {
    if (!cfg.root.contains("model")) return "{}";
    return cfg.root["model"].dump();
}

std::string training_section_json(const RunConfig& cfg, uint64_t seed) {
    json t = cfg.root.value("training", json::object());
    if (!t.contains("seed")) t["seed"] = seed;
    return t.dump();
}

// Model-structure fields of a summary config, freeze flags stripped: used to
// detect checkpoint/config mismatches on evaluate/predict.
json structural_config(const json& model_config) {
    json c = model_config;
    c.erase("freeze");
    return c;
}

void require_checkpoint_matches(const RunConfig& cfg, const ModelHandle& model) {
    if (!cfg.root.contains("model")) return;
    char* s = nullptr;
    check(formstruct_model_summary_json(model.ptr, &s));
    json summary = json::parse(take_string(s));
    ModelHandle fresh;
    check(formstruct_model_create(model_section_json(cfg).c_str(), 0, &fresh.ptr));
    char* s2 = nullptr;
    check(formstruct_model_summary_json(fresh.ptr, &s2));
    json expect = json::parse(take_string(s2));
    if (structural_config(summary["config"]) != structural_config(expect["config"]))
        fail_validation(
            "checkpoint model configuration does not match the config file's model section:\n"
            "  checkpoint: " + structural_config(summary["config"]).dump() + "\n  config:     " +
            structural_config(expect["config"]).dump());
}

int cmd_synthesize(const RunConfig& cfg) {
    if (cfg.source != "synthetic")
        fail_validation("synthesize requires dataset.source == \"synthetic\"");
    fs::create_directories(cfg.out_dir);
    std::cout << "Split Pages Frag. Pairs\n";
    json checksums;
    for (const std::string split : {"train", "test"}) {
        DatasetHandle h = load_split(cfg, split);
        const fs::path dump = cfg.out_dir / (split + ".jsonl");
        check(formstruct_dataset_save_dump(h.ptr, dump.string().c_str(), 1));
        json stats = dataset_stats(h);
        std::cout << (split == "train" ? "Train" : "Test") << " " << stats["pages"] << " "
                  << stats["fragments"] << " " << stats["pairs"] << "\n";
    }
    std::cout << "wrote " << (cfg.out_dir / "train.jsonl") << " and " << (cfg.out_dir / "test.jsonl")
              << " with crop caches\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::optional<std::string>& checkpoint, bool resume) {
    fs::create_directories(cfg.out_dir);
    DatasetHandle train = load_split(cfg, "train");
    DatasetHandle valid = load_split(cfg, "test");

    ModelHandle model;
    check(formstruct_model_create(model_section_json(cfg).c_str(), cfg.seed, &model.ptr));
    if (resume) {
        const std::string ck =
            checkpoint.value_or((cfg.out_dir / "model.fsck").string());
        if (!fs::exists(ck)) fail_validation("--resume: checkpoint not found: " + ck);
        check(formstruct_model_resume(model.ptr, ck.c_str()));
        std::cout << "resumed from " << ck << "\n";
    }

    const fs::path log_path = cfg.out_dir / "train_log.jsonl";
    check(formstruct_train(model.ptr, train.ptr, valid.ptr,
                           training_section_json(cfg, cfg.seed).c_str(),
                           log_path.string().c_str()));

    const fs::path ck_path = cfg.out_dir / "model.fsck";
    check(formstruct_model_save(model.ptr, ck_path.string().c_str()));
    char* s = nullptr;
    check(formstruct_model_summary_json(model.ptr, &s));
    json summary = json::parse(take_string(s));
    std::cout << "checkpoint " << ck_path << " (epochs " << summary["epochs_completed"]
              << ", metrics " << summary["metrics_snapshot"].dump() << ")\n";
    std::cout << "training log " << log_path << "\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::optional<std::string>& checkpoint,
                 bool dump_predictions, const std::string& split) {
    if (!checkpoint) fail_validation("evaluate requires --checkpoint");
    if (!fs::exists(*checkpoint)) fail_validation("checkpoint not found: " + *checkpoint);
    fs::create_directories(cfg.out_dir);
    ModelHandle model;
    check(formstruct_model_load(checkpoint->c_str(), &model.ptr));
    require_checkpoint_matches(cfg, model);
    DatasetHandle data = load_split(cfg, split);

    json opts = cfg.root.value("evaluation", json::object());
    if (!opts.contains("hit_ks")) opts["hit_ks"] = {1, 2, 5};
    opts["collect_predictions"] = dump_predictions;
    ReportHandle report;
    check(formstruct_evaluate(model.ptr, data.ptr, opts.dump().c_str(), &report.ptr));

    char* table = nullptr;
    check(formstruct_report_table(report.ptr, "formstruct", &table));
    std::cout << take_string(table);
    char* rj = nullptr;
    check(formstruct_report_json(report.ptr, &rj));
    const fs::path metrics_path = cfg.out_dir / "metrics.json";
    std::ofstream out(metrics_path, std::ios::trunc);
    out << take_string(rj) << "\n";
    if (!out) throw CliError{kExitRuntime, "cannot write " + metrics_path.string()};
    std::cout << "metrics " << metrics_path << "\n";
    if (dump_predictions) {
        const fs::path pred_path = cfg.out_dir / "predictions.jsonl";
        check(formstruct_report_dump_predictions(report.ptr, pred_path.string().c_str()));
        std::cout << "predictions " << pred_path << "\n";
    }
    return kExitOk;
}

int cmd_predict(const RunConfig& cfg, const std::optional<std::string>& checkpoint,
                const std::optional<std::string>& page, const std::string& split,
                const std::optional<double>& threshold) {
    if (!checkpoint) fail_validation("predict requires --checkpoint");
    if (!fs::exists(*checkpoint)) fail_validation("checkpoint not found: " + *checkpoint);
    ModelHandle model;
    check(formstruct_model_load(checkpoint->c_str(), &model.ptr));
    require_checkpoint_matches(cfg, model);
    DatasetHandle data = load_split(cfg, split);

    std::vector<std::string> page_ids;
    if (page) {
        page_ids.push_back(*page);
    } else {
        char* s = nullptr;
        check(formstruct_dataset_page_ids_json(data.ptr, &s));
        for (const auto& pid : json::parse(take_string(s))) page_ids.push_back(pid.get<std::string>());
    }
    const std::string thr = threshold ? json(*threshold).dump() : "null";
    for (const std::string& pid : page_ids) {
        char* text = nullptr;
        check(formstruct_predict_page(model.ptr, data.ptr, pid.c_str(), thr.c_str(), &text));
        std::cout << take_string(text);
    }
    return kExitOk;
}

int cmd_inspect(const std::optional<std::string>& checkpoint) {
    if (!checkpoint) fail_validation("inspect requires --checkpoint");
    if (!fs::exists(*checkpoint)) fail_validation("checkpoint not found: " + *checkpoint);
    ModelHandle model;
    check(formstruct_model_load(checkpoint->c_str(), &model.ptr));
    char* s = nullptr;
    check(formstruct_model_summary_json(model.ptr, &s));
    std::cout << take_string(s) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"formstruct: key-value hierarchy extraction from form pages"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> checkpoint;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> page;
    std::optional<double> threshold;
    std::string split = "test";
    bool dump_predictions = false;
    bool resume = false;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "run configuration file (JSON)");
        if (needs_config) opt->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out_dir, "override the output directory");
        sub->add_option("--checkpoint", checkpoint, "checkpoint path");
    };

    CLI::App* synth = app.add_subcommand("synthesize", "generate a synthetic dataset dump");
    add_common(synth, true);
    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train, true);
    train->add_flag("--resume", resume, "continue from an existing checkpoint");
    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
    add_common(evaluate, true);
    evaluate->add_flag("--dump-predictions", dump_predictions, "write per-query ranked lists");
    evaluate->add_option("--split", split, "dataset split (train|test)");
    CLI::App* predict = app.add_subcommand("predict", "render the predicted hierarchy of a page");
    add_common(predict, true);
    predict->add_option("--page", page, "page id");
    predict->add_option("--threshold", threshold, "minimum attachment score");
    predict->add_option("--split", split, "dataset split (train|test)");
    CLI::App* inspect = app.add_subcommand("inspect", "print a checkpoint summary");
    add_common(inspect, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (inspect->parsed()) return cmd_inspect(checkpoint);
        RunConfig cfg = load_config(config_path, seed, out_dir);
        if (synth->parsed()) return cmd_synthesize(cfg);
        if (train->parsed()) return cmd_train(cfg, checkpoint, resume);
        if (evaluate->parsed()) return cmd_evaluate(cfg, checkpoint, dump_predictions, split);
        if (predict->parsed()) return cmd_predict(cfg, checkpoint, page, split, threshold);
        fail_validation("no subcommand");
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
