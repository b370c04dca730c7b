#include "formstruct/formstruct.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "formstruct/checkpoint.hpp"
#include "formstruct/dump.hpp"
#include "formstruct/errors.hpp"
#include "formstruct/evaluation.hpp"
#include "formstruct/funsd.hpp"
#include "formstruct/hierarchy.hpp"
#include "formstruct/model.hpp"
#include "formstruct/synthetic.hpp"
#include "formstruct/training.hpp"

using nlohmann::json;

struct formstruct_dataset {
    formstruct::Dataset ds;
};
struct formstruct_model {
    std::unique_ptr<formstruct::DocModel> model;
};
struct formstruct_report {
    formstruct::MetricsReport report;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
formstruct_status guarded(Fn&& fn) {
    try {
        fn();
        return FORMSTRUCT_OK;
    } catch (const formstruct::ConfigError& e) {
        g_last_error = e.what();
        return FORMSTRUCT_ERR_CONFIG;
    } catch (const formstruct::ParseError& e) {
        g_last_error = e.what();
        return FORMSTRUCT_ERR_PARSE;
    } catch (const formstruct::IoError& e) {
        g_last_error = e.what();
        return FORMSTRUCT_ERR_IO;
    } catch (const formstruct::ValidationError& e) {
        g_last_error = e.what();
        return FORMSTRUCT_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return FORMSTRUCT_ERR_RUNTIME;
    } catch (...) {
        g_last_error = "unknown error";
        return FORMSTRUCT_ERR_RUNTIME;
    }
}

formstruct_status bad_argument(const char* msg) {
    g_last_error = msg;
    return FORMSTRUCT_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* formstruct_version(void) { return "1.0.0"; }

const char* formstruct_last_error(void) { return g_last_error.c_str(); }

void formstruct_string_free(char* s) { std::free(s); }

formstruct_status formstruct_dataset_load_funsd(const char* root_dir, const char* split,
                                                int with_images, formstruct_dataset** out) {
    if (!root_dir || !split || !out) return bad_argument("null argument");
    return guarded([&] {
        auto handle = std::make_unique<formstruct_dataset>();
        handle->ds = formstruct::load_funsd(root_dir, split, with_images != 0);
        *out = handle.release();
    });
}

formstruct_status formstruct_dataset_load_dump(const char* path, formstruct_dataset** out) {
    if (!path || !out) return bad_argument("null argument");
    return guarded([&] {
        auto handle = std::make_unique<formstruct_dataset>();
        handle->ds = formstruct::load_dataset_dump(path);
        *out = handle.release();
    });
}

formstruct_status formstruct_dataset_synthesize(const char* config_json, uint64_t seed,
                                                formstruct_dataset** out) {
    if (!config_json || !out) return bad_argument("null argument");
    return guarded([&] {
        auto cfg = formstruct::SynthConfig::from_json(config_json);
        auto handle = std::make_unique<formstruct_dataset>();
        handle->ds = formstruct::generate_synthetic(cfg, seed);
        *out = handle.release();
    });
}

formstruct_status formstruct_dataset_save_dump(const formstruct_dataset* ds, const char* path,
                                               int with_crops) {
    if (!ds || !path) return bad_argument("null argument");
    return guarded([&] { formstruct::save_dataset_dump(ds->ds, path, with_crops != 0); });
}

formstruct_status formstruct_dataset_stats_json(const formstruct_dataset* ds, char** out_json) {
    if (!ds || !out_json) return bad_argument("null argument");
    return guarded([&] {
        json j{{"split", ds->ds.split_name},
               {"pages", ds->ds.pages.size()},
               {"fragments", ds->ds.fragment_count()},
               {"pairs", ds->ds.edge_count()},
               {"notes", ds->ds.notes}};
        *out_json = dup_string(j.dump());
    });
}

formstruct_status formstruct_dataset_page_ids_json(const formstruct_dataset* ds, char** out_json) {
    if (!ds || !out_json) return bad_argument("null argument");
    return guarded([&] {
        json ids = json::array();
        for (const auto& page : ds->ds.pages) ids.push_back(page.page_id);
        *out_json = dup_string(ids.dump());
    });
}

void formstruct_dataset_free(formstruct_dataset* ds) { delete ds; }

formstruct_status formstruct_model_create(const char* model_config_json, uint64_t seed,
                                          formstruct_model** out) {
    if (!model_config_json || !out) return bad_argument("null argument");
    return guarded([&] {
        auto cfg = formstruct::ModelConfig::from_json(model_config_json);
        auto handle = std::make_unique<formstruct_model>();
        handle->model = std::make_unique<formstruct::DocModel>(cfg, seed);
        *out = handle.release();
    });
}

formstruct_status formstruct_model_load(const char* checkpoint_path, formstruct_model** out) {
    if (!checkpoint_path || !out) return bad_argument("null argument");
    return guarded([&] {
        auto handle = std::make_unique<formstruct_model>();
        handle->model = formstruct::load_checkpoint(checkpoint_path);
        *out = handle.release();
    });
}

formstruct_status formstruct_model_save(formstruct_model* model, const char* checkpoint_path) {
    if (!model || !checkpoint_path) return bad_argument("null argument");
    return guarded([&] { formstruct::save_checkpoint(*model->model, nullptr, checkpoint_path); });
}

formstruct_status formstruct_model_resume(formstruct_model* model, const char* checkpoint_path) {
    if (!model || !checkpoint_path) return bad_argument("null argument");
    return guarded([&] { formstruct::load_checkpoint_into(*model->model, checkpoint_path); });
}

formstruct_status formstruct_model_summary_json(const formstruct_model* model, char** out_json) {
    if (!model || !out_json) return bad_argument("null argument");
    return guarded([&] {
        const formstruct::DocModel& m = *model->model;
        json counts;
        for (const auto& [module, n] : m.param_counts_by_module()) counts[module] = n;
        json j{{"config", json::parse(m.config().to_json())},
               {"config_fingerprint", m.config().fingerprint()},
               {"seed", m.seed()},
               {"epochs_completed", m.epochs_completed},
               {"joint_dim", m.joint_dim()},
               {"parameters_total", m.param_count()},
               {"parameters_by_module", counts},
               {"metrics_snapshot", json::parse(m.metrics_snapshot_json)}};
        *out_json = dup_string(j.dump(2));
    });
}

void formstruct_model_free(formstruct_model* model) { delete model; }

formstruct_status formstruct_train(formstruct_model* model, const formstruct_dataset* train,
                                   const formstruct_dataset* valid, const char* train_config_json,
                                   const char* log_path) {
    if (!model || !train || !train_config_json) return bad_argument("null argument");
    return guarded([&] {
        auto cfg = formstruct::TrainConfig::from_json(train_config_json);
        formstruct::Trainer trainer(*model->model, cfg);
        std::ofstream log;
        if (log_path) {
            log.open(log_path, std::ios::app);
            if (!log) throw formstruct::IoError(std::string("cannot open training log: ") + log_path);
        }
        auto sink = [&](const formstruct::EpochLog& e) {
            if (!log.is_open()) return;
            json j{{"epoch", e.epoch},
                   {"split", "train"},
                   {"loss", e.mean_edge_loss},
                   {"hit1", e.val_hit1 < 0 ? json(nullptr) : json(e.val_hit1)},
                   {"wall_s", e.wall_seconds},
                   {"edges", e.edges_seen},
                   {"edges_skipped", e.edges_skipped}};
            log << j.dump() << "\n";
            log.flush();
        };
        auto logs = trainer.train(train->ds, valid ? &valid->ds : nullptr, sink);
        if (!logs.empty()) {
            json snap{{"final_mean_edge_loss", logs.back().mean_edge_loss},
                      {"epochs", model->model->epochs_completed}};
            if (logs.back().val_hit1 >= 0) snap["val_hit1"] = logs.back().val_hit1;
            model->model->metrics_snapshot_json = snap.dump();
        }
    });
}

formstruct_status formstruct_evaluate(formstruct_model* model, const formstruct_dataset* ds,
                                      const char* eval_options_json, formstruct_report** out) {
    if (!model || !ds || !out) return bad_argument("null argument");
    return guarded([&] {
        formstruct::EvalOptions opts;
        if (eval_options_json && *eval_options_json) {
            json j;
            try {
                j = json::parse(eval_options_json);
            } catch (const json::exception& e) {
                throw formstruct::ParseError(std::string("eval options: ") + e.what());
            }
            if (j.contains("hit_ks")) opts.hit_ks = j["hit_ks"].get<std::vector<int>>();
            opts.collect_predictions = j.value("collect_predictions", false);
            opts.collect_gate_alphas = j.value("collect_gate_alphas", false);
            opts.threads = j.value("threads", 0);
        }
        auto handle = std::make_unique<formstruct_report>();
        handle->report = formstruct::evaluate(*model->model, ds->ds, opts);
        *out = handle.release();
    });
}

formstruct_status formstruct_report_json(const formstruct_report* report, char** out_json) {
    if (!report || !out_json) return bad_argument("null argument");
    return guarded([&] { *out_json = dup_string(report->report.to_json()); });
}

formstruct_status formstruct_report_table(const formstruct_report* report, const char* row_label,
                                          char** out_text) {
    if (!report || !out_text) return bad_argument("null argument");
    return guarded([&] {
        *out_text = dup_string(report->report.to_table(row_label ? row_label : "model"));
    });
}

formstruct_status formstruct_report_dump_predictions(const formstruct_report* report,
                                                     const char* path) {
    if (!report || !path) return bad_argument("null argument");
    return guarded([&] {
        if (report->report.predictions.empty())
            throw formstruct::ValidationError(
                "report holds no predictions; evaluate with collect_predictions");
        formstruct::write_prediction_dump(report->report, path);
    });
}

void formstruct_report_free(formstruct_report* report) { delete report; }

formstruct_status formstruct_predict_page(formstruct_model* model, const formstruct_dataset* ds,
                                          const char* page_id, const char* threshold_json,
                                          char** out_text) {
    if (!model || !ds || !page_id || !out_text) return bad_argument("null argument");
    return guarded([&] {
        const formstruct::Page* page = ds->ds.find_page(page_id);
        if (!page)
            throw formstruct::ValidationError(std::string("page '") + page_id + "' not in dataset");
        std::optional<double> threshold;
        if (threshold_json && *threshold_json && std::string(threshold_json) != "null")
            threshold = json::parse(threshold_json).get<double>();
        formstruct::PageHierarchy h = formstruct::predict_hierarchy(*model->model, *page, threshold);
        std::string text;
        for (const std::string& w : h.warnings) text += "warning: " + w + "\n";
        text += h.to_text(*page);
        *out_text = dup_string(text);
    });
}

}  // extern "C"
