#include "formstruct/model.hpp"

#include <cstdio>

#include <json.hpp>

#include "formstruct/errors.hpp"

using nlohmann::json;

namespace formstruct {

void ModelConfig::finalize(std::vector<std::string>* warnings) {
    if (!use_semantic && !use_layout && !use_visual)
        throw ConfigError("model: at least one modality must be enabled");
    semantic.validate();
    if (layout_dim <= 0) throw ConfigError("model: d^L must be positive");
    if (use_visual) {
        if ((semantic.dim + layout_dim) % 2 != 0) {
            ++layout_dim;
            if (warnings)
                warnings->push_back("d^S + d^L was odd; bumped d^L to " + std::to_string(layout_dim) +
                                    " so the bidirectional visual encoder can split d^V");
        }
        visual.out_dim = semantic.dim + layout_dim;
        visual.validate();
    } else {
        visual.out_dim = semantic.dim + layout_dim;
    }
    if (fusion != FusionStrategy::concat_all && use_visual && (!use_semantic || !use_layout))
        throw ConfigError("model: shift fusion requires semantic and layout together with visual; "
                          "use concat_all for partial modality runs");
}

namespace {

json spec_to_json(const TextEncoderSpec& s) {
    return json{{"kind", s.kind == TextEncoderKind::builtin_recurrent ? "builtin_recurrent"
                                                                      : "pretrained_adapter"},
                {"dim", s.dim},
                {"max_tokens", s.max_tokens},
                {"hash_buckets", s.hash_buckets},
                {"embed_dim", s.embed_dim},
                {"hidden", s.hidden},
                {"adapter", s.adapter_name}};
}

TextEncoderSpec spec_from_json(const json& j) {
    TextEncoderSpec s;
    const std::string kind = j.value("kind", "builtin_recurrent");
    if (kind == "builtin_recurrent")
        s.kind = TextEncoderKind::builtin_recurrent;
    else if (kind == "pretrained_adapter")
        s.kind = TextEncoderKind::pretrained_adapter;
    else
        throw ConfigError("unknown text encoder kind '" + kind + "'");
    s.dim = j.value("dim", kind == "pretrained_adapter" ? 768 : 64);
    s.max_tokens = j.value("max_tokens", kind == "pretrained_adapter" ? 512 : 128);
    s.hash_buckets = j.value("hash_buckets", 4096);
    s.embed_dim = j.value("embed_dim", 32);
    s.hidden = j.value("hidden", 32);
    s.adapter_name = j.value("adapter", "");
    return s;
}

}  // namespace

std::string ModelConfig::to_json() const {
    json j;
    json mods = json::array();
    if (use_semantic) mods.push_back("semantic");
    if (use_layout) mods.push_back("layout");
    if (use_visual) mods.push_back("visual");
    j["modalities"] = mods;
    j["fusion"] = formstruct::to_string(fusion);
    j["semantic"] = spec_to_json(semantic);
    j["layout"] = json{{"dim", layout_dim}};
    j["visual"] = json{{"backbone", visual.backbone},
                       {"input_height", visual.input_height},
                       {"min_width", visual.min_width},
                       {"max_width", visual.max_width},
                       {"channels", visual.channels},
                       {"rnn_layers", visual.rnn_layers}};
    j["freeze"] = json{{"semantic", freeze_semantic}, {"layout", freeze_layout}, {"visual", freeze_visual}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model config: invalid JSON: ") + e.what());
    }
    ModelConfig c;
    try {
        if (j.contains("modalities")) {
            c.use_semantic = c.use_layout = c.use_visual = false;
            for (const auto& m : j["modalities"]) {
                const std::string name = m.get<std::string>();
                if (name == "semantic") c.use_semantic = true;
                else if (name == "layout") c.use_layout = true;
                else if (name == "visual") c.use_visual = true;
                else throw ConfigError("unknown modality '" + name + "'");
            }
        }
        if (j.contains("fusion")) c.fusion = fusion_strategy_from_string(j["fusion"].get<std::string>());
        if (j.contains("semantic")) c.semantic = spec_from_json(j["semantic"]);
        if (j.contains("layout")) c.layout_dim = j["layout"].value("dim", 32);
        if (j.contains("visual")) {
            const json& v = j["visual"];
            c.visual.backbone = v.value("backbone", "small_crnn");
            c.visual.input_height = v.value("input_height", 32);
            c.visual.min_width = v.value("min_width", 32);
            c.visual.max_width = v.value("max_width", 512);
            if (v.contains("channels")) c.visual.channels = v["channels"].get<std::vector<int>>();
            c.visual.rnn_layers = v.value("rnn_layers", 2);
        }
        if (j.contains("freeze")) {
            c.freeze_semantic = j["freeze"].value("semantic", false);
            c.freeze_layout = j["freeze"].value("layout", false);
            c.freeze_visual = j["freeze"].value("visual", false);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    return c;
}

std::string ModelConfig::fingerprint() const {
    // FNV-1a over the canonical JSON form.
    const std::string s = to_json();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DocModel::DocModel(ModelConfig config, uint64_t seed) : config_(std::move(config)), seed_(seed) {
    config_.finalize();
    Rng rng(seed);
    if (config_.use_semantic) {
        Rng r = rng.fork(1);
        semantic_ = std::make_unique<SemanticEncoder>(config_.semantic, r);
    }
    if (config_.use_layout) {
        Rng r = rng.fork(2);
        layout_ = std::make_unique<LayoutEncoder>(config_.layout_dim, r);
    }
    if (config_.use_visual) {
        Rng r = rng.fork(3);
        visual_ = std::make_unique<VisualEncoder>(config_.visual, r);
    }
    {
        Rng r = rng.fork(4);
        fusion_ = std::make_unique<FeatureFusion>(config_.fusion, config_.semantic.dim,
                                                  config_.layout_dim,
                                                  config_.use_visual ? config_.visual.out_dim : 0, r);
    }
    joint_dim_ = fusion_->joint_dim(config_.use_semantic, config_.use_layout, config_.use_visual);
    {
        Rng r = rng.fork(5);
        scorer_ = std::make_unique<RelationScorer>(joint_dim_, r);
    }
    if (semantic_) semantic_->collect_params(params_);
    if (layout_) layout_->collect_params(params_);
    if (visual_) visual_->collect_params(params_);
    fusion_->collect_params(params_);
    scorer_->collect_params(params_);
}

PreparedCrops DocModel::prepare_crops(const Page& page) const {
    PreparedCrops crops;
    if (!config_.use_visual) return crops;
    crops.reserve(page.fragments.size());
    for (const Fragment& f : page.fragments) {
        if (f.crop && !f.crop->empty()) {
            crops.push_back(prepare_crop(*f.crop, config_.visual, f.id));
        } else if (page.image && !page.image->empty()) {
            crops.push_back(crop_and_resize(*page.image, f.closure(), config_.visual, f.id));
        } else {
            throw ValidationError("page '" + page.page_id + "' fragment " + std::to_string(f.id) +
                                  " has no image data; disable the visual modality for this dataset");
        }
    }
    return crops;
}

std::vector<Tape::Id> DocModel::page_features(Tape& tape, const Page& page, const PreparedCrops& crops,
                                              std::vector<Tape::Id>* alphas) {
    if (config_.use_visual && crops.size() != page.fragments.size())
        throw ValidationError("prepared crops out of sync with page fragments");
    std::vector<Tape::Id> out;
    out.reserve(page.fragments.size());
    // Fragments sharing text share one semantic node per page; gradients
    // accumulate through the shared subgraph.
    std::map<std::string, Tape::Id> text_memo;
    for (size_t i = 0; i < page.fragments.size(); ++i) {
        const Fragment& f = page.fragments[i];
        std::optional<Tape::Id> s, l, v;
        if (semantic_) {
            auto it = text_memo.find(f.text);
            if (it == text_memo.end())
                it = text_memo.emplace(f.text, semantic_->encode(tape, f.text)).first;
            s = it->second;
        }
        if (layout_) l = layout_->encode(tape, normalize_coordinates(f, page.width, page.height));
        if (visual_) v = visual_->encode(tape, crops[i]);
        Tape::Id alpha_node{};
        out.push_back(fusion_->fuse(tape, s, l, v, alphas ? &alpha_node : nullptr));
        if (alphas) alphas->push_back(alpha_node);
    }
    return out;
}

std::vector<Tensor> DocModel::page_feature_values(const Page& page, const PreparedCrops& crops,
                                                  std::vector<double>* alphas) {
    Tape tape(false);
    std::vector<Tape::Id> alpha_nodes;
    const bool gated = config_.fusion == FusionStrategy::concat_shift_gate && config_.use_visual;
    std::vector<Tape::Id> ids = page_features(tape, page, crops, alphas && gated ? &alpha_nodes : nullptr);
    std::vector<Tensor> out;
    out.reserve(ids.size());
    for (Tape::Id id : ids) out.push_back(tape.val(id));
    if (alphas) {
        alphas->clear();
        for (Tape::Id a : alpha_nodes) alphas->push_back(tape.val(a)[0]);
    }
    return out;
}

std::vector<Param*> DocModel::trainable_params() {
    std::vector<Param*> out;
    for (Param* p : params_) {
        const bool frozen = (config_.freeze_semantic && p->name.starts_with("semantic.")) ||
                            (config_.freeze_layout && p->name.starts_with("layout.")) ||
                            (config_.freeze_visual && p->name.starts_with("visual."));
        if (!frozen) out.push_back(p);
    }
    return out;
}

int64_t DocModel::param_count() const {
    int64_t n = 0;
    for (const Param* p : params_) n += p->numel();
    return n;
}

std::map<std::string, int64_t> DocModel::param_counts_by_module() const {
    std::map<std::string, int64_t> out;
    for (const Param* p : params_) {
        const std::string module = p->name.substr(0, p->name.find('.'));
        out[module] += p->numel();
    }
    return out;
}

}  // namespace formstruct
