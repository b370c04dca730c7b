#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "formstruct/document.hpp"
#include "formstruct/fusion.hpp"
#include "formstruct/layout_encoder.hpp"
#include "formstruct/scorer.hpp"
#include "formstruct/semantic_encoder.hpp"
#include "formstruct/visual_encoder.hpp"

namespace formstruct {

struct ModelConfig {
    bool use_semantic = true;
    bool use_layout = true;
    bool use_visual = true;
    FusionStrategy fusion = FusionStrategy::concat_shift_gate;
    TextEncoderSpec semantic;
    int layout_dim = 32;  // d^L
    VisualSpec visual;
    bool freeze_semantic = false;
    bool freeze_layout = false;
    bool freeze_visual = false;

    // Enforces modality/strategy compatibility and the d^V = d^S + d^L
    // constraint; bumps d^L by one (recorded in `warnings`) when the sum is
    // odd so the bidirectional visual encoder can split it.
    void finalize(std::vector<std::string>* warnings = nullptr);

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    std::string fingerprint() const;  // stable hash of the canonical JSON
};

// Crops normalized for the visual encoder, aligned with page.fragments.
using PreparedCrops = std::vector<ImageCrop>;

// Full scoring model: per-modality encoders, fusion, relation head.
class DocModel {
public:
    DocModel(ModelConfig config, uint64_t seed);

    const ModelConfig& config() const { return config_; }
    uint64_t seed() const { return seed_; }
    int joint_dim() const { return joint_dim_; }

    // Resized/padded crops for one page; empty when the visual modality is
    // off. Throws if crops are required but unavailable.
    PreparedCrops prepare_crops(const Page& page) const;

    // Joint features for every fragment of a page, on the tape. `alphas`
    // receives one gate node per fragment under the gated strategy.
    std::vector<Tape::Id> page_features(Tape& tape, const Page& page, const PreparedCrops& crops,
                                        std::vector<Tape::Id>* alphas = nullptr);

    // Inference forward: plain tensors, no gradient bookkeeping.
    std::vector<Tensor> page_feature_values(const Page& page, const PreparedCrops& crops,
                                            std::vector<double>* alphas = nullptr);

    RelationScorer& scorer() { return *scorer_; }
    const RelationScorer& scorer() const { return *scorer_; }
    SemanticEncoder* semantic() { return semantic_ ? semantic_.get() : nullptr; }
    LayoutEncoder* layout() { return layout_ ? layout_.get() : nullptr; }
    VisualEncoder* visual() { return visual_ ? visual_.get() : nullptr; }
    FeatureFusion& fusion() { return *fusion_; }

    // All trainable parameters in registration order (stable across runs).
    const std::vector<Param*>& params() { return params_; }
    // Parameters the optimizer may update (honors freeze flags).
    std::vector<Param*> trainable_params();
    int64_t param_count() const;
    std::map<std::string, int64_t> param_counts_by_module() const;

    // Training bookkeeping carried into checkpoints.
    int epochs_completed = 0;
    std::string metrics_snapshot_json = "{}";

private:
    ModelConfig config_;
    uint64_t seed_;
    int joint_dim_ = 0;
    std::unique_ptr<SemanticEncoder> semantic_;
    std::unique_ptr<LayoutEncoder> layout_;
    std::unique_ptr<VisualEncoder> visual_;
    std::unique_ptr<FeatureFusion> fusion_;
    std::unique_ptr<RelationScorer> scorer_;
    std::vector<Param*> params_;
};

}  // namespace formstruct
