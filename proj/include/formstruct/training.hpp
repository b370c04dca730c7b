#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "formstruct/document.hpp"
#include "formstruct/model.hpp"
#include "formstruct/rng.hpp"

namespace formstruct {

// Fixed-size negative set for one gold edge; negatives are candidate
// superiors drawn from the same page, never the child itself and never any
// of the child's gold parents.
struct NegativeSampleSet {
    int child_id = -1;
    int positive_parent_id = -1;
    std::vector<int> negative_parent_ids;
};

struct TrainConfig {
    int negatives = 10;  // K
    int epochs = 50;
    int batch_edges = 24;  // batches close at a page boundary once reached
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    uint64_t seed = 1;
    int eval_every = 5;  // validation cadence in epochs; 0 disables
    int threads = 0;     // 0 = auto

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// Uniform draw without replacement from the eligible fragments of the page.
// Returns all eligible candidates when fewer than K remain; the set may be
// empty (the caller skips the edge and counts it).
NegativeSampleSet sample_negatives(const HierarchyEdge& edge, const Page& page, int k, Rng& rng);

// Numerically stable softmax cross-entropy of the positive score against the
// negatives: -log( exp(p) / (exp(p) + sum_k exp(n_k)) ).
double edge_loss_value(double positive_score, const std::vector<double>& negative_scores);
Tape::Id edge_loss(Tape& tape, Tape::Id positive_score, const std::vector<Tape::Id>& negative_scores);

// Adaptive-moment (or plain SGD) parameter update.
class Optimizer {
public:
    Optimizer(std::string kind, double lr);
    void step(const std::vector<Param*>& params, const std::vector<Tensor>& grads);
    int64_t steps_taken() const { return t_; }

private:
    std::string kind_;
    double lr_;
    int64_t t_ = 0;
};

struct EpochLog {
    int epoch = 0;
    double mean_edge_loss = 0.0;
    double val_hit1 = -1.0;  // negative when no validation ran
    double wall_seconds = 0.0;
    int64_t edges_seen = 0;
    int64_t edges_skipped = 0;  // edges with no eligible negatives
};

// Negative-sampling trainer. Deterministic for a fixed seed: sampling and
// shuffling happen on one serial stream, page gradients reduce in page
// order regardless of the worker count.
class Trainer {
public:
    Trainer(DocModel& model, TrainConfig config);

    // Trains in place. Returns the per-epoch log; when a validation split is
    // given the model ends at the best-validation parameters.
    std::vector<EpochLog> train(const Dataset& train_data, const Dataset* valid_data = nullptr,
                                const std::function<void(const EpochLog&)>& sink = nullptr);

    const TrainConfig& config() const { return config_; }

private:
    DocModel& model_;
    TrainConfig config_;
};

}  // namespace formstruct
