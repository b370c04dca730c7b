#include "formstruct/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

#include <json.hpp>

#include "formstruct/errors.hpp"
#include "formstruct/evaluation.hpp"

using nlohmann::json;

namespace formstruct {

void TrainConfig::validate() const {
    if (negatives < 1) throw ConfigError("training: K (negatives) must be >= 1");
    if (epochs < 0) throw ConfigError("training: epochs must be >= 0");
    if (batch_edges < 1) throw ConfigError("training: batch_edges must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("training: learning rate must be positive");
    if (optimizer != "adam" && optimizer != "sgd")
        throw ConfigError("training: unknown optimizer '" + optimizer + "'");
    if (eval_every < 0) throw ConfigError("training: eval_every must be >= 0");
}

std::string TrainConfig::to_json() const {
    json j{{"negatives", negatives},   {"epochs", epochs},
           {"batch_edges", batch_edges}, {"learning_rate", learning_rate},
           {"optimizer", optimizer},   {"seed", seed},
           {"eval_every", eval_every}, {"threads", threads}};
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("train config: invalid JSON: ") + e.what());
    }
    TrainConfig c;
    c.negatives = j.value("negatives", c.negatives);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_edges = j.value("batch_edges", c.batch_edges);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.threads = j.value("threads", c.threads);
    return c;
}

NegativeSampleSet sample_negatives(const HierarchyEdge& edge, const Page& page, int k, Rng& rng) {
    NegativeSampleSet set;
    set.child_id = edge.child_id;
    set.positive_parent_id = edge.parent_id;
    std::vector<int> gold = page.parents_of(edge.child_id);
    std::vector<int> eligible;
    eligible.reserve(page.fragments.size());
    for (const Fragment& f : page.fragments) {
        if (f.id == edge.child_id) continue;
        if (std::find(gold.begin(), gold.end(), f.id) != gold.end()) continue;
        eligible.push_back(f.id);
    }
    const int take = std::min<int>(k, static_cast<int>(eligible.size()));
    // Partial Fisher-Yates over the eligible pool.
    for (int i = 0; i < take; ++i) {
        const size_t j = static_cast<size_t>(i) +
                         static_cast<size_t>(rng.next_below(eligible.size() - static_cast<size_t>(i)));
        std::swap(eligible[static_cast<size_t>(i)], eligible[j]);
        set.negative_parent_ids.push_back(eligible[static_cast<size_t>(i)]);
    }
    return set;
}

double edge_loss_value(double positive_score, const std::vector<double>& negative_scores) {
    if (negative_scores.empty()) return 0.0;
    double mx = positive_score;
    for (double s : negative_scores) mx = std::max(mx, s);
    double acc = std::exp(positive_score - mx);
    for (double s : negative_scores) acc += std::exp(s - mx);
    return mx + std::log(acc) - positive_score;
}

Tape::Id edge_loss(Tape& tape, Tape::Id positive_score, const std::vector<Tape::Id>& negative_scores) {
    std::vector<Tape::Id> all;
    all.reserve(negative_scores.size() + 1);
    all.push_back(positive_score);
    all.insert(all.end(), negative_scores.begin(), negative_scores.end());
    return tape.sub(tape.logsumexp(all), positive_score);
}

Optimizer::Optimizer(std::string kind, double lr) : kind_(std::move(kind)), lr_(lr) {}

void Optimizer::step(const std::vector<Param*>& params, const std::vector<Tensor>& grads) {
    ++t_;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        const Tensor& g = grads[i];
        if (g.data.empty()) continue;  // parameter untouched this step
        if (kind_ == "sgd") {
            for (int64_t n = 0; n < p.value.numel(); ++n) p.value[n] -= lr_ * g[n];
            continue;
        }
        if (p.adam_m.data.empty()) {
            p.adam_m = Tensor(p.value.shape);
            p.adam_v = Tensor(p.value.shape);
        }
        for (int64_t n = 0; n < p.value.numel(); ++n) {
            const double gn = g[n];
            p.adam_m[n] = b1 * p.adam_m[n] + (1.0 - b1) * gn;
            p.adam_v[n] = b2 * p.adam_v[n] + (1.0 - b2) * gn * gn;
            const double mhat = p.adam_m[n] / bc1;
            const double vhat = p.adam_v[n] / bc2;
            p.value[n] -= lr_ * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

int auto_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::max(1u, std::min(hw, 8u)));
}

struct PageWork {
    const Page* page = nullptr;
    std::vector<NegativeSampleSet> sets;  // aligned with usable edges
};

struct PageResult {
    double loss_sum = 0.0;
    int64_t edges = 0;
    std::vector<Tensor> grads;  // aligned with trainable param list; empty = untouched
    bool non_finite = false;
};

}  // namespace

Trainer::Trainer(DocModel& model, TrainConfig config) : model_(model), config_(std::move(config)) {
    config_.validate();
}

std::vector<EpochLog> Trainer::train(const Dataset& train_data, const Dataset* valid_data,
                                     const std::function<void(const EpochLog&)>& sink) {
    if (train_data.pages.empty()) throw ValidationError("train: dataset is empty");
    for (const Page& p : train_data.pages)
        if (!p.edges.empty() && p.fragments.size() < 2)
            throw ValidationError("train: page '" + p.page_id + "' has edges but fewer than 2 fragments");

    std::vector<Param*> trainable = model_.trainable_params();
    Optimizer opt(config_.optimizer, config_.learning_rate);
    Rng rng(config_.seed);
    const int threads = auto_threads(config_.threads);

    // Crop preparation is deterministic; do it once.
    std::vector<PreparedCrops> crops(train_data.pages.size());
    for (size_t i = 0; i < train_data.pages.size(); ++i)
        crops[i] = model_.prepare_crops(train_data.pages[i]);

    // Fragment-id -> index maps per page.
    std::vector<std::map<int, size_t>> frag_index(train_data.pages.size());
    for (size_t i = 0; i < train_data.pages.size(); ++i)
        for (size_t fi = 0; fi < train_data.pages[i].fragments.size(); ++fi)
            frag_index[i][train_data.pages[i].fragments[fi].id] = fi;

    std::vector<EpochLog> logs;
    std::vector<Tensor> best_params;
    double best_val = -1.0;

    auto snapshot = [&]() {
        std::vector<Tensor> out;
        out.reserve(model_.params().size());
        for (Param* p : model_.params()) out.push_back(p->value);
        return out;
    };
    auto restore = [&](const std::vector<Tensor>& snap) {
        for (size_t i = 0; i < snap.size(); ++i) model_.params()[i]->value = snap[i];
    };

    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<size_t> order(train_data.pages.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        double loss_sum = 0.0;
        int64_t edges_seen = 0, edges_skipped = 0;

        size_t cursor = 0;
        while (cursor < order.size()) {
            // Assemble a page-aligned batch of at least batch_edges edges.
            // Sampling stays on the serial rng stream for determinism.
            std::vector<std::pair<size_t, PageWork>> batch;
            int batch_edge_count = 0;
            while (cursor < order.size() && batch_edge_count < config_.batch_edges) {
                const size_t page_idx = order[cursor++];
                const Page& page = train_data.pages[page_idx];
                PageWork work;
                work.page = &page;
                for (const HierarchyEdge& e : page.edges) {
                    NegativeSampleSet set = sample_negatives(e, page, config_.negatives, rng);
                    if (set.negative_parent_ids.empty()) {
                        ++edges_skipped;
                        continue;
                    }
                    work.sets.push_back(std::move(set));
                }
                if (!work.sets.empty()) {
                    batch_edge_count += static_cast<int>(work.sets.size());
                    batch.emplace_back(page_idx, std::move(work));
                }
            }
            if (batch.empty()) continue;

            std::vector<PageResult> results(batch.size());
            auto run_page = [&](size_t bi) {
                const PageWork& work = batch[bi].second;
                const size_t page_idx = batch[bi].first;
                const Page& page = *work.page;
                PageResult res;
                Tape tape(true);
                std::vector<Tape::Id> feats = model_.page_features(tape, page, crops[page_idx]);
                std::vector<Tape::Id> losses;
                for (const NegativeSampleSet& set : work.sets) {
                    const Tape::Id child = feats[frag_index[page_idx].at(set.child_id)];
                    const Tape::Id pos_parent = feats[frag_index[page_idx].at(set.positive_parent_id)];
                    Tape::Id pos = model_.scorer().score_pair(tape, pos_parent, child);
                    std::vector<Tape::Id> negs;
                    negs.reserve(set.negative_parent_ids.size());
                    for (int nid : set.negative_parent_ids)
                        negs.push_back(model_.scorer().score_pair(
                            tape, feats[frag_index[page_idx].at(nid)], child));
                    losses.push_back(edge_loss(tape, pos, negs));
                }
                Tape::Id total = losses[0];
                for (size_t li = 1; li < losses.size(); ++li) total = tape.add(total, losses[li]);
                res.loss_sum = tape.val(total)[0];
                res.edges = static_cast<int64_t>(losses.size());
                if (!std::isfinite(res.loss_sum)) {
                    res.non_finite = true;
                    results[bi] = std::move(res);
                    return;
                }
                tape.backward(total);
                res.grads.resize(trainable.size());
                for (size_t pi = 0; pi < trainable.size(); ++pi) {
                    const Tensor* g = tape.grad_for(*trainable[pi]);
                    if (g) res.grads[pi] = *g;
                }
                results[bi] = std::move(res);
            };

            if (threads <= 1 || batch.size() <= 1) {
                for (size_t bi = 0; bi < batch.size(); ++bi) run_page(bi);
            } else {
                std::atomic<size_t> next{0};
                auto worker = [&]() {
                    for (;;) {
                        const size_t bi = next.fetch_add(1);
                        if (bi >= batch.size()) return;
                        run_page(bi);
                    }
                };
                std::vector<std::future<void>> futs;
                const int nw = std::min<int>(threads, static_cast<int>(batch.size()));
                for (int t = 0; t < nw; ++t) futs.push_back(std::async(std::launch::async, worker));
                for (auto& f : futs) f.get();
            }

            // Deterministic reduction in batch (page) order.
            std::vector<Tensor> total_grads(trainable.size());
            for (size_t bi = 0; bi < results.size(); ++bi) {
                PageResult& res = results[bi];
                if (res.non_finite)
                    throw TrainingError("training diverged (non-finite loss) on page '" +
                                        batch[bi].second.page->page_id + "', epoch " +
                                        std::to_string(epoch + 1));
                loss_sum += res.loss_sum;
                edges_seen += res.edges;
                for (size_t pi = 0; pi < trainable.size(); ++pi) {
                    if (res.grads[pi].data.empty()) continue;
                    if (total_grads[pi].data.empty())
                        total_grads[pi] = std::move(res.grads[pi]);
                    else
                        for (int64_t n = 0; n < total_grads[pi].numel(); ++n)
                            total_grads[pi][n] += res.grads[pi][n];
                }
            }
            opt.step(trainable, total_grads);
        }

        EpochLog log;
        log.epoch = model_.epochs_completed + 1;
        log.mean_edge_loss = edges_seen > 0 ? loss_sum / static_cast<double>(edges_seen) : 0.0;
        log.edges_seen = edges_seen;
        log.edges_skipped = edges_skipped;

        if (valid_data && config_.eval_every > 0 &&
            ((epoch + 1) % config_.eval_every == 0 || epoch + 1 == config_.epochs)) {
            EvalOptions eo;
            eo.hit_ks = {1};
            eo.threads = config_.threads;
            MetricsReport rep = evaluate(model_, *valid_data, eo);
            log.val_hit1 = rep.hit.at(1);
            if (log.val_hit1 > best_val) {
                best_val = log.val_hit1;
                best_params = snapshot();
            }
        }

        model_.epochs_completed += 1;
        log.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (sink) sink(log);
        logs.push_back(log);
    }

    if (!best_params.empty() && best_val >= 0.0) restore(best_params);
    return logs;
}

}  // namespace formstruct
