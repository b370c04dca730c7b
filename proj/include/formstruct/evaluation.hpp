#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "formstruct/document.hpp"
#include "formstruct/model.hpp"
#include "formstruct/scorer.hpp"

namespace formstruct {

// All candidate parents of one query child, sorted by score descending with
// ties broken by ascending fragment id.
struct RankedCandidates {
    std::string page_id;
    int child_id = -1;
    std::vector<std::pair<int, double>> candidates;  // (parent_id, score)
    std::vector<int> gold_parent_ids;
};

struct PageMetrics {
    std::string page_id;
    int n_queries = 0;
    double map = 0.0;
    double mrank = 0.0;
    std::map<int, double> hit;  // k -> percentage
};

struct MetricsReport {
    double map = 0.0;
    double mrank = 0.0;
    std::map<int, double> hit;  // k -> percentage over queries
    int n_queries = 0;
    int n_rootless = 0;  // fragments with no gold parent, excluded from queries
    std::vector<PageMetrics> per_page;
    std::string config_fingerprint;
    std::string hit_rule = "any_gold";  // a query hits if ANY gold parent is in top-k
    std::vector<RankedCandidates> predictions;                      // when collected
    std::vector<std::tuple<std::string, int, double>> gate_alphas;  // page, fragment, alpha

    std::string to_json() const;
    // Plain table: mAP / mRank under Reconstruction, Hit@k under Detection.
    std::string to_table(const std::string& row_label) const;
};

// Candidate ranking for one child from a precomputed score table.
RankedCandidates rank_candidates(const ScoreTable& table, const Page& page, int child_id);
// Convenience form matching the operation contract (scores the page itself).
RankedCandidates rank_candidates(DocModel& model, const Page& page, int child_id);

// Interpolated average precision over recall levels i/m, i = 1..m.
double average_precision(const RankedCandidates& ranked);
// Count of wrong answers ranked above right answers: sum_k (pos_k - k).
int64_t rank_inversions(const RankedCandidates& ranked);
// 1 iff any gold parent appears in the top k.
int hit_at_k(const RankedCandidates& ranked, int k);

struct EvalOptions {
    bool reconstruction = true;
    bool detection = true;
    std::vector<int> hit_ks = {1, 2, 5};
    bool collect_predictions = false;
    bool collect_gate_alphas = false;
    int threads = 0;  // 0 = auto
};

// Runs both tasks over every query (fragments with at least one gold
// parent). Throws when the dataset yields zero queries.
MetricsReport evaluate(DocModel& model, const Dataset& ds, const EvalOptions& opts = {});

// Line-delimited records {page_id, child_id, ranked, gold_parent_ids}.
void write_prediction_dump(const MetricsReport& report, const std::string& path);

}  // namespace formstruct
