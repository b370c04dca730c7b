#include "formstruct/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <thread>

#include <json.hpp>

#include "formstruct/errors.hpp"

using nlohmann::json;

namespace formstruct {

RankedCandidates rank_candidates(const ScoreTable& table, const Page& page, int child_id) {
    RankedCandidates rc;
    rc.page_id = page.page_id;
    rc.child_id = child_id;
    int child_idx = -1;
    for (size_t i = 0; i < page.fragments.size(); ++i)
        if (page.fragments[i].id == child_id) child_idx = static_cast<int>(i);
    if (child_idx < 0) throw ValidationError("rank_candidates: unknown child id");
    for (size_t i = 0; i < page.fragments.size(); ++i) {
        if (static_cast<int>(i) == child_idx) continue;
        rc.candidates.emplace_back(page.fragments[i].id, table.at(static_cast<int>(i), child_idx));
    }
    std::sort(rc.candidates.begin(), rc.candidates.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    rc.gold_parent_ids = page.parents_of(child_id);
    return rc;
}

RankedCandidates rank_candidates(DocModel& model, const Page& page, int child_id) {
    PreparedCrops crops = model.prepare_crops(page);
    std::vector<Tensor> feats = model.page_feature_values(page, crops);
    ScoreTable table = model.scorer().score_page(feats, page.page_id);
    return rank_candidates(table, page, child_id);
}

namespace {

// 1-based positions of the gold parents within the ranked candidates.
std::vector<int> gold_positions(const RankedCandidates& ranked) {
    std::vector<int> pos;
    for (size_t i = 0; i < ranked.candidates.size(); ++i) {
        const int id = ranked.candidates[i].first;
        for (int g : ranked.gold_parent_ids)
            if (g == id) {
                pos.push_back(static_cast<int>(i) + 1);
                break;
            }
    }
    return pos;  // ascending by construction
}

}  // namespace

double average_precision(const RankedCandidates& ranked) {
    std::vector<int> pos = gold_positions(ranked);
    const int m = static_cast<int>(pos.size());
    if (m == 0) throw ValidationError("average_precision: query has no gold parent among candidates");
    // p_i = max precision at recall >= i/m; precision at the j-th gold is j/pos_j.
    double ap = 0.0;
    for (int k = 1; k <= m; ++k) {
        double best = 0.0;
        for (int j = k; j <= m; ++j)
            best = std::max(best, static_cast<double>(j) / pos[static_cast<size_t>(j - 1)]);
        ap += best;
    }
    return ap / m;
}

int64_t rank_inversions(const RankedCandidates& ranked) {
    std::vector<int> pos = gold_positions(ranked);
    if (pos.empty()) throw ValidationError("rank_inversions: query has no gold parent among candidates");
    int64_t inv = 0;
    for (size_t k = 0; k < pos.size(); ++k) inv += pos[k] - static_cast<int>(k) - 1;
    return inv;
}

int hit_at_k(const RankedCandidates& ranked, int k) {
    const int limit = std::min<int>(k, static_cast<int>(ranked.candidates.size()));
    for (int i = 0; i < limit; ++i) {
        const int id = ranked.candidates[static_cast<size_t>(i)].first;
        for (int g : ranked.gold_parent_ids)
            if (g == id) return 1;
    }
    return 0;
}

namespace {

struct PageEval {
    PageMetrics metrics;
    int n_rootless = 0;
    std::vector<RankedCandidates> queries;
    std::vector<std::tuple<std::string, int, double>> alphas;
};

PageEval evaluate_page(DocModel& model, const Page& page, const EvalOptions& opts) {
    PageEval out;
    out.metrics.page_id = page.page_id;
    for (int k : opts.hit_ks) out.metrics.hit[k] = 0.0;

    std::vector<int> query_children;
    for (const Fragment& f : page.fragments) {
        if (page.parents_of(f.id).empty())
            ++out.n_rootless;
        else
            query_children.push_back(f.id);
    }
    if (query_children.empty() || page.fragments.size() < 2) {
        out.n_rootless = static_cast<int>(page.fragments.size());
        return out;
    }

    PreparedCrops crops = model.prepare_crops(page);
    std::vector<double> alphas;
    std::vector<Tensor> feats = model.page_feature_values(
        page, crops, opts.collect_gate_alphas ? &alphas : nullptr);
    ScoreTable table = model.scorer().score_page(feats, page.page_id);
    if (opts.collect_gate_alphas && !alphas.empty())
        for (size_t i = 0; i < page.fragments.size(); ++i)
            out.alphas.emplace_back(page.page_id, page.fragments[i].id, alphas[i]);

    for (int child : query_children) {
        RankedCandidates rc = rank_candidates(table, page, child);
        out.metrics.n_queries += 1;
        out.metrics.map += average_precision(rc);
        out.metrics.mrank += static_cast<double>(rank_inversions(rc));
        for (int k : opts.hit_ks) out.metrics.hit[k] += hit_at_k(rc, k);
        if (opts.collect_predictions) out.queries.push_back(std::move(rc));
    }
    return out;
}

int auto_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::max(1u, std::min(hw, 8u)));
}

}  // namespace

MetricsReport evaluate(DocModel& model, const Dataset& ds, const EvalOptions& opts) {
    MetricsReport report;
    report.config_fingerprint = model.config().fingerprint();
    for (int k : opts.hit_ks) report.hit[k] = 0.0;

    const int n_pages = static_cast<int>(ds.pages.size());
    std::vector<PageEval> results(static_cast<size_t>(n_pages));
    const int threads = auto_threads(opts.threads);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= n_pages) return;
            results[static_cast<size_t>(idx)] = evaluate_page(model, ds.pages[static_cast<size_t>(idx)], opts);
        }
    };
    if (threads <= 1 || n_pages <= 1) {
        worker();
    } else {
        std::vector<std::future<void>> futs;
        for (int t = 0; t < threads; ++t) futs.push_back(std::async(std::launch::async, worker));
        for (auto& f : futs) f.get();
    }

    // Deterministic merge in page order.
    double sum_ap = 0.0, sum_inv = 0.0;
    std::map<int, double> sum_hit;
    for (int k : opts.hit_ks) sum_hit[k] = 0.0;
    for (PageEval& pe : results) {
        report.n_rootless += pe.n_rootless;
        if (pe.metrics.n_queries == 0) continue;
        report.n_queries += pe.metrics.n_queries;
        sum_ap += pe.metrics.map;
        sum_inv += pe.metrics.mrank;
        for (int k : opts.hit_ks) sum_hit[k] += pe.metrics.hit[k];
        PageMetrics pm = pe.metrics;
        const double nq = pm.n_queries;
        pm.map /= nq;
        pm.mrank /= nq;
        for (int k : opts.hit_ks) pm.hit[k] = 100.0 * pm.hit[k] / nq;
        report.per_page.push_back(std::move(pm));
        for (auto& q : pe.queries) report.predictions.push_back(std::move(q));
        for (auto& a : pe.alphas) report.gate_alphas.push_back(std::move(a));
    }
    if (report.n_queries == 0)
        throw ValidationError("evaluate: dataset has no queries (no fragment has a gold parent)");
    report.map = sum_ap / report.n_queries;
    report.mrank = sum_inv / report.n_queries;
    for (int k : opts.hit_ks) report.hit[k] = 100.0 * sum_hit[k] / report.n_queries;
    return report;
}

std::string MetricsReport::to_json() const {
    json j;
    j["reconstruction"] = {{"mAP", map}, {"mRank", mrank}};
    json hits;
    for (const auto& [k, v] : hit) hits["hit@" + std::to_string(k)] = v;
    j["detection"] = hits;
    j["n_queries"] = n_queries;
    j["n_rootless"] = n_rootless;
    j["hit_rule"] = hit_rule;
    j["config_fingerprint"] = config_fingerprint;
    json pages = json::array();
    for (const auto& pm : per_page) {
        json p;
        p["page_id"] = pm.page_id;
        p["n_queries"] = pm.n_queries;
        p["mAP"] = pm.map;
        p["mRank"] = pm.mrank;
        for (const auto& [k, v] : pm.hit) p["hit@" + std::to_string(k)] = v;
        pages.push_back(std::move(p));
    }
    j["per_page"] = std::move(pages);
    if (!gate_alphas.empty()) {
        json ga = json::array();
        for (const auto& [pid, fid, alpha] : gate_alphas)
            ga.push_back(json{{"page_id", pid}, {"fragment_id", fid}, {"alpha", alpha}});
        j["gate_alphas"] = std::move(ga);
    }
    return j.dump(2);
}

std::string MetricsReport::to_table(const std::string& row_label) const {
    char buf[256];
    std::string out;
    out += "                                     Reconstruction        Detection\n";
    out += "Features                             mAP      mRank     Hit@1   Hit@2   Hit@5\n";
    auto hit_of = [&](int k) { return hit.count(k) ? hit.at(k) : 0.0; };
    std::snprintf(buf, sizeof buf, "%-36s %.4f   %-8.2f  %-6.2f  %-6.2f  %-6.2f\n",
                  row_label.c_str(), map, mrank, hit_of(1), hit_of(2), hit_of(5));
    out += buf;
    return out;
}

void write_prediction_dump(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create prediction dump: " + path);
    for (const RankedCandidates& rc : report.predictions) {
        json j;
        j["page_id"] = rc.page_id;
        j["child_id"] = rc.child_id;
        json ranked = json::array();
        for (const auto& [id, score] : rc.candidates) ranked.push_back(json::array({id, score}));
        j["ranked"] = std::move(ranked);
        j["gold_parent_ids"] = rc.gold_parent_ids;
        out << j.dump() << "\n";
    }
}

}  // namespace formstruct
