#include "formstruct/hierarchy.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>

#include "formstruct/errors.hpp"

namespace formstruct {

PageHierarchy assemble_hierarchy(const Page& page, const std::vector<PredictedEdge>& argmax_edges,
                                 std::optional<double> score_threshold) {
    PageHierarchy out;
    out.page_id = page.page_id;

    std::map<int, PredictedEdge> parent_of;  // child -> edge
    for (const PredictedEdge& e : argmax_edges) {
        if (e.parent_id == e.child_id)
            throw ValidationError("assemble_hierarchy: self-parent prediction");
        if (score_threshold && e.score < *score_threshold) continue;
        parent_of[e.child_id] = e;
    }

    // Each node has at most one parent pointer, so every cycle is a simple
    // loop; walk with coloring and drop the weakest edge of each loop found.
    std::map<int, int> color;  // 0 unvisited, 1 in progress, 2 done
    for (const Fragment& f : page.fragments) color[f.id] = 0;
    for (const Fragment& f : page.fragments) {
        if (color[f.id] != 0) continue;
        std::vector<int> path;
        int cur = f.id;
        while (true) {
            if (color[cur] == 1) {
                // Found a cycle: cur is on the current path.
                auto it = std::find(path.begin(), path.end(), cur);
                int weakest_child = -1;
                double weakest = 0.0;
                for (auto p = it; p != path.end(); ++p) {
                    const PredictedEdge& e = parent_of.at(*p);
                    if (weakest_child < 0 || e.score < weakest ||
                        (e.score == weakest && *p > weakest_child)) {
                        weakest_child = *p;
                        weakest = e.score;
                    }
                }
                parent_of.erase(weakest_child);
                break;
            }
            if (color[cur] == 2) break;
            color[cur] = 1;
            path.push_back(cur);
            auto it = parent_of.find(cur);
            if (it == parent_of.end()) break;
            cur = it->second.parent_id;
        }
        for (int id : path) color[id] = 2;
    }

    for (const Fragment& f : page.fragments) {
        auto it = parent_of.find(f.id);
        if (it == parent_of.end())
            out.roots.push_back(f.id);
        else
            out.edges.push_back(it->second);
    }
    std::sort(out.edges.begin(), out.edges.end(),
              [](const PredictedEdge& a, const PredictedEdge& b) { return a.child_id < b.child_id; });
    return out;
}

PageHierarchy predict_hierarchy(DocModel& model, const Page& page,
                                std::optional<double> score_threshold) {
    PageHierarchy out;
    out.page_id = page.page_id;
    if (page.fragments.size() < 2) {
        out.warnings.push_back("page '" + page.page_id +
                               "' has fewer than 2 fragments; hierarchy is empty");
        for (const Fragment& f : page.fragments) out.roots.push_back(f.id);
        return out;
    }
    PreparedCrops crops = model.prepare_crops(page);
    std::vector<Tensor> feats = model.page_feature_values(page, crops);
    ScoreTable table = model.scorer().score_page(feats, page.page_id);

    std::vector<PredictedEdge> argmax_edges;
    for (size_t j = 0; j < page.fragments.size(); ++j) {
        int best_i = -1;
        double best = 0.0;
        for (size_t i = 0; i < page.fragments.size(); ++i) {
            if (i == j) continue;
            const double s = table.at(static_cast<int>(i), static_cast<int>(j));
            // Ties resolve to the lower fragment id, matching ranking.
            if (best_i < 0 || s > best ||
                (s == best && page.fragments[i].id < page.fragments[static_cast<size_t>(best_i)].id)) {
                best_i = static_cast<int>(i);
                best = s;
            }
        }
        argmax_edges.push_back(PredictedEdge{page.fragments[static_cast<size_t>(best_i)].id,
                                             page.fragments[j].id, best});
    }
    PageHierarchy assembled = assemble_hierarchy(page, argmax_edges, score_threshold);
    assembled.warnings = out.warnings;
    return assembled;
}

std::string PageHierarchy::to_text(const Page& page) const {
    std::map<int, std::vector<const PredictedEdge*>> children;
    for (const PredictedEdge& e : edges) children[e.parent_id].push_back(&e);
    for (auto& [_, v] : children)
        std::sort(v.begin(), v.end(),
                  [](const PredictedEdge* a, const PredictedEdge* b) { return a->child_id < b->child_id; });

    std::string out = "page " + page_id + "\n";
    auto label = [&](int id) {
        const Fragment* f = page.find_fragment(id);
        std::string text = f ? f->text : "";
        if (text.size() > 40) text = text.substr(0, 37) + "...";
        return "[" + std::to_string(id) + "] \"" + text + "\"";
    };
    std::function<void(int, int, double, bool)> emit = [&](int id, int depth, double score,
                                                           bool scored) {
        out += std::string(static_cast<size_t>(depth) * 2, ' ');
        out += label(id);
        if (scored) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "  (score %.4f)", score);
            out += buf;
        }
        out += "\n";
        auto it = children.find(id);
        if (it == children.end()) return;
        for (const PredictedEdge* e : it->second) emit(e->child_id, depth + 1, e->score, true);
    };
    for (int r : roots) emit(r, 0, 0.0, false);
    return out;
}

}  // namespace formstruct
