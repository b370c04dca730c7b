#include <doctest.h>

#include "formstruct/errors.hpp"

#include <map>

#include "formstruct/hierarchy.hpp"
#include "formstruct/synthetic.hpp"

using namespace formstruct;

namespace {

Page simple_page(int n) {
    Page p;
    p.page_id = "h";
    p.width = p.height = 100;
    for (int i = 0; i < n; ++i) {
        Fragment f;
        f.id = i;
        f.text = "f" + std::to_string(i);
        const double y = 12.0 * i;
        f.vertices = {Point{0, y}, Point{10, y}, Point{10, y + 6}, Point{0, y + 6}};
        p.fragments.push_back(f);
    }
    return p;
}

ModelConfig sl_config() {
    ModelConfig cfg;
    cfg.use_visual = false;
    cfg.fusion = FusionStrategy::concat_all;
    cfg.semantic.dim = 8;
    cfg.semantic.hash_buckets = 32;
    cfg.semantic.embed_dim = 4;
    cfg.semantic.hidden = 4;
    cfg.layout_dim = 4;
    return cfg;
}

}  // namespace

TEST_CASE("assemble: a constructed 3-cycle loses exactly its weakest edge") {
    Page p = simple_page(3);
    std::vector<PredictedEdge> argmax = {
        {1, 0, 0.9},  // 0's parent is 1
        {2, 1, 0.8},  // 1's parent is 2
        {0, 2, 0.3},  // 2's parent is 0  -> cycle, weakest edge
    };
    PageHierarchy h = assemble_hierarchy(p, argmax, std::nullopt);
    CHECK(h.edges.size() == 2);
    for (const PredictedEdge& e : h.edges) CHECK(!(e.parent_id == 0 && e.child_id == 2));
    REQUIRE(h.roots.size() == 1);
    CHECK(h.roots[0] == 2);  // broken fragment becomes the root
}

TEST_CASE("assemble: two-fragment mutual attachment keeps the higher-scoring direction") {
    Page p = simple_page(2);
    std::vector<PredictedEdge> argmax = {
        {1, 0, 0.2},  // 0 attaches under 1
        {0, 1, 0.7},  // 1 attaches under 0 (stronger)
    };
    PageHierarchy h = assemble_hierarchy(p, argmax, std::nullopt);
    REQUIRE(h.edges.size() == 1);
    CHECK(h.edges[0].parent_id == 0);
    CHECK(h.edges[0].child_id == 1);
}

TEST_CASE("assemble: threshold drops weak attachments before cycle handling") {
    Page p = simple_page(3);
    std::vector<PredictedEdge> argmax = {{1, 0, 0.9}, {2, 1, 0.05}, {1, 2, 0.8}};
    PageHierarchy h = assemble_hierarchy(p, argmax, 0.1);
    CHECK(h.edges.size() == 2);  // the 0.05 edge is gone before anything else
    for (const PredictedEdge& e : h.edges) CHECK(e.score >= 0.1);
}

TEST_CASE("predict: model-driven hierarchy is acyclic and never self-parents") {
    SynthConfig sc;
    sc.pages = 3;
    Dataset ds = generate_synthetic(sc, 41);
    DocModel model(sl_config(), 42);
    for (const Page& page : ds.pages) {
        PageHierarchy h = predict_hierarchy(model, page);
        // Every fragment appears exactly once as child or root.
        CHECK(h.edges.size() + h.roots.size() == page.fragments.size());
        for (const PredictedEdge& e : h.edges) CHECK(e.parent_id != e.child_id);
        // Acyclicity: walking parents from any node terminates.
        std::map<int, int> parent;
        for (const PredictedEdge& e : h.edges) parent[e.child_id] = e.parent_id;
        for (const Fragment& f : page.fragments) {
            int cur = f.id;
            size_t steps = 0;
            while (parent.count(cur) && steps <= page.fragments.size()) {
                cur = parent[cur];
                ++steps;
            }
            CHECK(steps <= page.fragments.size());
        }
        std::string text = h.to_text(page);
        CHECK(text.find(page.page_id) != std::string::npos);
    }
}

TEST_CASE("predict: two-fragment page keeps exactly one direction") {
    Page p = simple_page(2);
    DocModel model(sl_config(), 43);
    PageHierarchy h = predict_hierarchy(model, p);
    CHECK(h.edges.size() == 1);
    CHECK(h.roots.size() == 1);
}

TEST_CASE("predict: single-fragment page warns and yields an empty hierarchy") {
    Page p = simple_page(1);
    DocModel model(sl_config(), 44);
    PageHierarchy h = predict_hierarchy(model, p);
    CHECK(h.edges.empty());
    REQUIRE(h.roots.size() == 1);
    CHECK(!h.warnings.empty());
}
