#pragma once

#include <optional>
#include <string>
#include <vector>

#include "formstruct/document.hpp"
#include "formstruct/model.hpp"

namespace formstruct {

struct PredictedEdge {
    int parent_id = -1;
    int child_id = -1;
    double score = 0.0;
};

// Materialized page hierarchy: every fragment attaches under its argmax
// parent, cycles are broken by dropping the lowest-score edge in the cycle,
// and an optional threshold filters weak attachments.
struct PageHierarchy {
    std::string page_id;
    std::vector<PredictedEdge> edges;
    std::vector<int> roots;  // fragments left without a parent
    std::vector<std::string> warnings;

    std::string to_text(const Page& page) const;  // indented tree rendering
};

PageHierarchy predict_hierarchy(DocModel& model, const Page& page,
                                std::optional<double> score_threshold = std::nullopt);

// Pure assembly step, exposed for tests: candidate argmax edges in, acyclic
// forest out.
PageHierarchy assemble_hierarchy(const Page& page, const std::vector<PredictedEdge>& argmax_edges,
                                 std::optional<double> score_threshold);

}  // namespace formstruct
