#include "formstruct/scorer.hpp"

#include "formstruct/errors.hpp"

namespace formstruct {

RelationScorer::RelationScorer(int joint_dim, Rng& rng) : dim_(joint_dim) {
    if (joint_dim <= 0) throw ConfigError("relation scorer: joint dimension must be positive");
    // Identity plus small noise: starts near inner-product similarity.
    Tensor m({joint_dim, joint_dim});
    for (int i = 0; i < joint_dim; ++i)
        for (int j = 0; j < joint_dim; ++j)
            m.at(i, j) = (i == j ? 1.0 : 0.0) + rng.normal(0.0, 0.01);
    m_ = Param("scorer.M", std::move(m));
}

Tape::Id RelationScorer::score_pair(Tape& tape, Tape::Id parent, Tape::Id child) {
    if (tape.val(parent).dim(0) != dim_ || tape.val(child).dim(0) != dim_)
        throw ValidationError("score_pair: feature length != d^J = " + std::to_string(dim_));
    return tape.dot(child, tape.matvec(tape.param(m_), parent));
}

double RelationScorer::score_pair_values(const Tensor& parent, const Tensor& child) const {
    if (parent.rank() != 1 || child.rank() != 1 || parent.dim(0) != dim_ || child.dim(0) != dim_)
        throw ValidationError("score_pair: feature length != d^J = " + std::to_string(dim_));
    const Tensor& m = m_.value;
    double acc = 0.0;
    for (int p = 0; p < dim_; ++p) {
        const double* row = m.data.data() + static_cast<size_t>(p) * dim_;
        double inner = 0.0;
        for (int q = 0; q < dim_; ++q) inner += row[q] * parent[q];
        acc += child[p] * inner;
    }
    return acc;
}

ScoreTable RelationScorer::score_page(const std::vector<Tensor>& features,
                                      const std::string& page_id) const {
    const int n = static_cast<int>(features.size());
    if (n < 2) throw ValidationError("page '" + page_id + "' has no candidate pairs");
    ScoreTable table;
    table.page_id = page_id;
    table.n = n;
    table.scores.assign(static_cast<size_t>(n) * n, ScoreTable::kExcluded);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) table.at(i, j) = score_pair_values(features[static_cast<size_t>(i)],
                                                           features[static_cast<size_t>(j)]);
    return table;
}

void RelationScorer::collect_params(std::vector<Param*>& out) { out.push_back(&m_); }

}  // namespace formstruct
