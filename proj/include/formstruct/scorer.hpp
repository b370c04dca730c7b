#pragma once

#include <limits>
#include <string>
#include <vector>

#include "formstruct/param.hpp"
#include "formstruct/rng.hpp"
#include "formstruct/tape.hpp"

namespace formstruct {

// Per-page table of directed-edge scores; entry (i,j) is the raw score of
// fragment i being the superior of fragment j. The diagonal is excluded.
struct ScoreTable {
    std::string page_id;
    int n = 0;
    std::vector<double> scores;  // row-major n*n, diagonal holds the sentinel

    static constexpr double kExcluded = std::numeric_limits<double>::quiet_NaN();

    double at(int parent, int child) const { return scores[static_cast<size_t>(parent) * n + child]; }
    double& at(int parent, int child) { return scores[static_cast<size_t>(parent) * n + child]; }
};

// Asymmetric bilinear relation head: score(i -> j) = x_j^T M x_i, with the
// child vector on the left and the parent on the right.
class RelationScorer {
public:
    RelationScorer(int joint_dim, Rng& rng);

    // Tape form for training.
    Tape::Id score_pair(Tape& tape, Tape::Id parent, Tape::Id child);
    // Value form for inference paths.
    double score_pair_values(const Tensor& parent, const Tensor& child) const;

    ScoreTable score_page(const std::vector<Tensor>& features, const std::string& page_id) const;

    int dim() const { return dim_; }
    Param& matrix() { return m_; }
    const Param& matrix() const { return m_; }
    void collect_params(std::vector<Param*>& out);

private:
    int dim_;
    Param m_;  // {d^J, d^J}
};

}  // namespace formstruct
