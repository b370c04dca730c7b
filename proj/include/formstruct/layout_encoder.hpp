#pragma once

#include <array>
#include <vector>

#include "formstruct/param.hpp"
#include "formstruct/rng.hpp"
#include "formstruct/tape.hpp"

namespace formstruct {

// Projects the normalized closure 8-vector into the layout feature space:
// relu(W c + b), a single trainable linear layer.
class LayoutEncoder {
public:
    LayoutEncoder(int dim, Rng& rng);

    Tape::Id encode(Tape& tape, const std::array<double, 8>& coords);

    int dim() const { return dim_; }
    void collect_params(std::vector<Param*>& out);

    Param& weight() { return w_; }
    Param& bias() { return b_; }

private:
    int dim_;
    Param w_;  // {d^L, 8}
    Param b_;  // {d^L}
};

}  // namespace formstruct
