#include "formstruct/layout_encoder.hpp"

#include "formstruct/errors.hpp"
#include "formstruct/recurrent.hpp"

namespace formstruct {

LayoutEncoder::LayoutEncoder(int dim, Rng& rng) : dim_(dim) {
    if (dim <= 0) throw ConfigError("layout encoder: d^L must be positive");
    w_ = Param("layout.w", init_linear({dim, 8}, 8, rng));
    b_ = Param("layout.b", Tensor({dim}));
}

Tape::Id LayoutEncoder::encode(Tape& tape, const std::array<double, 8>& coords) {
    Tape::Id c = tape.constant(Tensor({8}, std::vector<double>(coords.begin(), coords.end())));
    return tape.relu(tape.add(tape.matvec(tape.param(w_), c), tape.param(b_)));
}

void LayoutEncoder::collect_params(std::vector<Param*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
}

}  // namespace formstruct
