#pragma once

#include <string>
#include <vector>

#include "formstruct/param.hpp"
#include "formstruct/rng.hpp"
#include "formstruct/tape.hpp"

namespace formstruct {

// Single-direction LSTM cell. Gate block layout is [i, f, g, o].
struct LstmCell {
    Param w_ih;  // {4H, In}
    Param w_hh;  // {4H, H}
    Param bias;  // {4H}
    int hidden = 0;

    LstmCell() = default;
    LstmCell(const std::string& name, int input, int hidden_size, Rng& rng);

    struct State {
        Tape::Id h;
        Tape::Id c;
    };

    State initial(Tape& tape);
    State step(Tape& tape, Tape::Id x, const State& prev);
    void collect(std::vector<Param*>& out);
};

// Bidirectional layer: per-step outputs are [h_fwd_t ; h_bwd_t].
struct BiLstmLayer {
    LstmCell fwd;
    LstmCell bwd;

    BiLstmLayer() = default;
    BiLstmLayer(const std::string& name, int input, int hidden_size, Rng& rng);

    // Per-step concatenated hidden states, aligned with the input order.
    std::vector<Tape::Id> run(Tape& tape, const std::vector<Tape::Id>& seq);
    // Concatenation of the two directions' final states (empty-sequence safe:
    // returns the initial states).
    Tape::Id final_states(Tape& tape, const std::vector<Tape::Id>& seq);
    void collect(std::vector<Param*>& out);
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
Tensor init_linear(std::vector<int> shape, int fan_in, Rng& rng);

}  // namespace formstruct
