#include "formstruct/recurrent.hpp"

#include <cmath>

namespace formstruct {

Tensor init_linear(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (auto& v : t.data) v = rng.uniform(-a, a);
    return t;
}

LstmCell::LstmCell(const std::string& name, int input, int hidden_size, Rng& rng)
    : w_ih(name + ".w_ih", init_linear({4 * hidden_size, input}, input, rng)),
      w_hh(name + ".w_hh", init_linear({4 * hidden_size, hidden_size}, hidden_size, rng)),
      bias(name + ".b", Tensor({4 * hidden_size})),
      hidden(hidden_size) {
    // Forget-gate bias starts at 1 so early training keeps cell memory.
    for (int i = hidden_size; i < 2 * hidden_size; ++i) bias.value[i] = 1.0;
}

LstmCell::State LstmCell::initial(Tape& tape) {
    return State{tape.constant(Tensor({hidden})), tape.constant(Tensor({hidden}))};
}

LstmCell::State LstmCell::step(Tape& tape, Tape::Id x, const State& prev) {
    Tape::Id gates = tape.add(
        tape.add(tape.matvec(tape.param(w_ih), x),
                 tape.matvec(tape.param(w_hh), prev.h)),
        tape.param(bias));
    Tape::Id i = tape.sigmoid(tape.slice(gates, 0, hidden));
    Tape::Id f = tape.sigmoid(tape.slice(gates, hidden, hidden));
    Tape::Id g = tape.tanh_(tape.slice(gates, 2 * hidden, hidden));
    Tape::Id o = tape.sigmoid(tape.slice(gates, 3 * hidden, hidden));
    Tape::Id c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
    Tape::Id h = tape.mul(o, tape.tanh_(c));
    return State{h, c};
}

void LstmCell::collect(std::vector<Param*>& out) {
    out.push_back(&w_ih);
    out.push_back(&w_hh);
    out.push_back(&bias);
}

BiLstmLayer::BiLstmLayer(const std::string& name, int input, int hidden_size, Rng& rng)
    : fwd(name + ".fwd", input, hidden_size, rng), bwd(name + ".bwd", input, hidden_size, rng) {}

std::vector<Tape::Id> BiLstmLayer::run(Tape& tape, const std::vector<Tape::Id>& seq) {
    const size_t n = seq.size();
    std::vector<Tape::Id> hf(n), hb(n);
    LstmCell::State sf = fwd.initial(tape);
    for (size_t t = 0; t < n; ++t) {
        sf = fwd.step(tape, seq[t], sf);
        hf[t] = sf.h;
    }
    LstmCell::State sb = bwd.initial(tape);
    for (size_t t = n; t-- > 0;) {
        sb = bwd.step(tape, seq[t], sb);
        hb[t] = sb.h;
    }
    std::vector<Tape::Id> out(n);
    for (size_t t = 0; t < n; ++t) {
        Tape::Id parts[2] = {hf[t], hb[t]};
        out[t] = tape.concat(parts);
    }
    return out;
}

Tape::Id BiLstmLayer::final_states(Tape& tape, const std::vector<Tape::Id>& seq) {
    LstmCell::State sf = fwd.initial(tape);
    for (Tape::Id x : seq) sf = fwd.step(tape, x, sf);
    LstmCell::State sb = bwd.initial(tape);
    for (size_t t = seq.size(); t-- > 0;) sb = bwd.step(tape, seq[t], sb);
    Tape::Id parts[2] = {sf.h, sb.h};
    return tape.concat(parts);
}

void BiLstmLayer::collect(std::vector<Param*>& out) {
    fwd.collect(out);
    bwd.collect(out);
}

}  // namespace formstruct
