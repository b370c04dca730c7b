#include "formstruct/fusion.hpp"

#include "formstruct/errors.hpp"

namespace formstruct {

FusionStrategy fusion_strategy_from_string(const std::string& s) {
    if (s == "concat_shift_gate") return FusionStrategy::concat_shift_gate;
    if (s == "concat_shift_no_gate") return FusionStrategy::concat_shift_no_gate;
    if (s == "concat_all") return FusionStrategy::concat_all;
    throw ConfigError("unknown fusion strategy '" + s + "'");
}

std::string to_string(FusionStrategy s) {
    switch (s) {
        case FusionStrategy::concat_shift_gate: return "concat_shift_gate";
        case FusionStrategy::concat_shift_no_gate: return "concat_shift_no_gate";
        case FusionStrategy::concat_all: return "concat_all";
    }
    return "?";
}

FusionGate::FusionGate(int concat_dim, Rng& rng)
    : w_("fusion.gate.w", Tensor({1, concat_dim})), b_("fusion.gate.b", Tensor({1})) {
    (void)rng;  // zero-initialized gate starts at alpha = 0.5
}

Tape::Id FusionGate::weight(Tape& tape, Tape::Id concatenated) {
    Tape::Id lin = tape.add(tape.matvec(tape.param(w_), concatenated), tape.param(b_));
    // |response| capped at 36: sigmoid stays strictly inside (0,1) in double
    // precision even for saturating inputs.
    return tape.sigmoid(tape.clamp_(lin, -36.0, 36.0));
}

void FusionGate::collect_params(std::vector<Param*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
}

FeatureFusion::FeatureFusion(FusionStrategy strategy, int ds, int dl, int dv, Rng& rng)
    : strategy_(strategy), ds_(ds), dl_(dl), dv_(dv) {
    if (strategy_ != FusionStrategy::concat_all && dv > 0) {
        if (dv != ds + dl)
            throw ConfigError("fusion: shift strategies require d^V = d^S + d^L (" +
                              std::to_string(dv) + " != " + std::to_string(ds + dl) + ")");
        if (strategy_ == FusionStrategy::concat_shift_gate)
            gate_.emplace(ds + dl + dv, rng);
    }
}

int FeatureFusion::joint_dim(bool has_s, bool has_l, bool has_v) const {
    if (strategy_ != FusionStrategy::concat_all && has_v) return ds_ + dl_;
    int d = 0;
    if (has_s) d += ds_;
    if (has_l) d += dl_;
    if (has_v) d += dv_;
    return d;
}

Tape::Id FeatureFusion::fuse(Tape& tape, std::optional<Tape::Id> s, std::optional<Tape::Id> l,
                             std::optional<Tape::Id> v, Tape::Id* alpha_out) {
    std::vector<Tape::Id> active;
    if (s) active.push_back(*s);
    if (l) active.push_back(*l);
    if (v) active.push_back(*v);
    if (active.empty()) throw ValidationError("fuse: no active modality");

    const bool shift = strategy_ != FusionStrategy::concat_all && v.has_value();
    if (!shift) {
        // Pure concatenation covers concat_all and any modality-ablated run.
        if (active.size() == 1) return active[0];
        return tape.concat(active);
    }

    if (!s || !l)
        throw ConfigError("fusion: shift strategies need both semantic and layout features as the base");
    if (tape.val(*v).dim(0) != ds_ + dl_)
        throw ConfigError("fusion: |v| = " + std::to_string(tape.val(*v).dim(0)) +
                          " does not match d^S + d^L = " + std::to_string(ds_ + dl_));
    Tape::Id base_parts[2] = {*s, *l};
    Tape::Id base = tape.concat(base_parts);
    if (strategy_ == FusionStrategy::concat_shift_no_gate) {
        if (alpha_out) *alpha_out = tape.constant(Tensor::scalar(1.0));
        return tape.add(base, *v);
    }
    Tape::Id alpha;
    if (forced_alpha) {
        alpha = tape.constant(Tensor::scalar(*forced_alpha));
    } else {
        Tape::Id all_parts[3] = {*s, *l, *v};
        alpha = gate_->weight(tape, tape.concat(all_parts));
    }
    if (alpha_out) *alpha_out = alpha;
    if (forced_alpha && *forced_alpha == 0.0) return base;
    return tape.add(base, tape.mul_scalar(*v, alpha));
}

void FeatureFusion::collect_params(std::vector<Param*>& out) {
    if (gate_) gate_->collect_params(out);
}

}  // namespace formstruct
