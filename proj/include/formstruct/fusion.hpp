#pragma once

#include <optional>
#include <string>
#include <vector>

#include "formstruct/param.hpp"
#include "formstruct/rng.hpp"
#include "formstruct/tape.hpp"

namespace formstruct {

// How the per-modality features combine into the joint feature.
//   concat_shift_gate:    [s;l] + sigmoid(w.[s;l;v]+b) * v
//   concat_shift_no_gate: [s;l] + v
//   concat_all:           [s;l;v]
enum class FusionStrategy { concat_shift_gate, concat_shift_no_gate, concat_all };

FusionStrategy fusion_strategy_from_string(const std::string& s);
std::string to_string(FusionStrategy s);

// Attention-style influence gate over the concatenated modalities; yields a
// scalar weight strictly inside (0,1).
class FusionGate {
public:
    FusionGate(int concat_dim, Rng& rng);

    Tape::Id weight(Tape& tape, Tape::Id concatenated);  // scalar node

    Param& w() { return w_; }
    Param& b() { return b_; }
    void collect_params(std::vector<Param*>& out);

private:
    Param w_;  // {1, d^S+d^L+d^V}
    Param b_;  // {1}
};

// Joint-feature assembly. `v` must equal d^S+d^L in length under the two
// shift strategies. When only a subset of modalities is active the joint
// feature is the plain concatenation of the active ones (single modality
// passes through unchanged). dv = 0 marks a build without the visual
// modality; shift strategies then degrade to the [s;l] concatenation.
class FeatureFusion {
public:
    FeatureFusion(FusionStrategy strategy, int ds, int dl, int dv, Rng& rng);

    // Any of s/l/v may be absent (nullopt) when the modality is disabled,
    // subject to the strategy's requirements.
    Tape::Id fuse(Tape& tape, std::optional<Tape::Id> s, std::optional<Tape::Id> l,
                  std::optional<Tape::Id> v, Tape::Id* alpha_out = nullptr);

    FusionStrategy strategy() const { return strategy_; }
    // Overrides the gate output (inspection/ablation hook): 0 reduces the
    // gated strategy to the [s;l] baseline, 1 to the no-gate variant.
    std::optional<double> forced_alpha;
    int joint_dim(bool has_s, bool has_l, bool has_v) const;
    FusionGate* gate() { return gate_ ? &*gate_ : nullptr; }
    void collect_params(std::vector<Param*>& out);

private:
    FusionStrategy strategy_;
    int ds_, dl_, dv_;
    std::optional<FusionGate> gate_;
};

}  // namespace formstruct
