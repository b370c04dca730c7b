#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "formstruct/param.hpp"
#include "formstruct/rng.hpp"
#include "formstruct/tape.hpp"

namespace formstruct::testutil {

// Central-difference gradient check. `build` must construct the scalar loss
// on the given tape from the params' current values.
template <typename BuildFn>
double gradcheck_max_rel_err(const std::vector<Param*>& params, BuildFn build, double h = 1e-5) {
    Tape tape(true);
    Tape::Id loss = build(tape);
    tape.backward(loss);
    std::map<const Param*, Tensor> analytic;
    for (Param* p : params) {
        const Tensor* g = tape.grad_for(*p);
        analytic[p] = g ? *g : Tensor(p->value.shape);
    }
    double max_rel = 0.0;
    for (Param* p : params) {
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            Tape t1(false);
            const double up = t1.val(build(t1))[0];
            p->value[i] = orig - h;
            Tape t2(false);
            const double dn = t2.val(build(t2))[0];
            p->value[i] = orig;
            const double fd = (up - dn) / (2.0 * h);
            const double an = analytic[p][i];
            const double rel = std::abs(an - fd) / std::max({1e-6, std::abs(an), std::abs(fd)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

}  // namespace formstruct::testutil
