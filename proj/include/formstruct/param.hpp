#pragma once

#include <string>

#include "formstruct/tensor.hpp"

namespace formstruct {

// One trainable tensor. Gradients are owned by the tape that computed them;
// the optimizer state lives here so it survives across steps.
struct Param {
    std::string name;
    Tensor value;
    bool frozen = false;

    // Adam moments, allocated on first optimizer step.
    Tensor adam_m;
    Tensor adam_v;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {}

    int64_t numel() const { return value.numel(); }
};

}  // namespace formstruct
