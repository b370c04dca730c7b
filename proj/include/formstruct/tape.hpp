#pragma once

#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "formstruct/param.hpp"
#include "formstruct/tensor.hpp"

namespace formstruct {

// Reverse-mode autodiff tape. A tape is built per forward pass and discarded
// after backward(); nodes are appended in topological order so the backward
// sweep is a single reverse walk. Parameter gradients are accumulated inside
// the tape (grad_for), never on the Param itself, so independent tapes can
// run on separate threads against shared frozen parameters.
class Tape {
public:
    using Id = int32_t;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Id constant(Tensor v);
    Id param(Param& p);

    const Tensor& val(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& grad(Id id) const { return nodes_[static_cast<size_t>(id)].grad; }

    // --- vector / matrix ops ---
    Id matvec(Id w, Id x);              // {m,n} x {n} -> {m}
    Id add(Id a, Id b);                 // elementwise, same shape
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);                 // hadamard
    Id mul_scalar(Id v, Id s);          // {n} * {1} -> {n}
    Id relu(Id a);
    Id clamp_(Id a, double lo, double hi);  // pass-through gradient inside the range
    Id sigmoid(Id a);
    Id tanh_(Id a);
    Id concat(std::span<const Id> parts);  // rank-1 inputs
    Id slice(Id a, int offset, int len);   // rank-1
    Id row(Id table, int r);               // {n,d} -> {d}
    Id dot(Id a, Id b);                    // {n},{n} -> {1}
    Id sum(Id a);                          // any -> {1}
    Id maxvec(std::span<const Id> parts);  // elementwise max of same-shape vectors
    Id logsumexp(std::span<const Id> scalars);  // list of {1} -> {1}

    // --- image ops, feature maps are {c,h,w} ---
    Id conv2d(Id input, Id weight, Id bias);    // 3x3, stride 1, same padding
    Id maxpool(Id input, int pool_h, int pool_w);
    Id colvec(Id input, int col);               // {c,1,w} -> {c}

    void backward(Id root);

    // Gradient accumulated for a parameter by the last backward(); nullptr if
    // the parameter never entered this tape.
    const Tensor* grad_for(const Param& p) const;

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> back;  // empty for leaves
    };

    Id push(Tensor value, std::function<void()> back);
    Tensor& grad_ref(Id id) { return nodes_[static_cast<size_t>(id)].grad; }
    void ensure_grad(Id id);

    std::deque<Node> nodes_;  // deque: val()/grad() references stay valid as nodes append
    std::unordered_map<const Param*, Id> param_nodes_;
    std::vector<const Param*> param_order_;
    bool grad_enabled_;
};

}  // namespace formstruct
