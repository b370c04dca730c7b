#include "formstruct/tape.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "formstruct/errors.hpp"

namespace formstruct {

Tape::Id Tape::push(Tensor value, std::function<void()> back) {
    nodes_.push_back(Node{std::move(value), Tensor{}, grad_enabled_ ? std::move(back) : nullptr});
    return static_cast<Id>(nodes_.size() - 1);
}

void Tape::ensure_grad(Id id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
}

Tape::Id Tape::constant(Tensor v) { return push(std::move(v), nullptr); }

Tape::Id Tape::param(Param& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    Id id = push(p.value, nullptr);
    param_nodes_.emplace(&p, id);
    param_order_.push_back(&p);
    return id;
}

const Tensor* Tape::grad_for(const Param& p) const {
    auto it = param_nodes_.find(&p);
    if (it == param_nodes_.end()) return nullptr;
    const Tensor& g = nodes_[static_cast<size_t>(it->second)].grad;
    return g.data.empty() ? nullptr : &g;
}

Tape::Id Tape::matvec(Id w, Id x) {
    const Tensor& W = val(w);
    const Tensor& X = val(x);
    if (W.rank() != 2 || X.rank() != 1 || W.dim(1) != X.dim(0))
        throw ValidationError("matvec shape mismatch " + W.shape_str() + " * " + X.shape_str());
    const int m = W.dim(0), n = W.dim(1);
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        const double* wr = W.data.data() + static_cast<size_t>(i) * n;
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += wr[j] * X[j];
        out[i] = acc;
    }
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, w, x, m, n]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(w);
        ensure_grad(x);
        Tensor& gw = grad_ref(w);
        Tensor& gx = grad_ref(x);
        const Tensor& W = val(w);
        const Tensor& X = val(x);
        for (int i = 0; i < m; ++i) {
            const double gi = go[i];
            if (gi == 0.0) continue;
            double* gwr = gw.data.data() + static_cast<size_t>(i) * n;
            const double* wr = W.data.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                gwr[j] += gi * X[j];
                gx[j] += gi * wr[j];
            }
        }
    });
}

Tape::Id Tape::add(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
        throw ValidationError("add shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor out(A.shape);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] + B[i];
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a, b]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(a);
        ensure_grad(b);
        Tensor& ga = grad_ref(a);
        Tensor& gb = grad_ref(b);
        for (int64_t i = 0; i < go.numel(); ++i) {
            ga[i] += go[i];
            gb[i] += go[i];
        }
    });
}

Tape::Id Tape::sub(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
        throw ValidationError("sub shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor out(A.shape);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] - B[i];
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a, b]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(a);
        ensure_grad(b);
        Tensor& ga = grad_ref(a);
        Tensor& gb = grad_ref(b);
        for (int64_t i = 0; i < go.numel(); ++i) {
            ga[i] += go[i];
            gb[i] -= go[i];
        }
    });
}

Tape::Id Tape::mul(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
        throw ValidationError("mul shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor out(A.shape);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] * B[i];
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a, b]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(a);
        ensure_grad(b);
        Tensor& ga = grad_ref(a);
        Tensor& gb = grad_ref(b);
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        for (int64_t i = 0; i < go.numel(); ++i) {
            ga[i] += go[i] * B[i];
            gb[i] += go[i] * A[i];
        }
    });
}

Tape::Id Tape::mul_scalar(Id v, Id s) {
    const Tensor& V = val(v);
    const Tensor& S = val(s);
    if (S.numel() != 1) throw ValidationError("mul_scalar: scalar operand must have 1 element");
    Tensor out(V.shape);
    const double sv = S[0];
    for (int64_t i = 0; i < V.numel(); ++i) out[i] = V[i] * sv;
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, v, s]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(v);
        ensure_grad(s);
        Tensor& gv = grad_ref(v);
        Tensor& gs = grad_ref(s);
        const Tensor& V = val(v);
        const double sv = val(s)[0];
        double acc = 0.0;
        for (int64_t i = 0; i < go.numel(); ++i) {
            gv[i] += go[i] * sv;
            acc += go[i] * V[i];
        }
        gs[0] += acc;
    });
}

Tape::Id Tape::relu(Id a) {
    const Tensor& A = val(a);
    Tensor out(A.shape);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] > 0.0 ? A[i] : 0.0;
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(a);
        Tensor& ga = grad_ref(a);
        const Tensor& A = val(a);
        for (int64_t i = 0; i < go.numel(); ++i)
            if (A[i] > 0.0) ga[i] += go[i];
    });
}

Tape::Id Tape::clamp_(Id a, double lo, double hi) {
    const Tensor& A = val(a);
    Tensor out(A.shape);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = std::clamp(A[i], lo, hi);
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a, lo, hi]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(a);
        Tensor& ga = grad_ref(a);
        const Tensor& A = val(a);
        for (int64_t i = 0; i < go.numel(); ++i)
            if (A[i] > lo && A[i] < hi) ga[i] += go[i];
    });
}

Tape::Id Tape::sigmoid(Id a) {
    const Tensor& A = val(a);
    Tensor out(A.shape);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-A[i]));
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a]() {
        const Tensor& go = grad_ref(out_id);
        const Tensor& y = val(out_id);
        ensure_grad(a);
        Tensor& ga = grad_ref(a);
        for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
    });
}

Tape::Id Tape::tanh_(Id a) {
    const Tensor& A = val(a);
    Tensor out(A.shape);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = std::tanh(A[i]);
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a]() {
        const Tensor& go = grad_ref(out_id);
        const Tensor& y = val(out_id);
        ensure_grad(a);
        Tensor& ga = grad_ref(a);
        for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
    });
}

Tape::Id Tape::concat(std::span<const Id> parts) {
    int total = 0;
    for (Id p : parts) {
        if (val(p).rank() != 1) throw ValidationError("concat expects rank-1 inputs");
        total += val(p).dim(0);
    }
    Tensor out({total});
    int off = 0;
    for (Id p : parts) {
        const Tensor& t = val(p);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
        off += t.dim(0);
    }
    std::vector<Id> ids(parts.begin(), parts.end());
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, ids]() {
        const Tensor& go = grad_ref(out_id);
        int off = 0;
        for (Id p : ids) {
            ensure_grad(p);
            Tensor& gp = grad_ref(p);
            for (int i = 0; i < gp.dim(0); ++i) gp[i] += go[off + i];
            off += gp.dim(0);
        }
    });
}

Tape::Id Tape::slice(Id a, int offset, int len) {
    const Tensor& A = val(a);
    if (A.rank() != 1 || offset < 0 || offset + len > A.dim(0))
        throw ValidationError("slice out of range");
    Tensor out({len});
    for (int i = 0; i < len; ++i) out[i] = A[offset + i];
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, a, offset, len]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(a);
        Tensor& ga = grad_ref(a);
        for (int i = 0; i < len; ++i) ga[offset + i] += go[i];
    });
}

Tape::Id Tape::row(Id table, int r) {
    const Tensor& T = val(table);
    if (T.rank() != 2 || r < 0 || r >= T.dim(0)) throw ValidationError("row index out of range");
    const int d = T.dim(1);
    Tensor out({d});
    const double* src = T.data.data() + static_cast<size_t>(r) * d;
    std::copy(src, src + d, out.data.begin());
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, table, r, d]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(table);
        Tensor& gt = grad_ref(table);
        double* dst = gt.data.data() + static_cast<size_t>(r) * d;
        for (int i = 0; i < d; ++i) dst[i] += go[i];
    });
}

Tape::Id Tape::dot(Id a, Id b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 1 || B.rank() != 1 || A.dim(0) != B.dim(0))
        throw ValidationError("dot shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    double acc = 0.0;
    for (int64_t i = 0; i < A.numel(); ++i) acc += A[i] * B[i];
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(Tensor::scalar(acc), [this, out_id, a, b]() {
        const double g = grad_ref(out_id)[0];
        ensure_grad(a);
        ensure_grad(b);
        Tensor& ga = grad_ref(a);
        Tensor& gb = grad_ref(b);
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        for (int64_t i = 0; i < A.numel(); ++i) {
            ga[i] += g * B[i];
            gb[i] += g * A[i];
        }
    });
}

Tape::Id Tape::sum(Id a) {
    const Tensor& A = val(a);
    double acc = 0.0;
    for (int64_t i = 0; i < A.numel(); ++i) acc += A[i];
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(Tensor::scalar(acc), [this, out_id, a]() {
        const double g = grad_ref(out_id)[0];
        ensure_grad(a);
        Tensor& ga = grad_ref(a);
        for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

Tape::Id Tape::maxvec(std::span<const Id> parts) {
    if (parts.empty()) throw ValidationError("maxvec of empty list");
    const Tensor& first = val(parts[0]);
    for (Id p : parts)
        if (!val(p).same_shape(first)) throw ValidationError("maxvec shape mismatch");
    const int64_t n = first.numel();
    Tensor out(first.shape);
    std::vector<int32_t> argmax(static_cast<size_t>(n), 0);
    for (int64_t i = 0; i < n; ++i) out[i] = first[i];
    for (size_t k = 1; k < parts.size(); ++k) {
        const Tensor& t = val(parts[k]);
        for (int64_t i = 0; i < n; ++i) {
            if (t[i] > out[i]) {
                out[i] = t[i];
                argmax[static_cast<size_t>(i)] = static_cast<int32_t>(k);
            }
        }
    }
    std::vector<Id> ids(parts.begin(), parts.end());
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, ids, argmax, n]() {
        const Tensor& go = grad_ref(out_id);
        for (Id p : ids) ensure_grad(p);
        for (int64_t i = 0; i < n; ++i)
            grad_ref(ids[argmax[static_cast<size_t>(i)]])[i] += go[i];
    });
}

Tape::Id Tape::logsumexp(std::span<const Id> scalars) {
    if (scalars.empty()) throw ValidationError("logsumexp of empty list");
    double mx = val(scalars[0])[0];
    for (Id s : scalars) {
        if (val(s).numel() != 1) throw ValidationError("logsumexp expects scalar inputs");
        mx = std::max(mx, val(s)[0]);
    }
    double acc = 0.0;
    for (Id s : scalars) acc += std::exp(val(s)[0] - mx);
    const double lse = mx + std::log(acc);
    std::vector<Id> ids(scalars.begin(), scalars.end());
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(Tensor::scalar(lse), [this, out_id, ids]() {
        const double g = grad_ref(out_id)[0];
        const double y = val(out_id)[0];
        for (Id s : ids) {
            ensure_grad(s);
            grad_ref(s)[0] += g * std::exp(val(s)[0] - y);
        }
    });
}

Tape::Id Tape::conv2d(Id input, Id weight, Id bias) {
    const Tensor& X = val(input);
    const Tensor& W = val(weight);
    const Tensor& B = val(bias);
    if (X.rank() != 3 || W.rank() != 4) throw ValidationError("conv2d expects {c,h,w} input and {oc,ic,kh,kw} weight");
    const int ic = X.dim(0), h = X.dim(1), w = X.dim(2);
    const int oc = W.dim(0), kh = W.dim(2), kw = W.dim(3);
    if (W.dim(1) != ic) throw ValidationError("conv2d channel mismatch");
    if (B.rank() != 1 || B.dim(0) != oc) throw ValidationError("conv2d bias mismatch");
    const int ph = kh / 2, pw = kw / 2;  // same padding
    Tensor out({oc, h, w});
    for (int o = 0; o < oc; ++o) {
        double* op = out.data.data() + static_cast<size_t>(o) * h * w;
        const double bo = B[o];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) op[y * w + x] = bo;
        for (int c = 0; c < ic; ++c) {
            const double* xp = X.data.data() + static_cast<size_t>(c) * h * w;
            const double* wp = W.data.data() + ((static_cast<size_t>(o) * ic + c) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wp[ky * kw + kx];
                    if (wv == 0.0) continue;
                    const int y0 = std::max(0, ph - ky), y1 = std::min(h, h + ph - ky);
                    const int x0 = std::max(0, pw - kx), x1 = std::min(w, w + pw - kx);
                    for (int y = y0; y < y1; ++y) {
                        const double* xr = xp + (y + ky - ph) * w + (kx - pw);
                        double* orow = op + y * w;
                        for (int x = x0; x < x1; ++x) orow[x] += wv * xr[x];
                    }
                }
            }
        }
    }
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, input, weight, bias, ic, oc, h, w, kh, kw, ph, pw]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(input);
        ensure_grad(weight);
        ensure_grad(bias);
        Tensor& gx = grad_ref(input);
        Tensor& gw = grad_ref(weight);
        Tensor& gb = grad_ref(bias);
        const Tensor& X = val(input);
        const Tensor& W = val(weight);
        for (int o = 0; o < oc; ++o) {
            const double* gop = go.data.data() + static_cast<size_t>(o) * h * w;
            double acc = 0.0;
            for (int i = 0; i < h * w; ++i) acc += gop[i];
            gb[o] += acc;
            for (int c = 0; c < ic; ++c) {
                const double* xp = X.data.data() + static_cast<size_t>(c) * h * w;
                double* gxp = gx.data.data() + static_cast<size_t>(c) * h * w;
                const double* wp = W.data.data() + ((static_cast<size_t>(o) * ic + c) * kh) * kw;
                double* gwp = gw.data.data() + ((static_cast<size_t>(o) * ic + c) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv = wp[ky * kw + kx];
                        double wacc = 0.0;
                        const int y0 = std::max(0, ph - ky), y1 = std::min(h, h + ph - ky);
                        const int x0 = std::max(0, pw - kx), x1 = std::min(w, w + pw - kx);
                        for (int y = y0; y < y1; ++y) {
                            const double* xr = xp + (y + ky - ph) * w + (kx - pw);
                            double* gxr = gxp + (y + ky - ph) * w + (kx - pw);
                            const double* gor = gop + y * w;
                            for (int x = x0; x < x1; ++x) {
                                wacc += gor[x] * xr[x];
                                gxr[x] += gor[x] * wv;
                            }
                        }
                        gwp[ky * kw + kx] += wacc;
                    }
                }
            }
        }
    });
}

Tape::Id Tape::maxpool(Id input, int pool_h, int pool_w) {
    const Tensor& X = val(input);
    if (X.rank() != 3) throw ValidationError("maxpool expects {c,h,w}");
    const int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    if (h % pool_h != 0 || w % pool_w != 0)
        throw ValidationError("maxpool: input " + X.shape_str() + " not divisible by pool " +
                              std::to_string(pool_h) + "x" + std::to_string(pool_w));
    const int oh = h / pool_h, ow = w / pool_w;
    Tensor out({c, oh, ow});
    std::vector<int32_t> argmax(static_cast<size_t>(c) * oh * ow);
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = X.data.data() + static_cast<size_t>(ch) * h * w;
        double* op = out.data.data() + static_cast<size_t>(ch) * oh * ow;
        int32_t* ap = argmax.data() + static_cast<size_t>(ch) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double best = -1e300;
                int32_t bi = 0;
                for (int dy = 0; dy < pool_h; ++dy) {
                    for (int dx = 0; dx < pool_w; ++dx) {
                        const int yy = oy * pool_h + dy, xx = ox * pool_w + dx;
                        const double v = xp[yy * w + xx];
                        if (v > best) {
                            best = v;
                            bi = yy * w + xx;
                        }
                    }
                }
                op[oy * ow + ox] = best;
                ap[oy * ow + ox] = bi;
            }
        }
    }
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, input, argmax, c, h, w, oh, ow]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(input);
        Tensor& gx = grad_ref(input);
        for (int ch = 0; ch < c; ++ch) {
            double* gxp = gx.data.data() + static_cast<size_t>(ch) * h * w;
            const double* gop = go.data.data() + static_cast<size_t>(ch) * oh * ow;
            const int32_t* ap = argmax.data() + static_cast<size_t>(ch) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) gxp[ap[i]] += gop[i];
        }
    });
}

Tape::Id Tape::colvec(Id input, int col) {
    const Tensor& X = val(input);
    if (X.rank() != 3 || X.dim(1) != 1) throw ValidationError("colvec expects {c,1,w}");
    const int c = X.dim(0), w = X.dim(2);
    if (col < 0 || col >= w) throw ValidationError("colvec column out of range");
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) out[ch] = X.data[static_cast<size_t>(ch) * w + col];
    const Id out_id = static_cast<Id>(nodes_.size());
    return push(std::move(out), [this, out_id, input, col, c, w]() {
        const Tensor& go = grad_ref(out_id);
        ensure_grad(input);
        Tensor& gx = grad_ref(input);
        for (int ch = 0; ch < c; ++ch) gx.data[static_cast<size_t>(ch) * w + col] += go[ch];
    });
}

void Tape::backward(Id root) {
    if (!grad_enabled_) throw ValidationError("backward() on a forward-only tape");
    if (val(root).numel() != 1) throw ValidationError("backward root must be scalar");
    ensure_grad(root);
    grad_ref(root)[0] = 1.0;
    for (Id id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.back && !n.grad.data.empty()) n.back();
    }
}

}  // namespace formstruct
