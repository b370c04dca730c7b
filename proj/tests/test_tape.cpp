#include <doctest.h>

#include <cmath>

#include "formstruct/tape.hpp"

#include "test_util.hpp"

using namespace formstruct;
using testutil::gradcheck_max_rel_err;
using testutil::random_tensor;

TEST_CASE("matvec matches a hand-rolled double loop") {
    Rng rng(11);
    Tensor w = random_tensor({5, 3}, rng);
    Tensor x = random_tensor({3}, rng);
    Tape tape;
    Tape::Id y = tape.matvec(tape.constant(w), tape.constant(x));
    for (int i = 0; i < 5; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += w.at(i, j) * x[j];
        CHECK(tape.val(y)[i] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("elementwise ops and shapes") {
    Tape tape;
    Tape::Id a = tape.constant(Tensor::vector_of({1.0, -2.0, 3.0}));
    Tape::Id b = tape.constant(Tensor::vector_of({0.5, 4.0, -1.0}));
    CHECK(tape.val(tape.add(a, b))[1] == doctest::Approx(2.0));
    CHECK(tape.val(tape.mul(a, b))[2] == doctest::Approx(-3.0));
    CHECK(tape.val(tape.relu(a))[1] == 0.0);
    CHECK(tape.val(tape.sigmoid(tape.constant(Tensor::scalar(0.0))))[0] == doctest::Approx(0.5));
    CHECK(tape.val(tape.dot(a, b))[0] == doctest::Approx(0.5 - 8.0 - 3.0));
    CHECK_THROWS(tape.add(a, tape.constant(Tensor::scalar(1.0))));
}

TEST_CASE("logsumexp is stable for large inputs and reduces correctly") {
    Tape tape;
    std::vector<Tape::Id> s = {tape.constant(Tensor::scalar(1000.0)),
                               tape.constant(Tensor::scalar(999.0))};
    const double got = tape.val(tape.logsumexp(s))[0];
    CHECK(got == doctest::Approx(1000.0 + std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("backward through a composite expression matches finite differences") {
    Rng rng(7);
    Param w("w", random_tensor({4, 3}, rng));
    Param b("b", random_tensor({4}, rng));
    Param m("m", random_tensor({4, 4}, rng));
    auto build = [&](Tape& t) {
        Tape::Id x = t.constant(Tensor::vector_of({0.3, -0.2, 0.9}));
        Tape::Id h = t.tanh_(t.add(t.matvec(t.param(w), x), t.param(b)));
        Tape::Id g = t.sigmoid(t.matvec(t.param(m), h));
        return t.sum(t.mul(g, h));
    };
    CHECK(gradcheck_max_rel_err({&w, &b, &m}, build) < 1e-6);
}

TEST_CASE("slice/concat/row/maxvec gradients") {
    Rng rng(3);
    Param table("t", random_tensor({6, 4}, rng));
    Param w("w", random_tensor({2, 8}, rng));
    auto build = [&](Tape& t) {
        Tape::Id r0 = t.row(t.param(table), 1);
        Tape::Id r1 = t.row(t.param(table), 5);
        Tape::Id mx = t.maxvec(std::vector<Tape::Id>{r0, r1});
        Tape::Id cat = t.concat(std::vector<Tape::Id>{mx, t.slice(r0, 0, 4)});
        return t.sum(t.matvec(t.param(w), cat));
    };
    CHECK(gradcheck_max_rel_err({&table, &w}, build) < 1e-6);
}

TEST_CASE("conv2d and maxpool gradients at toy size") {
    Rng rng(5);
    Param cw("cw", random_tensor({2, 1, 3, 3}, rng));
    Param cb("cb", random_tensor({2}, rng, 0.1));
    Param in("in", random_tensor({1, 4, 6}, rng));
    auto build = [&](Tape& t) {
        Tape::Id conv = t.relu(t.conv2d(t.param(in), t.param(cw), t.param(cb)));
        Tape::Id pooled = t.maxpool(conv, 2, 2);
        return t.sum(pooled);
    };
    CHECK(gradcheck_max_rel_err({&cw, &cb, &in}, build) < 1e-5);
}

TEST_CASE("conv2d matches direct summation on a known case") {
    Tensor x({1, 3, 3});
    for (int i = 0; i < 9; ++i) x[i] = i + 1;
    Tensor w({1, 1, 3, 3});
    w.data.assign(9, 0.0);
    w.data[4] = 2.0;  // pure center tap: output = 2 * input
    Tensor b({1});
    b[0] = 0.5;
    Tape tape;
    Tape::Id y = tape.conv2d(tape.constant(x), tape.constant(w), tape.constant(b));
    for (int i = 0; i < 9; ++i) CHECK(tape.val(y)[i] == doctest::Approx(2.0 * (i + 1) + 0.5));
}

TEST_CASE("forward-only tape rejects backward") {
    Tape tape(false);
    Tape::Id a = tape.constant(Tensor::scalar(2.0));
    CHECK_THROWS(tape.backward(a));
}

TEST_CASE("logsumexp gradient is the softmax") {
    Param a("a", Tensor::scalar(0.7));
    Param b("b", Tensor::scalar(-0.3));
    auto build = [&](Tape& t) {
        return t.logsumexp(std::vector<Tape::Id>{t.param(a), t.param(b)});
    };
    Tape t;
    Tape::Id l = build(t);
    t.backward(l);
    const double za = std::exp(0.7), zb = std::exp(-0.3);
    CHECK(t.grad_for(a)->data[0] == doctest::Approx(za / (za + zb)).epsilon(1e-12));
    CHECK(t.grad_for(b)->data[0] == doctest::Approx(zb / (za + zb)).epsilon(1e-12));
    CHECK(gradcheck_max_rel_err({&a, &b}, build) < 1e-8);
}
