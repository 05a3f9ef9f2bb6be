// test_autodiff.cpp : central finite-difference checks for every tape op
#include "doctest.h"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "emomni/autodiff.hpp"

using namespace emomni;

namespace {

// Runs one op chain twice: once through backward(), once through central
// differences over fresh tapes. The two routes share no gradient code.
double check_grad(const Mat& x, const std::function<int(Tape&, int)>& build) {
    Tape t;
    int xid = t.leaf(x, true);
    int loss = build(t, xid);
    t.backward(loss);
    Mat analytic = t.grad_of(xid);
    Mat numeric = numeric_gradient(
        [&](const Mat& xp) {
            Tape t2;
            int id = t2.leaf(xp, false);
            return t2.val(build(t2, id)).at(0, 0);
        },
        x);
    return gradient_rel_error(analytic, numeric);
}

constexpr double kGradTol = 1e-5;

}  // namespace

TEST_CASE("mat helpers: transpose, matmul variants, bitwise equality") {
    Mat a = mat_randn(3, 5, 1.0, 11);
    Mat b = mat_randn(5, 4, 1.0, 12);
    Mat c = mat_randn(3, 4, 1.0, 13);

    CHECK(mat_max_abs_diff(mat_transpose(mat_transpose(a)), a) == 0.0);
    CHECK(mat_max_abs_diff(mat_mul_nt(a, mat_transpose(b)), mat_mul(a, b)) < 1e-12);
    CHECK(mat_max_abs_diff(mat_mul_tn(mat_transpose(a), b), mat_mul(a, b)) < 1e-12);
    CHECK(mat_bitwise_equal(a, a));
    CHECK(!mat_bitwise_equal(a, c));

    Mat a2 = a;
    a2.data[7] = std::nextafter(a2.data[7], 1e300);
    CHECK(!mat_bitwise_equal(a, a2));
}

TEST_CASE("rng: deterministic per seed, divergent across seeds") {
    Rng r1(42), r2(42), r3(43);
    bool same = true, diff = false;
    for (int i = 0; i < 64; ++i) {
        uint64_t a = r1.next_u64(), b = r2.next_u64(), c = r3.next_u64();
        same = same && (a == b);
        diff = diff || (a != c);
    }
    CHECK(same);
    CHECK(diff);

    Rng r4(7);
    for (int i = 0; i < 1000; ++i) {
        double u = r4.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        int k = r4.below(13);
        CHECK(k >= 0);
        CHECK(k < 13);
    }

    CHECK(mat_bitwise_equal(mat_randn(4, 4, 0.5, 99), mat_randn(4, 4, 0.5, 99)));
    CHECK(!mat_bitwise_equal(mat_randn(4, 4, 0.5, 99), mat_randn(4, 4, 0.5, 100)));
}

TEST_CASE("grad: matmul both operands") {
    Mat x = mat_randn(3, 4, 1.0, 1);
    Mat w = mat_randn(4, 2, 1.0, 2);
    CHECK(check_grad(x, [&](Tape& t, int id) {
              int wi = t.leaf(w, false);
              return t.mean_all(t.matmul(id, wi));
          }) <= kGradTol);
    CHECK(check_grad(w, [&](Tape& t, int id) {
              int xi = t.leaf(x, false);
              return t.mean_all(t.matmul(xi, id));
          }) <= kGradTol);
}

TEST_CASE("grad: matmul_nt both operands") {
    Mat x = mat_randn(3, 4, 1.0, 3);
    Mat w = mat_randn(5, 4, 1.0, 4);
    CHECK(check_grad(x, [&](Tape& t, int id) {
              int wi = t.leaf(w, false);
              return t.mean_all(t.matmul_nt(id, wi));
          }) <= kGradTol);
    CHECK(check_grad(w, [&](Tape& t, int id) {
              int xi = t.leaf(x, false);
              return t.mean_all(t.matmul_nt(xi, id));
          }) <= kGradTol);
}

TEST_CASE("grad: add, sub, hadamard, scale, add_const") {
    Mat x = mat_randn(4, 3, 1.0, 5);
    Mat y = mat_randn(4, 3, 1.0, 6);
    CHECK(check_grad(x, [&](Tape& t, int id) {
              int yi = t.leaf(y, false);
              int s = t.add(id, yi);
              int d = t.sub(s, t.mul(id, yi));
              return t.mean_all(t.add_const(t.scale(d, 1.7), 0.3));
          }) <= kGradTol);
}

TEST_CASE("grad: row-vector broadcast ops") {
    Mat x = mat_randn(5, 4, 1.0, 7);
    Mat v = mat_randn(1, 4, 1.0, 8);
    CHECK(check_grad(x, [&](Tape& t, int id) {
              int vi = t.leaf(v, false);
              return t.mean_all(t.tanh_op(t.mul_rowvec(t.add_rowvec(id, vi), vi)));
          }) <= kGradTol);
    CHECK(check_grad(v, [&](Tape& t, int id) {
              int xi = t.leaf(x, false);
              return t.mean_all(t.tanh_op(t.mul_rowvec(t.add_rowvec(xi, id), id)));
          }) <= kGradTol);
}

TEST_CASE("grad: concat and slice round trips") {
    Mat x = mat_randn(3, 4, 1.0, 9);
    Mat y = mat_randn(2, 4, 1.0, 10);
    CHECK(check_grad(x, [&](Tape& t, int id) {
              int yi = t.leaf(y, false);
              int cat = t.concat_rows(id, yi);
              int sl = t.slice_rows(cat, 1, 4);
              return t.mean_all(t.mul(sl, sl));
          }) <= kGradTol);

    Mat z = mat_randn(3, 2, 1.0, 11);
    CHECK(check_grad(x, [&](Tape& t, int id) {
              int zi = t.leaf(z, false);
              int cat = t.concat_cols(id, zi);
              int sl = t.slice_cols(cat, 1, 5);
              return t.mean_all(t.sigmoid(sl));
          }) <= kGradTol);
}

TEST_CASE("grad: sigmoid and tanh") {
    Mat x = mat_randn(4, 4, 1.5, 12);
    CHECK(check_grad(x, [&](Tape& t, int id) { return t.mean_all(t.sigmoid(id)); }) <= kGradTol);
    CHECK(check_grad(x, [&](Tape& t, int id) { return t.mean_all(t.tanh_op(id)); }) <= kGradTol);
}

TEST_CASE("layer_norm: normalizes rows and matches finite differences") {
    Mat x = mat_randn(6, 16, 2.0, 13);
    Tape t;
    int id = t.leaf(x, false);
    const Mat& y = t.val(t.layer_norm(id, 1e-6));
    for (int i = 0; i < y.rows; ++i) {
        double mu = 0.0, var = 0.0;
        for (int j = 0; j < y.cols; ++j) mu += y.at(i, j);
        mu /= y.cols;
        for (int j = 0; j < y.cols; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
        var /= y.cols;
        CHECK(std::fabs(mu) < 1e-12);
        CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-5);
    }

    Mat w = mat_randn(16, 4, 1.0, 14);
    CHECK(check_grad(x, [&](Tape& tt, int xi) {
              int wi = tt.leaf(w, false);
              return tt.mean_all(tt.mul(tt.layer_norm(xi, 1e-6), tt.matmul(tt.layer_norm(xi, 1e-6), tt.matmul_nt(wi, wi))));
          }) <= kGradTol);
}

TEST_CASE("grad: causal attention, all three inputs and shared input") {
    Mat q = mat_randn(5, 4, 1.0, 15);
    Mat k = mat_randn(5, 4, 1.0, 16);
    Mat v = mat_randn(5, 4, 1.0, 17);
    const double sc = 0.5;
    CHECK(check_grad(q, [&](Tape& t, int id) {
              int ki = t.leaf(k, false), vi = t.leaf(v, false);
              return t.mean_all(t.causal_attend(id, ki, vi, sc));
          }) <= kGradTol);
    CHECK(check_grad(k, [&](Tape& t, int id) {
              int qi = t.leaf(q, false), vi = t.leaf(v, false);
              return t.mean_all(t.causal_attend(qi, id, vi, sc));
          }) <= kGradTol);
    CHECK(check_grad(v, [&](Tape& t, int id) {
              int qi = t.leaf(q, false), ki = t.leaf(k, false);
              return t.mean_all(t.causal_attend(qi, ki, id, sc));
          }) <= kGradTol);
    // one tensor feeding q, k and v simultaneously must accumulate all paths
    CHECK(check_grad(q, [&](Tape& t, int id) {
              return t.mean_all(t.causal_attend(id, id, id, sc));
          }) <= kGradTol);
}

TEST_CASE("causal attention: suffix perturbation never reaches a prefix row") {
    Mat q = mat_randn(6, 4, 1.0, 18);
    Mat k = mat_randn(6, 4, 1.0, 19);
    Mat v = mat_randn(6, 4, 1.0, 20);

    Tape t;
    Mat base = t.val(t.causal_attend(t.leaf(q), t.leaf(k), t.leaf(v), 0.7));

    for (int cut = 1; cut < 6; ++cut) {
        Mat q2 = q, k2 = k, v2 = v;
        for (int i = cut; i < 6; ++i)
            for (int j = 0; j < 4; ++j) {
                q2.at(i, j) += 100.0 * (i + j + 1);
                k2.at(i, j) -= 31.0 * (i - j);
                v2.at(i, j) *= -3.0;
            }
        Tape t2;
        Mat pert = t2.val(t2.causal_attend(t2.leaf(q2), t2.leaf(k2), t2.leaf(v2), 0.7));
        for (int i = 0; i < cut; ++i)
            for (int j = 0; j < 4; ++j) {
                // bitwise: masked positions are never touched, not just ignored
                CHECK(base.at(i, j) == pert.at(i, j));
            }
    }
}

TEST_CASE("grad: embedding gather scatter-adds into the table") {
    Mat table = mat_randn(7, 3, 1.0, 21);
    std::vector<int> ids = {1, 1, 4, 0, 6, 4};
    CHECK(check_grad(table, [&](Tape& t, int id) {
              return t.mean_all(t.tanh_op(t.embed(id, ids)));
          }) <= kGradTol);

    Tape t;
    int tid = t.leaf(table, true);
    int loss = t.sum_all(t.embed(tid, ids));
    t.backward(loss);
    Mat g = t.grad_of(tid);
    // row 1 used twice, rows 2,3,5 never
    CHECK(g.at(1, 0) == doctest::Approx(2.0));
    CHECK(g.at(2, 0) == 0.0);
    CHECK(g.at(3, 2) == 0.0);
    CHECK(g.at(5, 1) == 0.0);
}

TEST_CASE("softmax_xent: value matches log-sum-exp oracle, gradient matches FD") {
    Mat logits = mat_randn(4, 6, 2.0, 22);
    std::vector<int> targets = {2, 0, 5, 3};

    Tape t;
    int li = t.leaf(logits, false);
    double loss = t.val(t.softmax_xent(li, targets)).at(0, 0);

    double expect = 0.0;
    for (int i = 0; i < 4; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < 6; ++j) mx = std::max(mx, logits.at(i, j));
        double z = 0.0;
        for (int j = 0; j < 6; ++j) z += std::exp(logits.at(i, j) - mx);
        expect += mx + std::log(z) - logits.at(i, targets[i]);
    }
    expect /= 4.0;
    CHECK(loss == doctest::Approx(expect).epsilon(1e-12));

    CHECK(check_grad(logits, [&](Tape& tt, int id) { return tt.softmax_xent(id, targets); }) <= kGradTol);
}

TEST_CASE("row_cosine_mean: value, gradients, degenerate rows") {
    Mat a = mat_randn(5, 8, 1.0, 23);
    Mat b = mat_randn(5, 8, 1.0, 24);

    Tape t;
    double got = t.val(t.row_cosine_mean(t.leaf(a), t.leaf(b), 1e-8)).at(0, 0);
    double expect = 0.0;
    for (int i = 0; i < 5; ++i) {
        double na = 0, nb = 0, dot = 0;
        for (int j = 0; j < 8; ++j) {
            na += a.at(i, j) * a.at(i, j);
            nb += b.at(i, j) * b.at(i, j);
            dot += a.at(i, j) * b.at(i, j);
        }
        expect += dot / (std::sqrt(na) * std::sqrt(nb));
    }
    expect /= 5.0;
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));

    CHECK(check_grad(a, [&](Tape& tt, int id) {
              int bi = tt.leaf(b, false);
              return tt.row_cosine_mean(id, bi, 1e-8);
          }) <= kGradTol);
    CHECK(check_grad(b, [&](Tape& tt, int id) {
              int ai = tt.leaf(a, false);
              return tt.row_cosine_mean(ai, id, 1e-8);
          }) <= kGradTol);

    // identical inputs -> exactly 1 per row
    Tape t2;
    CHECK(t2.val(t2.row_cosine_mean(t2.leaf(a), t2.leaf(a), 1e-8)).at(0, 0) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // a zero row contributes 0 to the mean and receives zero gradient
    Mat az = a;
    for (int j = 0; j < 8; ++j) az.at(2, j) = 0.0;
    Tape t3;
    int ai = t3.leaf(az, true);
    int bi = t3.leaf(b, false);
    int cm = t3.row_cosine_mean(ai, bi, 1e-8);
    double with_zero = t3.val(cm).at(0, 0);
    CHECK(with_zero == doctest::Approx(expect * 5.0 / 5.0 - 0.0).epsilon(1.0));  // sanity: finite
    t3.backward(cm);
    Mat ga = t3.grad_of(ai);
    for (int j = 0; j < 8; ++j) CHECK(ga.at(2, j) == 0.0);
}

TEST_CASE("grad: reductions and reuse of one node on several paths") {
    Mat x = mat_randn(3, 3, 1.0, 25);
    CHECK(check_grad(x, [&](Tape& t, int id) { return t.mean_all(id); }) <= kGradTol);
    CHECK(check_grad(x, [&](Tape& t, int id) { return t.sum_all(id); }) <= kGradTol);
    // diamond: y = mean(x*x) + sum(x), both branches must accumulate
    CHECK(check_grad(x, [&](Tape& t, int id) {
              return t.add(t.mean_all(t.mul(id, id)), t.scale(t.sum_all(id), 0.25));
          }) <= kGradTol);
}

TEST_CASE("param nodes: deduplicated per tape, gradients accumulate across uses") {
    ParamStore store;
    store.set("w", mat_randn(3, 3, 1.0, 26));

    Tape t;
    int w1 = t.param(store, "w", true);
    int w2 = t.param(store, "w", true);
    CHECK(w1 == w2);
    CHECK(t.has_param("w"));
    CHECK(t.param_node("w") == w1);

    // loss = sum(w) + 2 * sum(w) -> grad = 3 everywhere
    int loss = t.add(t.sum_all(w1), t.scale(t.sum_all(w2), 2.0));
    t.backward(loss);
    Mat g = t.grad_of(w1);
    for (size_t i = 0; i < g.size(); ++i) CHECK(g.data[i] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("param store: missing names raise, prefix listing is ordered") {
    ParamStore store;
    store.set("b.one", Mat(1, 1, 1.0));
    store.set("a.two", Mat(1, 1, 2.0));
    store.set("b.three", Mat(1, 1, 3.0));

    CHECK_THROWS_AS(store.get("nope"), std::out_of_range);
    auto names = store.names();
    REQUIRE(names.size() == 3);
    CHECK(names[0] == "a.two");  // map order = lexicographic
    auto bs = store.names_with_prefix("b.");
    REQUIRE(bs.size() == 2);
    CHECK(bs[0] == "b.one");
    CHECK(bs[1] == "b.three");
}

TEST_CASE("backward: requires a scalar loss node") {
    Tape t;
    int x = t.leaf(mat_randn(2, 2, 1.0, 27), true);
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}
