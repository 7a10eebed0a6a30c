#include "doctest.h"

#include "finite_difference.hpp"
#include "sgqa/rng.hpp"

using namespace sgqa;
using sgqa::testing::max_grad_rel_err;

namespace {

void randomize(ParamStore& ps, uint64_t seed) {
    Rng rng(seed);
    for (const std::string& name : ps.names()) {
        Mat& p = ps.get(name);
        for (int i = 0; i < p.rows(); ++i)
            for (int j = 0; j < p.cols(); ++j) p(i, j) = rng.normal(0.0, 0.7);
    }
}

Mat random_mat(int rows, int cols, uint64_t seed) {
    Rng rng(seed);
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, 0.7);
    return m;
}

}  // namespace

TEST_CASE("linear algebra op gradients match finite differences") {
    ParamStore ps;
    ps.create("A", 3, 4);
    ps.create("B", 4, 2);
    ps.create("C", 3, 2);
    randomize(ps, 1);
    const auto f = [](Tape& t, ParamStore& ps) {
        Var a = t.param("A", &ps);
        Var b = t.param("B", &ps);
        Var c = t.param("C", &ps);
        Var y = add(matmul(a, b), scale(c, 0.5));
        Var z = sub(y, transpose(matmul(transpose(b), transpose(a))));
        return sum(add(mul(y, y), z));
    };
    CHECK(max_grad_rel_err(ps, f) < 1e-6);
}

TEST_CASE("broadcast and elementwise gradients match finite differences") {
    ParamStore ps;
    ps.create("X", 4, 3);
    ps.create("b", 1, 3);
    ps.create("g", 1, 3);
    randomize(ps, 2);
    const auto f = [](Tape& t, ParamStore& ps) {
        Var x = t.param("X", &ps);
        Var y = mul_rowvec(add_rowvec(x, t.param("b", &ps)), t.param("g", &ps));
        return mean_all(mul(y, y));
    };
    CHECK(max_grad_rel_err(ps, f) < 1e-6);
}

TEST_CASE("shape op gradients match finite differences") {
    ParamStore ps;
    ps.create("A", 2, 3);
    ps.create("B", 2, 2);
    ps.create("C", 1, 5);
    randomize(ps, 3);
    const auto f = [](Tape& t, ParamStore& ps) {
        Var a = t.param("A", &ps);
        Var b = t.param("B", &ps);
        Var c = t.param("C", &ps);
        Var wide = concat_cols(a, b);          // 2 x 5
        Var tall = vstack({wide, c, wide});    // 5 x 5
        Var mid = slice_cols(tall, 1, 3);      // 5 x 3
        Var last = row(mid, 4);                // 1 x 3
        return add(sum(mul(mid, mid)), sum(last));
    };
    CHECK(max_grad_rel_err(ps, f) < 1e-6);
}

TEST_CASE("gather_rows scatter-adds repeated indices") {
    ParamStore ps;
    ps.create("T", 5, 3);
    ps.create("W", 3, 2);
    randomize(ps, 4);
    const auto f = [](Tape& t, ParamStore& ps) {
        Var picked = gather_rows(t.param("T", &ps), {0, 2, 1, 2, 2});
        return sum(tanh_(matmul(picked, t.param("W", &ps))));
    };
    CHECK(max_grad_rel_err(ps, f) < 1e-6);
}

TEST_CASE("nonlinearity gradients match finite differences") {
    ParamStore ps;
    ps.create("X", 3, 4);
    randomize(ps, 5);
    const auto tanh_loss = [](Tape& t, ParamStore& ps) {
        return sum(tanh_(t.param("X", &ps)));
    };
    const auto sig_loss = [](Tape& t, ParamStore& ps) {
        return sum(mul(sigmoid(t.param("X", &ps)), sigmoid(t.param("X", &ps))));
    };
    const auto gelu_loss = [](Tape& t, ParamStore& ps) {
        return sum(gelu(t.param("X", &ps)));
    };
    CHECK(max_grad_rel_err(ps, tanh_loss) < 1e-6);
    CHECK(max_grad_rel_err(ps, sig_loss) < 1e-6);
    CHECK(max_grad_rel_err(ps, gelu_loss) < 1e-6);
}

TEST_CASE("softmax and normalization gradients match finite differences") {
    ParamStore ps;
    ps.create("X", 3, 5);
    randomize(ps, 6);
    const Mat probe = random_mat(3, 5, 99);
    const auto soft_loss = [probe](Tape& t, ParamStore& ps) {
        return sum(mul(softmax_rows(t.param("X", &ps)), t.input(probe)));
    };
    const auto norm_loss = [probe](Tape& t, ParamStore& ps) {
        return sum(mul(normalize_rows(t.param("X", &ps)), t.input(probe)));
    };
    CHECK(max_grad_rel_err(ps, soft_loss) < 1e-6);
    CHECK(max_grad_rel_err(ps, norm_loss) < 1e-6);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    ParamStore ps;
    ps.create("W", 4, 6);
    randomize(ps, 7);
    const Mat x = random_mat(1, 4, 100);
    const auto f = [x](Tape& t, ParamStore& ps) {
        Var logits = matmul(t.input(x), t.param("W", &ps));
        return add(cross_entropy_row(logits, 2), cross_entropy_row(logits, 5));
    };
    CHECK(max_grad_rel_err(ps, f) < 1e-6);
}

TEST_CASE("composite embedding model gradient matches finite differences") {
    ParamStore ps;
    ps.create("E", 6, 4);
    ps.create("W", 8, 5);
    ps.create("b", 1, 5);
    randomize(ps, 8);
    const auto f = [](Tape& t, ParamStore& ps) {
        Var e = gather_rows(t.param("E", &ps), {1, 4, 1});
        Var n = normalize_rows(e, 1e-8);
        Var h = concat_cols(n, gelu(e));  // 3 x 8
        Var logits = add_rowvec(matmul(h, t.param("W", &ps)), t.param("b", &ps));
        Var l0 = cross_entropy_row(row(logits, 0), 0);
        Var l1 = cross_entropy_row(row(logits, 1), 3);
        Var l2 = cross_entropy_row(row(logits, 2), 4);
        return add(add(l0, l1), l2);
    };
    CHECK(max_grad_rel_err(ps, f) < 1e-6);
}

TEST_CASE("softmax rows sum to one and are recorded in stats") {
    Tape tape;
    NormStats stats;
    tape.stats = &stats;
    Var y = softmax_rows(tape.input(random_mat(4, 7, 11)));
    for (int r = 0; r < 4; ++r) CHECK(y.value().row(r).sum() == doctest::Approx(1.0));
    REQUIRE(stats.softmax_row_dev.size() == 4);
    for (double d : stats.softmax_row_dev) CHECK(d < 1e-12);
}

TEST_CASE("normalize_rows has near-exact zero mean and unit variance") {
    Tape tape;
    NormStats stats;
    tape.stats = &stats;
    Var y = normalize_rows(tape.input(random_mat(5, 16, 12)));
    REQUIRE(stats.norm_abs_mean.size() == 5);
    for (double m : stats.norm_abs_mean) CHECK(m < 1e-8);
    for (double v : stats.norm_var_dev) CHECK(v < 1e-8);
    CHECK(y.value().rows() == 5);
}

TEST_CASE("parameters reused on one tape accumulate one gradient") {
    ParamStore ps;
    ps.create("W", 2, 2);
    ps.get("W") << 1.0, 2.0, 3.0, 4.0;
    Tape tape;
    Var w1 = tape.param("W", &ps);
    Var w2 = tape.param("W", &ps);
    CHECK(w1.id == w2.id);
    ps.zero_grads();
    tape.backward(sum(add(w1, w2)));
    CHECK(ps.grad("W").isApprox(Mat::Constant(2, 2, 2.0)));
}

TEST_CASE("inputs receive no gradient and loss must be scalar") {
    Tape tape;
    Var x = tape.input(random_mat(2, 2, 13));
    CHECK_THROWS_AS(tape.backward(x), DimensionMismatch);
    Var s = sum(x);
    tape.backward(s);  // no parameters involved: a quiet no-op
    CHECK(tape.grad(x.id).size() == 0);
}

TEST_CASE("sgd step: zero rate is a no-op, momentum accelerates") {
    ParamStore ps;
    ps.create("W", 1, 1);
    ps.get("W")(0, 0) = 1.0;
    ps.grad("W")(0, 0) = 0.5;
    ps.sgd_step(0.0);
    CHECK(ps.get("W")(0, 0) == 1.0);

    ps.sgd_step(0.1);
    CHECK(ps.get("W")(0, 0) == doctest::Approx(0.95));

    // With momentum the same gradient twice moves further the second time.
    ParamStore pm;
    pm.create("W", 1, 1);
    pm.get("W")(0, 0) = 1.0;
    pm.grad("W")(0, 0) = 0.5;
    pm.sgd_step(0.1, 0.9);
    const double after_one = pm.get("W")(0, 0);
    pm.sgd_step(0.1, 0.9);
    const double step1 = 1.0 - after_one;
    const double step2 = after_one - pm.get("W")(0, 0);
    CHECK(step2 > step1);
}

TEST_CASE("quadratic descent converges") {
    // loss = sum((W - target)^2) over a 2x2 block.
    ParamStore ps;
    ps.create("W", 2, 2);
    randomize(ps, 14);
    const Mat target = random_mat(2, 2, 15);
    for (int step = 0; step < 200; ++step) {
        Tape tape;
        Var d = sub(tape.param("W", &ps), tape.input(target));
        Var loss = sum(mul(d, d));
        ps.zero_grads();
        tape.backward(loss);
        ps.sgd_step(0.1);
    }
    CHECK(ps.get("W").isApprox(target, 1e-6));
}
