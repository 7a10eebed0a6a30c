#pragma once
// Tape-based reverse-mode differentiation over Eigen double matrices. Each
// forward pass records nodes on a fresh Tape; backward() walks the tape in
// reverse and accumulates parameter gradients into the owning ParamStore.
// The op set is exactly what the sequence and encoder models need; every
// backward rule is verified against central finite differences in tests.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgqa/errors.hpp"

namespace sgqa {

using Mat = Eigen::MatrixXd;

// Named parameter matrices with gradient and momentum-velocity slots.
// Iteration order is name order, which fixes serialization and update order.
class ParamStore {
public:
    Mat& create(const std::string& name, int rows, int cols);
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    Mat& get(const std::string& name);
    const Mat& get(const std::string& name) const;
    Mat& grad(const std::string& name);
    std::vector<std::string> names() const;
    size_t size() const { return params_.size(); }

    void zero_grads();
    // v <- momentum * v - lr * g;  p <- p + v. Plain SGD when momentum = 0.
    void sgd_step(double learning_rate, double momentum = 0.0);
    // Bias-corrected Adam with the usual beta/epsilon constants. Moment
    // estimates live in memory only; they are not persisted with weights.
    void adam_step(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                   double epsilon = 1e-8);

private:
    std::map<std::string, Mat> params_;
    std::map<std::string, Mat> grads_;
    std::map<std::string, Mat> velocities_;
    std::map<std::string, Mat> adam_m_, adam_v_;
    long adam_t_ = 0;
};

class Tape;

struct TrainReport {
    std::vector<double> losses;  // per step
    int steps = 0;
};

struct Var {
    int id = -1;
    Tape* tape = nullptr;
    const Mat& value() const;
    int rows() const { return static_cast<int>(value().rows()); }
    int cols() const { return static_cast<int>(value().cols()); }
};

// Numeric health probes captured during a forward pass: softmax row-sum
// deviation from 1, and pre-affine normalization statistics per vector.
struct NormStats {
    std::vector<double> softmax_row_dev;
    std::vector<double> norm_abs_mean;
    std::vector<double> norm_var_dev;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Constant leaf (no gradient flows into it).
    Var input(Mat value);
    // Parameter leaf: one node per name per tape; backward() accumulates
    // into store->grad(name).
    Var param(const std::string& name, ParamStore* store);

    const Mat& value(int id) const { return nodes_[id].value; }
    const Mat& grad(int id) const;

    // Seeds d(loss) = 1 and propagates; loss must be 1x1.
    void backward(Var loss);

    size_t size() const { return nodes_.size(); }

    NormStats* stats = nullptr;

    // Internal: used by the op free functions.
    int emit(Mat value, bool needs_grad, std::vector<int> parents,
             std::function<void(Tape&, int)> backward_fn);
    Mat& grad_slot(int id);
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }

private:
    struct Node {
        Mat value;
        Mat grad;  // lazily sized
        bool needs_grad = false;
        bool grad_ready = false;
        std::vector<int> parents;
        std::function<void(Tape&, int)> backward_fn;
    };
    std::vector<Node> nodes_;
    std::map<std::string, int> param_nodes_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);            // same shape
Var sub(Var a, Var b);            // same shape
Var add_rowvec(Var a, Var row);   // (n x d) + broadcast (1 x d)
Var mul(Var a, Var b);            // elementwise, same shape
Var mul_rowvec(Var a, Var row);   // (n x d) * broadcast (1 x d)
Var scale(Var a, double factor);
Var concat_cols(Var a, Var b);    // same rows
Var vstack(const std::vector<Var>& rows);  // same cols
Var slice_cols(Var a, int start, int len);
Var row(Var a, int index);        // 1 x d view of one row
Var gather_rows(Var table, const std::vector<int>& indices);  // scatter-add back
Var tanh_(Var a);
Var sigmoid(Var a);
Var gelu(Var a);                  // exact erf form, smooth everywhere
Var softmax_rows(Var a);
// Per-row (x - mean) / sqrt(var + eps); the layer-norm core before affine
// gain and bias. eps keeps the variance-1 property tight for tests.
Var normalize_rows(Var a, double eps = 1e-12);
Var sum(Var a);                   // 1 x 1
Var mean_all(Var a);              // 1 x 1
// -log softmax(logits)[target] with a stable log-sum-exp; logits 1 x V.
Var cross_entropy_row(Var logits, int target);

}  // namespace sgqa
