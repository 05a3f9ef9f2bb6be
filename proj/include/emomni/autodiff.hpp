// autodiff.hpp : define-by-run reverse-mode tape over Mat
//
// Every differentiable computation in the project is expressed as tape ops,
// so inference is just a tape run without backward() and every training path
// can be checked against central finite differences.
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "emomni/mat.hpp"
#include "emomni/params.hpp"

namespace emomni {

class Tape {
public:
    // Creates a constant or trainable input node. Returns the node id.
    int leaf(Mat value, bool requires_grad = false);

    // Binds a named parameter from the store. Repeated binds of the same name
    // on one tape return the same node, so gradients accumulate across uses.
    int param(ParamStore& store, const std::string& name, bool trainable);

    // ---- elementwise / linear algebra ----
    int matmul(int a, int b);     // A @ B
    int matmul_nt(int a, int b);  // A @ B^T
    int add(int a, int b);        // same shape
    int sub(int a, int b);
    int mul(int a, int b);  // hadamard
    int scale(int a, double c);
    int add_const(int a, double c);
    int add_rowvec(int a, int v);  // v is 1 x C, broadcast over rows
    int mul_rowvec(int a, int v);

    // ---- shape ops ----
    int concat_rows(int a, int b);
    int concat_cols(int a, int b);
    int slice_rows(int a, int r0, int r1);  // [r0, r1)
    int slice_cols(int a, int c0, int c1);

    // ---- nonlinearities ----
    int sigmoid(int a);
    int tanh_op(int a);

    // Per-row layer normalization: (x - mean) / sqrt(var + eps), population var.
    int layer_norm(int a, double eps);

    // Fused causal self-attention for one head. q,k,v are [N x dh]; row i
    // attends to rows 0..i only. Masked positions are never computed, which
    // keeps outputs bitwise independent of any suffix.
    int causal_attend(int q, int k, int v, double scale);

    // Gathers rows of `table` by ids. Gradient scatter-adds into the table.
    int embed(int table, const std::vector<int>& ids);

    // ---- reductions / losses (all return 1x1 nodes) ----
    int mean_all(int a);
    int sum_all(int a);
    // Mean softmax cross-entropy of logits rows against integer targets.
    int softmax_xent(int logits, const std::vector<int>& targets);
    // Mean over rows of per-row cosine similarity; rows where either side has
    // norm < eps contribute 0 (and receive zero gradient).
    int row_cosine_mean(int a, int b, double eps);

    void backward(int loss_node);

    const Mat& val(int id) const { return nodes_[id].value; }
    // Gradient of the last backward() w.r.t. node id (zeros if unreached).
    Mat grad_of(int id) const;
    bool has_param(const std::string& name) const { return param_nodes_.count(name) != 0; }
    int param_node(const std::string& name) const { return param_nodes_.at(name); }
    const std::map<std::string, int>& param_nodes() const { return param_nodes_; }
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;  // allocated on demand during backward
        bool requires_grad = false;
        bool grad_alloc = false;
        std::function<void(Tape&)> back;
    };

    int push(Mat value, bool requires_grad, std::function<void(Tape&)> back = nullptr);
    void accum(int id, const Mat& g);
    Mat& grad_ref(int id);
    bool wants(int id) const { return nodes_[id].requires_grad; }

    std::vector<Node> nodes_;
    std::map<std::string, int> param_nodes_;
};

// Central-difference gradient of scalar function f at x (test/verification helper).
Mat numeric_gradient(const std::function<double(const Mat&)>& f, Mat x, double step = 1e-5);

// Max relative error between analytic and numeric gradients.
double gradient_rel_error(const Mat& analytic, const Mat& numeric);

}  // namespace emomni
