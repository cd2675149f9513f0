#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "osfuse/tensor.hpp"

namespace osf::num {

struct Node;
using Var = std::shared_ptr<Node>;

// One vertex of the reverse-mode graph. Ops append nodes whose backprop
// closure scatters this node's grad into its parents' grads. Parameters are
// long-lived nodes reused across graphs; intermediates die with the root Var.
struct Node {
    Tensor value;
    Tensor grad;  // lazily allocated, same shape as value
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;
    std::string name;

    void ensure_grad() {
        if (grad.size() != value.size()) grad = Tensor::zeros(value.shape());
    }
    void add_grad(const Tensor& g) {
        ensure_grad();
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    }
};

Var constant(Tensor v);
Var parameter(Tensor v, std::string name = {});

// Open node constructor for fused ops with hand-written adjoints.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);

// Elementwise ops broadcast a scalar operand, and a 1-D length-n operand
// against the rows of an m-by-n matrix.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var tanh(const Var& a);
Var softmax_lastdim(const Var& a);

Var sum(const Var& a);   // scalar
Var mean(const Var& a);  // scalar
Var mean_rows(const Var& a);
Var reshape(const Var& a, std::vector<std::size_t> shape);
Var gather_rows(const Var& a, std::vector<std::size_t> idx);
Var concat_rows(const std::vector<Var>& parts);
Var pick(const Var& a, std::size_t flat_index);

// Accumulates gradients of a scalar loss into every reachable node.
void backward(const Var& loss);
void zero_grad(const std::vector<Var>& params);

struct GradRecord {
    std::vector<std::string> names;
    std::vector<Tensor> params;
    std::vector<Tensor> grads;
};

GradRecord record_gradients(const Var& loss, const std::vector<Var>& params);

// Max over all parameter elements of |analytic - central difference| /
// max(|analytic|, |central|, 1e-8). op must return a scalar loss.
double finite_diff_check(const std::function<Var(const std::vector<Var>&)>& op,
                         const std::vector<Var>& params, double eps);

}  // namespace osf::num
