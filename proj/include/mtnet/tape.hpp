#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "mtnet/rng.hpp"
#include "mtnet/tensor.hpp"

namespace mtnet {

// Reverse-mode tape over dense tensors. Every backward rule is expressed with
// recorded ops, so a gradient produced with create_graph=true is itself a
// differentiable graph node and grad() can be applied to it again.

enum class OpKind {
    Constant,
    MatMul,
    Add,
    Subtract,
    ScalarMul,
    Hadamard,
    Transpose,
    Relu,
    ReluMask,  // 1 where input > 0, else 0; derivative is zero everywhere
    Sigmoid,
    Exp,
    Log,
    MseLoss,
    GumbelBernoulli,
    BroadcastRow,
};

const char* op_name(OpKind op);

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
};

struct Node {
    OpKind op = OpKind::Constant;
    Tensor value;
    int a = -1;          // first parent
    int b = -1;          // second parent
    double scalar = 0.0; // ScalarMul factor / GumbelBernoulli temperature
    Tensor noise;        // GumbelBernoulli: g1 - g2 per logit, fixed at record time
};

class Tape {
public:
    explicit Tape(std::uint64_t seed = 0) : rng_(seed) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);

    std::size_t size() const { return nodes_.size(); }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    Rng& rng() { return rng_; }

    // Appends a node after validating shapes and the finiteness of its value.
    Var record(OpKind op, int a, int b, double scalar, Tensor value, Tensor noise = {});

private:
    std::deque<Node> nodes_;  // stable references under growth
    Rng rng_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var smul(Var a, double s);
Var hadamard(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var mse_loss(Var prediction, Var target);

// Relaxed Bernoulli gate per logit: sigmoid((zeta + g1 - g2) / temperature)
// with g1, g2 ~ Gumbel(0,1) drawn from the tape's stream and held constant,
// so the node is differentiable in zeta only.
Var gumbel_relaxed_bernoulli(Var zeta, double temperature);

// v is n x 1 (replicates each row entry across `cols`) or 1 x 1 (fills rows x cols).
Var broadcast_row(Var v, int rows, int cols);

// Fresh constant with the same value; cuts gradient flow.
Var detach(Var a);

// Gradients of a scalar output with respect to each node in wrt.
// Unreachable wrt nodes yield zero tensors of matching shape. When
// create_graph is false the returned nodes are detached constants.
std::vector<Var> grad(Var output, std::span<const Var> wrt, bool create_graph);

// Central-difference gradient estimate, entrywise (f(x+h e_i) - f(x-h e_i)) / 2h.
Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& at,
                         double h);

}  // namespace mtnet
