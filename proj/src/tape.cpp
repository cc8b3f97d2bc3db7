#include "mtnet/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtnet {

const char* op_name(OpKind op)
{
    switch (op) {
        case OpKind::Constant: return "constant";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Subtract: return "subtract";
        case OpKind::ScalarMul: return "scalar-multiply";
        case OpKind::Hadamard: return "hadamard";
        case OpKind::Transpose: return "transpose";
        case OpKind::Relu: return "relu";
        case OpKind::ReluMask: return "relu-mask";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::MseLoss: return "mse-loss";
        case OpKind::GumbelBernoulli: return "gumbel-relaxed-bernoulli";
        case OpKind::BroadcastRow: return "broadcast-row";
    }
    return "?";
}

const Tensor& Var::value() const
{
    if (!valid()) throw std::logic_error("Var::value: invalid handle");
    return tape->node(id).value;
}

Var Tape::constant(Tensor value)
{
    nodes_.push_back(Node{OpKind::Constant, std::move(value), -1, -1, 0.0, {}});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(OpKind op, int a, int b, double scalar, Tensor value, Tensor noise)
{
    if (!value.all_finite())
        throw std::runtime_error(std::string("record: non-finite result from op '") +
                                 op_name(op) + "'");
    nodes_.push_back(Node{op, std::move(value), a, b, scalar, std::move(noise)});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

namespace {

Tape* common_tape(Var a, Var b)
{
    if (!a.valid() || !b.valid())
        throw std::invalid_argument("op: invalid operand handle");
    if (a.tape != b.tape)
        throw std::invalid_argument("op: operands live on different tapes");
    return a.tape;
}

void require(bool cond, OpKind op, const Tensor& x, const Tensor& y)
{
    if (!cond)
        throw std::invalid_argument(std::string(op_name(op)) + ": shape mismatch " +
                                    x.shape_str() + " vs " + y.shape_str());
}

Tensor map_unary(const Tensor& x, double (*fn)(double))
{
    Tensor y = x;
    for (auto& v : y.data()) v = fn(v);
    return y;
}

}  // namespace

Var matmul(Var a, Var b)
{
    Tape* t = common_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows())
        throw std::invalid_argument(std::string("matmul: incompatible shapes ") +
                                    av.shape_str() + " * " + bv.shape_str());
    return t->record(OpKind::MatMul, a.id, b.id, 0.0, matmul(av, bv));
}

Var add(Var a, Var b)
{
    Tape* t = common_tape(a, b);
    require(a.value().same_shape(b.value()), OpKind::Add, a.value(), b.value());
    return t->record(OpKind::Add, a.id, b.id, 0.0, a.value() + b.value());
}

Var sub(Var a, Var b)
{
    Tape* t = common_tape(a, b);
    require(a.value().same_shape(b.value()), OpKind::Subtract, a.value(), b.value());
    return t->record(OpKind::Subtract, a.id, b.id, 0.0, a.value() - b.value());
}

Var smul(Var a, double s)
{
    if (!a.valid()) throw std::invalid_argument("scalar-multiply: invalid operand");
    if (!std::isfinite(s))
        throw std::invalid_argument("scalar-multiply: non-finite factor");
    return a.tape->record(OpKind::ScalarMul, a.id, -1, s, s * a.value());
}

Var hadamard(Var a, Var b)
{
    Tape* t = common_tape(a, b);
    require(a.value().same_shape(b.value()), OpKind::Hadamard, a.value(), b.value());
    return t->record(OpKind::Hadamard, a.id, b.id, 0.0, hadamard(a.value(), b.value()));
}

Var transpose(Var a)
{
    if (!a.valid()) throw std::invalid_argument("transpose: invalid operand");
    return a.tape->record(OpKind::Transpose, a.id, -1, 0.0, transposed(a.value()));
}

Var relu(Var a)
{
    if (!a.valid()) throw std::invalid_argument("relu: invalid operand");
    return a.tape->record(OpKind::Relu, a.id, -1, 0.0,
                          map_unary(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }));
}

namespace {

Var relu_mask(Var a)
{
    // subgradient convention: exactly 0 at 0
    return a.tape->record(OpKind::ReluMask, a.id, -1, 0.0,
                          map_unary(a.value(), [](double v) { return v > 0.0 ? 1.0 : 0.0; }));
}

}  // namespace

Var sigmoid(Var a)
{
    if (!a.valid()) throw std::invalid_argument("sigmoid: invalid operand");
    return a.tape->record(OpKind::Sigmoid, a.id, -1, 0.0, map_unary(a.value(), stable_sigmoid));
}

Var exp(Var a)
{
    if (!a.valid()) throw std::invalid_argument("exp: invalid operand");
    return a.tape->record(OpKind::Exp, a.id, -1, 0.0,
                          map_unary(a.value(), [](double v) { return std::exp(v); }));
}

Var log(Var a)
{
    if (!a.valid()) throw std::invalid_argument("log: invalid operand");
    return a.tape->record(OpKind::Log, a.id, -1, 0.0,
                          map_unary(a.value(), [](double v) { return std::log(v); }));
}

Var mse_loss(Var prediction, Var target)
{
    Tape* t = common_tape(prediction, target);
    require(prediction.value().same_shape(target.value()), OpKind::MseLoss, prediction.value(),
            target.value());
    const Tensor& p = prediction.value();
    const Tensor& y = target.value();
    double s = 0.0;
    for (size_t i = 0; i < p.data().size(); ++i) {
        const double d = p.data()[i] - y.data()[i];
        s += d * d;
    }
    s /= static_cast<double>(p.size());
    return t->record(OpKind::MseLoss, prediction.id, target.id, 0.0, Tensor::scalar(s));
}

Var gumbel_relaxed_bernoulli(Var zeta, double temperature)
{
    if (!zeta.valid())
        throw std::invalid_argument("gumbel-relaxed-bernoulli: invalid operand");
    if (!(temperature > 0.0))
        throw std::invalid_argument("gumbel-relaxed-bernoulli: temperature must be positive");
    Tape* t = zeta.tape;
    const Tensor& z = zeta.value();
    Tensor noise(z.rows(), z.cols());
    for (auto& g : noise.data()) {
        const double g1 = t->rng().gumbel();
        const double g2 = t->rng().gumbel();
        g = g1 - g2;
    }
    // softmax of two logits in log-space: sigmoid((zeta + g1 - g2)/c)
    Tensor out(z.rows(), z.cols());
    for (size_t i = 0; i < out.data().size(); ++i)
        out.data()[i] = stable_sigmoid((z.data()[i] + noise.data()[i]) / temperature);
    return t->record(OpKind::GumbelBernoulli, zeta.id, -1, temperature, std::move(out),
                     std::move(noise));
}

Var broadcast_row(Var v, int rows, int cols)
{
    if (!v.valid()) throw std::invalid_argument("broadcast-row: invalid operand");
    const Tensor& x = v.value();
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument("broadcast-row: target shape must be positive");
    Tensor out(rows, cols);
    if (x.rows() == 1 && x.cols() == 1) {
        const double s = x(0, 0);
        for (auto& o : out.data()) o = s;
    } else if (x.cols() == 1 && x.rows() == rows) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) out(i, j) = x(i, 0);
    } else {
        throw std::invalid_argument("broadcast-row: source " + x.shape_str() +
                                    " does not broadcast to " + out.shape_str());
    }
    return v.tape->record(OpKind::BroadcastRow, v.id, -1, 0.0, std::move(out));
}

Var detach(Var a)
{
    if (!a.valid()) throw std::invalid_argument("detach: invalid operand");
    return a.tape->constant(a.value());
}

namespace {

// Accumulates `incoming` into the adjoint slot of node `id`.
void accumulate(std::vector<int>& adjoint, int id, Var incoming)
{
    if (adjoint[static_cast<size_t>(id)] < 0) {
        adjoint[static_cast<size_t>(id)] = incoming.id;
    } else {
        Var existing{incoming.tape, adjoint[static_cast<size_t>(id)]};
        adjoint[static_cast<size_t>(id)] = add(existing, incoming).id;
    }
}

}  // namespace

std::vector<Var> grad(Var output, std::span<const Var> wrt, bool create_graph)
{
    if (!output.valid()) throw std::invalid_argument("grad: invalid output handle");
    Tape* t = output.tape;
    const Tensor& out_v = output.value();
    if (out_v.rows() != 1 || out_v.cols() != 1)
        throw std::invalid_argument("grad: output must be scalar, got " + out_v.shape_str());
    for (const Var& w : wrt) {
        if (!w.valid() || w.tape != t || w.id >= static_cast<int>(t->size()))
            throw std::invalid_argument("grad: wrt node is not on the tape");
    }

    // adjoint[i] = node id of d(output)/d(node i), or -1 if not (yet) reached
    std::vector<int> adjoint(static_cast<size_t>(output.id) + 1, -1);
    adjoint[static_cast<size_t>(output.id)] = t->constant(Tensor::scalar(1.0)).id;

    for (int id = output.id; id >= 0; --id) {
        const int up_id = adjoint[static_cast<size_t>(id)];
        if (up_id < 0) continue;
        // copy out node metadata: recording below grows the tape
        const OpKind op = t->node(id).op;
        const int pa = t->node(id).a;
        const int pb = t->node(id).b;
        const double sc = t->node(id).scalar;
        Var up{t, up_id};
        Var self{t, id};
        Var A{t, pa};
        Var B{t, pb};

        switch (op) {
            case OpKind::Constant:
            case OpKind::ReluMask:
                break;
            case OpKind::MatMul:
                accumulate(adjoint, pa, matmul(up, transpose(B)));
                accumulate(adjoint, pb, matmul(transpose(A), up));
                break;
            case OpKind::Add:
                accumulate(adjoint, pa, up);
                accumulate(adjoint, pb, up);
                break;
            case OpKind::Subtract:
                accumulate(adjoint, pa, up);
                accumulate(adjoint, pb, smul(up, -1.0));
                break;
            case OpKind::ScalarMul:
                accumulate(adjoint, pa, smul(up, sc));
                break;
            case OpKind::Hadamard:
                accumulate(adjoint, pa, hadamard(up, B));
                accumulate(adjoint, pb, hadamard(up, A));
                break;
            case OpKind::Transpose:
                accumulate(adjoint, pa, transpose(up));
                break;
            case OpKind::Relu:
                accumulate(adjoint, pa, hadamard(up, relu_mask(A)));
                break;
            case OpKind::Sigmoid: {
                Var ones = t->constant(Tensor::ones(self.value().rows(), self.value().cols()));
                accumulate(adjoint, pa, hadamard(up, hadamard(self, sub(ones, self))));
                break;
            }
            case OpKind::Exp:
                accumulate(adjoint, pa, hadamard(up, self));
                break;
            case OpKind::Log:
                // 1/x == exp(-log x); keeps the rule differentiable
                accumulate(adjoint, pa, hadamard(up, exp(smul(self, -1.0))));
                break;
            case OpKind::MseLoss: {
                const int r = A.value().rows(), c = A.value().cols();
                const double f = 2.0 / static_cast<double>(A.value().size());
                Var g = hadamard(broadcast_row(up, r, c), smul(sub(A, B), f));
                accumulate(adjoint, pa, g);
                accumulate(adjoint, pb, smul(g, -1.0));
                break;
            }
            case OpKind::GumbelBernoulli: {
                Var ones = t->constant(Tensor::ones(self.value().rows(), self.value().cols()));
                Var local = hadamard(self, sub(ones, self));
                accumulate(adjoint, pa, smul(hadamard(up, local), 1.0 / sc));
                break;
            }
            case OpKind::BroadcastRow: {
                const Tensor& src = A.value();
                const int r = self.value().rows(), c = self.value().cols();
                Var col_ones = t->constant(Tensor::ones(c, 1));
                if (src.rows() == 1 && src.cols() == 1) {
                    Var row_ones = t->constant(Tensor::ones(1, r));
                    accumulate(adjoint, pa, matmul(matmul(row_ones, up), col_ones));
                } else {
                    accumulate(adjoint, pa, matmul(up, col_ones));
                }
                break;
            }
        }
    }

    std::vector<Var> result;
    result.reserve(wrt.size());
    for (const Var& w : wrt) {
        Var g;
        if (w.id <= output.id && adjoint[static_cast<size_t>(w.id)] >= 0) {
            g = Var{t, adjoint[static_cast<size_t>(w.id)]};
        } else {
            g = t->constant(Tensor::zeros(w.value().rows(), w.value().cols()));
        }
        result.push_back(create_graph ? g : detach(g));
    }
    return result;
}

Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& at,
                         double h)
{
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference: h must be positive");
    Tensor g(at.rows(), at.cols());
    Tensor probe = at;
    for (size_t i = 0; i < probe.data().size(); ++i) {
        const double x0 = probe.data()[i];
        probe.data()[i] = x0 + h;
        const double fp = f(probe);
        probe.data()[i] = x0 - h;
        const double fm = f(probe);
        probe.data()[i] = x0;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_difference: non-finite function evaluation");
        g.data()[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace mtnet
