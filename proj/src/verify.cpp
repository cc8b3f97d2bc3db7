#include "mtnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "mtnet/analysis.hpp"
#include "mtnet/linalg.hpp"
#include "mtnet/meta.hpp"
#include "mtnet/net.hpp"
#include "mtnet/tape.hpp"
#include "mtnet/tasks.hpp"

namespace mtnet {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdAbsFloor = 1e-7;

// Runs `count` seeded instances of `body` (or a single replay instance) and
// collects the worst residual.
PropertyResult run_property(const VerifyOptions& opts, const std::string& name, int count,
                            double tolerance,
                            const std::function<double(std::uint64_t)>& body)
{
    PropertyResult r;
    r.name = name;
    r.tolerance = tolerance;
    if (opts.replay_seed) {
        r.instances = 1;
        r.worst_seed = *opts.replay_seed;
        r.max_residual = body(*opts.replay_seed);
    } else {
        r.instances = count;
        for (int i = 0; i < count; ++i) {
            const std::uint64_t s = derive_seed(opts.seed, name, static_cast<std::uint64_t>(i));
            const double res = body(s);
            if (i == 0 || res > r.max_residual) {
                r.max_residual = res;
                r.worst_seed = s;
            }
        }
    }
    r.pass = r.max_residual <= tolerance;
    return r;
}

// Normalized gradient error: 1.0 marks the edge of the allowed band.
double fd_violation(const Tensor& analytic, const Tensor& fd)
{
    double worst = 0.0;
    for (size_t i = 0; i < analytic.data().size(); ++i) {
        const double err = std::fabs(analytic.data()[i] - fd.data()[i]);
        const double allow = std::max(kFdAbsFloor, kFdRelTol * std::fabs(fd.data()[i]));
        worst = std::max(worst, err / allow);
    }
    return worst;
}

Tensor scaled_gaussian(int r, int c, Rng& rng)
{
    return (1.0 / std::sqrt(static_cast<double>(std::max(r, c)))) * gaussian_matrix(r, c, rng);
}

// ---------------------------------------------------------------- gradcheck

struct GradGraph {
    std::vector<Tensor> inputs;
    // records the scalar objective from already-created leaves
    std::function<Var(Tape&, std::span<const Var>)> build;
};

GradGraph make_grad_graph(std::uint64_t seed)
{
    Rng rng(seed);
    const int variant = static_cast<int>(rng.next_u64() % 6);
    const int n = 1 + static_cast<int>(rng.next_u64() % 4);
    const int k = 1 + static_cast<int>(rng.next_u64() % 4);
    const int m = 1 + static_cast<int>(rng.next_u64() % 4);

    GradGraph g;
    switch (variant) {
        case 0: {  // matmul + mse
            g.inputs = {gaussian_matrix(n, k, rng), gaussian_matrix(k, m, rng)};
            Tensor target = gaussian_matrix(n, m, rng);
            g.build = [target](Tape& t, std::span<const Var> in) {
                return mse_loss(matmul(in[0], in[1]), t.constant(target));
            };
            break;
        }
        case 1: {  // relu; keep pre-activations away from the kink
            Tensor a, b;
            for (;;) {
                a = gaussian_matrix(n, k, rng);
                b = gaussian_matrix(k, m, rng);
                const Tensor prod = matmul(a, b);
                double mn = 1e300;
                for (double v : prod.data()) mn = std::min(mn, std::fabs(v));
                if (mn > 1e-3) break;
            }
            g.inputs = {a, b};
            Tensor target = gaussian_matrix(n, m, rng);
            g.build = [target](Tape& t, std::span<const Var> in) {
                return mse_loss(relu(matmul(in[0], in[1])), t.constant(target));
            };
            break;
        }
        case 2: {  // sigmoid of hadamard
            g.inputs = {gaussian_matrix(n, m, rng), gaussian_matrix(n, m, rng)};
            Tensor target = gaussian_matrix(n, m, rng);
            g.build = [target](Tape& t, std::span<const Var> in) {
                return mse_loss(sigmoid(hadamard(in[0], in[1])), t.constant(target));
            };
            break;
        }
        case 3: {  // softplus via exp/log/add
            g.inputs = {gaussian_matrix(n, m, rng)};
            Tensor target = gaussian_matrix(n, m, rng);
            g.build = [target, n, m](Tape& t, std::span<const Var> in) {
                Var ones = t.constant(Tensor::ones(n, m));
                return mse_loss(log(add(exp(in[0]), ones)), t.constant(target));
            };
            break;
        }
        case 4: {  // transpose, broadcast-row, scalar-multiply, subtract
            g.inputs = {gaussian_matrix(k, n, rng), gaussian_matrix(k, 1, rng)};
            Tensor target = gaussian_matrix(n, m, rng);
            g.build = [target, k, m](Tape& t, std::span<const Var> in) {
                Var prod = matmul(transpose(in[0]), broadcast_row(in[1], k, m));
                return mse_loss(sub(smul(prod, 0.7), smul(t.constant(target), 0.3)),
                                t.constant(target));
            };
            break;
        }
        default: {  // relaxed Bernoulli gate path (differentiable in zeta)
            g.inputs = {gaussian_matrix(n, 1, rng)};
            Tensor weights = gaussian_matrix(n, m, rng);
            Tensor target = gaussian_matrix(n, m, rng);
            g.build = [weights, target, n, m](Tape& t, std::span<const Var> in) {
                Var gate = gumbel_relaxed_bernoulli(in[0], 0.7);
                Var mask = broadcast_row(gate, n, m);
                return mse_loss(hadamard(mask, t.constant(weights)), t.constant(target));
            };
            break;
        }
    }
    return g;
}

double gradcheck_ops_instance(std::uint64_t seed)
{
    GradGraph g = make_grad_graph(seed);
    const std::uint64_t tape_seed = derive_seed(seed, "tape", 0);

    Tape tape(tape_seed);
    std::vector<Var> leaves;
    for (const Tensor& t : g.inputs) leaves.push_back(tape.constant(t));
    Var out = g.build(tape, leaves);
    std::vector<Var> gs = grad(out, leaves, false);

    double worst = 0.0;
    for (size_t j = 0; j < g.inputs.size(); ++j) {
        auto f = [&](const Tensor& x) {
            Tape t(tape_seed);
            std::vector<Var> lv;
            for (size_t i = 0; i < g.inputs.size(); ++i)
                lv.push_back(t.constant(i == j ? x : g.inputs[i]));
            return g.build(t, lv).value()(0, 0);
        };
        Tensor fd = finite_difference(f, g.inputs[j], kFdStep);
        worst = std::max(worst, fd_violation(gs[j].value(), fd));
    }
    return worst;
}

double second_order_instance(std::uint64_t seed)
{
    Rng rng(seed);
    const int n = 2 + static_cast<int>(rng.next_u64() % 4);
    const Tensor m = gaussian_matrix(n, n, rng);
    const Tensor b = gaussian_matrix(n, 1, rng);
    const Tensor theta0 = gaussian_matrix(n, 1, rng);
    const double alpha = 0.05;

    // autodiff: d/dtheta L(theta - alpha grad L(theta))
    Tape tape(seed);
    Var theta = tape.constant(theta0);
    Var mm = tape.constant(m);
    Var bb = tape.constant(b);
    Var inner_loss = mse_loss(matmul(mm, theta), bb);
    std::vector<Var> wrt{theta};
    Var g0 = grad(inner_loss, wrt, /*create_graph=*/true)[0];
    Var theta_adapted = sub(theta, smul(g0, alpha));
    Var outer_loss = mse_loss(matmul(mm, theta_adapted), bb);
    Tensor meta_grad = grad(outer_loss, wrt, false)[0].value();

    // hand expression: (I - alpha H) grad L(theta_adapted), H = (2/n) M^T M
    const double scale = 2.0 / static_cast<double>(n);
    const Tensor h = scale * matmul(transposed(m), m);
    const Tensor adapted = theta0 - (alpha * (scale * matmul(transposed(m),
                                                             matmul(m, theta0) - b)));
    const Tensor grad_adapted = scale * matmul(transposed(m), matmul(m, adapted) - b);
    const Tensor expected = grad_adapted - (alpha * matmul(h, grad_adapted));

    return max_abs_diff(meta_grad, expected);
}

double determinism_instance(std::uint64_t seed)
{
    auto build = [&](Tape& t) {
        Rng data_rng(derive_seed(seed, "data", 0));
        Var a = t.constant(gaussian_matrix(3, 3, data_rng));
        Var z = t.constant(gaussian_matrix(3, 1, data_rng));
        Var gate = gumbel_relaxed_bernoulli(z, 0.5);
        Var mask = broadcast_row(gate, 3, 3);
        Var h = relu(matmul(a, hadamard(mask, a)));
        Var target = t.constant(gaussian_matrix(3, 3, data_rng));
        Var loss = mse_loss(sigmoid(h), target);
        std::vector<Var> wrt{a};
        (void)grad(loss, wrt, true);
    };
    Tape t1(seed), t2(seed);
    build(t1);
    build(t2);
    if (t1.size() != t2.size()) return 1.0;
    for (size_t i = 0; i < t1.size(); ++i)
        if (!bit_equal(t1.node(static_cast<int>(i)).value, t2.node(static_cast<int>(i)).value))
            return 1.0;
    return 0.0;
}

// ------------------------------------------------------ closed-form checks

double delta_norm_instance(std::uint64_t seed, bool inject_failure)
{
    Rng rng(seed);
    const int n = 1 + static_cast<int>(rng.next_u64() % 16);
    const int m = 1 + static_cast<int>(rng.next_u64() % 16);
    const Tensor t = scaled_gaussian(n, n, rng);
    const Tensor dw = scaled_gaussian(n, m, rng);
    const Tensor x = gaussian_matrix(m, 1, rng);
    double res = check_delta_y_norm(t, dw, x);
    if (inject_failure) res += 1e-3;
    return res;
}

double tnet_closed_form_instance(std::uint64_t seed)
{
    Rng rng(seed);
    const int n = 1 + static_cast<int>(rng.next_u64() % 16);
    const int m = 1 + static_cast<int>(rng.next_u64() % 16);
    const double alpha = 0.3;
    const Tensor w0 = scaled_gaussian(n, m, rng);
    const Tensor t0 = scaled_gaussian(n, n, rng);
    const Tensor x = gaussian_matrix(m, 1, rng);
    const Tensor target = gaussian_matrix(n, 1, rng);

    Network net;
    net.kind = ModelKind::Tnet;
    net.layer_sizes = {m, n};

    Tape tape(seed);
    std::vector<CellVars> cells{
        CellVars{tape.constant(w0), tape.constant(t0), tape.constant(Tensor::zeros(n, 1))}};
    Var x_v = tape.constant(x);
    Var y_v = tape.constant(target);
    std::vector<CellVars> adapted = inner_update_tnet(net, cells, x_v, y_v, alpha, 1, false);
    const Tensor y_new = forward(net, adapted, x_v).value();

    const Tensor y = matmul(t0, matmul(w0, x));
    const Tensor grad_y = (2.0 / static_cast<double>(n)) * (y - target);
    const Tensor grad_a = matmul(grad_y, transposed(x));
    Tensor metric;
    try {
        metric = effective_metric(t0);
    } catch (const std::invalid_argument&) {
        return 0.0;  // singular draw: skip (effective_metric rejects it by contract)
    }
    const Tensor y_closed = y - (alpha * matmul(metric, matmul(grad_a, x)));
    return max_abs_diff(y_new, y_closed);
}

double masked_unroll_instance(std::uint64_t seed)
{
    Rng rng(seed);
    const int n = 1 + static_cast<int>(rng.next_u64() % 16);
    const int m = 1 + static_cast<int>(rng.next_u64() % 16);
    const Tensor t = scaled_gaussian(n, n, rng);
    const Tensor w = scaled_gaussian(n, m, rng);
    const Tensor x = gaussian_matrix(m, 1, rng);
    const Tensor target = gaussian_matrix(n, 1, rng);
    Tensor mask(n, 1);
    const std::uint64_t pattern = rng.next_u64();
    for (int i = 0; i < n; ++i) mask(i, 0) = (pattern >> i) & 1 ? 1.0 : 0.0;
    double res = check_mtnet_unroll(t, w, mask, x, target, 0.3);
    // reduction cases: all-ones collapses to the unmasked identity, all-zeros
    // must leave y exactly fixed
    res = std::max(res, check_mtnet_unroll(t, w, Tensor::ones(n, 1), x, target, 0.3));
    res = std::max(res, check_mtnet_unroll(t, w, Tensor::zeros(n, 1), x, target, 0.3));
    return res;
}

// ------------------------------------------------------------ propositions

struct SpanProblem {
    SubspaceBasis u;
    Tensor a;
    int n = 0, d = 0, m = 0;
};

SpanProblem draw_span_problem(Rng& rng, int max_size)
{
    SpanProblem p;
    p.n = 2 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_size - 1));
    p.d = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(p.n));
    p.m = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_size));
    p.u.vectors = gaussian_matrix(p.n, p.d, rng);
    p.a = gaussian_matrix(p.n, p.m, rng);
    return p;
}

double subspace_reconstruction_instance(std::uint64_t seed, int max_size)
{
    Rng rng(seed);
    SpanProblem p = draw_span_problem(rng, max_size);
    CellConstruction cell = construct_subspace_cell(p.u, p.a, rng);
    return max_abs_diff(matmul(cell.T, cell.W), p.a);
}

double update_span_instance(std::uint64_t seed, int max_size)
{
    Rng rng(seed);
    SpanProblem p = draw_span_problem(rng, max_size);
    CellConstruction cell = construct_subspace_cell(p.u, p.a, rng);
    Tensor x = gaussian_matrix(p.m, 1, rng);
    while (frobenius_norm(x) < 1e-6) x = gaussian_matrix(p.m, 1, rng);
    SubspaceBasis span = estimate_update_span(cell, x, 2 * p.n + 4, rng);
    if (span.dim() != p.d) return 1.0;
    const std::vector<double> angles = principal_angles(span.vectors, p.u.vectors);
    return angles.empty() ? 1.0 : angles.back();
}

struct MetricCellSetup {
    SpanProblem p;
    MetricTensor g;
    CellConstruction cell;
    Tensor x;
    Tensor grad_y;   // loss gradient at y
    Tensor delta_y;  // realized update direction
};

MetricCellSetup make_metric_cell_setup(Rng& rng, int max_size, double metric_scale)
{
    MetricCellSetup s;
    s.p = draw_span_problem(rng, max_size);
    const Tensor b = gaussian_matrix(s.p.d, s.p.d, rng);
    s.g.g = metric_scale * (matmul(transposed(b), b) + (0.3 * Tensor::identity(s.p.d)));
    s.cell = construct_metric_cell(s.p.u, s.g, s.p.a, rng);

    s.x = gaussian_matrix(s.p.m, 1, rng);
    while (frobenius_norm(s.x) < 1e-6) s.x = gaussian_matrix(s.p.m, 1, rng);
    const Tensor y = matmul(s.cell.T, matmul(s.cell.W, s.x));
    const Tensor target = gaussian_matrix(s.p.n, 1, rng);
    s.grad_y = (2.0 / static_cast<double>(s.p.n)) * (y - target);

    // one masked update step, alpha = 1
    Tensor mask(s.p.n, s.p.m);
    for (int i = 0; i < s.p.n; ++i)
        for (int j = 0; j < s.p.m; ++j) mask(i, j) = s.cell.zeta(i, 0) > 0.0 ? 1.0 : 0.0;
    const Tensor grad_w =
        matmul(transposed(s.cell.T), matmul(s.grad_y, transposed(s.x)));
    const Tensor w_new = s.cell.W - hadamard(mask, grad_w);
    s.delta_y = matmul(s.cell.T, matmul(w_new, s.x)) - y;
    return s;
}

// direction the metric says is steepest: V G^{-1} V^T (-grad_y)
Tensor metric_oracle_direction(const MetricCellSetup& s)
{
    const Tensor l = cholesky(s.g.g);
    const Tensor vt_grad = matmul(transposed(s.p.u.vectors), -1.0 * s.grad_y);
    const Tensor c = solve_upper_triangular(transposed(l), solve_lower_triangular(l, vt_grad));
    return matmul(s.p.u.vectors, c);
}

double cosine(const Tensor& a, const Tensor& b)
{
    const double na = frobenius_norm(a), nb = frobenius_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot_flat(a, b) / (na * nb);
}

double metric_direction_instance(std::uint64_t seed, int max_size)
{
    Rng rng(seed);
    MetricCellSetup s = make_metric_cell_setup(rng, max_size, 1.0);
    return 1.0 - cosine(s.delta_y, metric_oracle_direction(s));
}

double metric_probe_instance(std::uint64_t seed, int max_size, int probes)
{
    Rng rng(seed);
    MetricCellSetup s = make_metric_cell_setup(rng, max_size, 1.0);

    // g-norm of a vector expressed as V c
    auto g_norm = [&](const Tensor& c) {
        return std::sqrt(dot_flat(c, matmul(s.g.g, c)));
    };
    // realized direction in U coordinates: least squares against V
    const Tensor vt_v = matmul(transposed(s.p.u.vectors), s.p.u.vectors);
    const Tensor c_real =
        lu_solve(vt_v, matmul(transposed(s.p.u.vectors), s.delta_y));
    const double rate_real =
        dot_flat(-1.0 * s.grad_y, s.delta_y) / g_norm(c_real);

    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const Tensor c = gaussian_matrix(s.p.d, 1, rng);
        const double nrm = g_norm(c);
        if (nrm < 1e-9) continue;
        const Tensor u = matmul(s.p.u.vectors, c);
        const double rate = dot_flat(-1.0 * s.grad_y, u) / nrm;
        worst = std::max(worst, (rate - rate_real) / std::fabs(rate_real));
    }
    return worst;
}

double metric_scale_instance(std::uint64_t seed, int max_size)
{
    Rng base(seed);
    Rng rng_a = base;
    Rng rng_b = base;
    MetricCellSetup a = make_metric_cell_setup(rng_a, max_size, 1.0);
    MetricCellSetup b = make_metric_cell_setup(rng_b, max_size, 7.25);
    return 1.0 - cosine(a.delta_y, b.delta_y);
}

// -------------------------------------------------- meta-gradient FD check

std::vector<Task> fd_task_batch(std::uint64_t seed)
{
    std::vector<Task> batch;
    Rng rng(derive_seed(seed, "fd-tasks", 0));
    batch.push_back(sample_sinusoid_task(5, 5, rng));
    batch.push_back(sample_sinusoid_task(5, 5, rng));
    return batch;
}

ParamSet fd_params(const Network& net, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, "fd-params", 0));
    ParamSet params = init_params(net, rng);
    for (CellTensors& c : params) {
        c.W = c.W + gaussian_matrix(c.W.rows(), c.W.cols(), rng);
        if (net.has_transform())
            c.T = c.T + (0.2 * gaussian_matrix(c.T.rows(), c.T.cols(), rng));
        if (net.has_mask())
            c.zeta = c.zeta + (0.5 * gaussian_matrix(c.zeta.rows(), c.zeta.cols(), rng));
    }
    return params;
}

double metagrad_fd_instance(std::uint64_t seed, ModelKind kind)
{
    Network net;
    net.kind = kind;
    net.layer_sizes = {1, 4, 4, 1};

    MetaConfig cfg;
    cfg.alpha = 0.1;
    cfg.inner_steps_train = 1;
    cfg.meta_batch = 2;
    cfg.seed = seed;

    const std::uint64_t tape_seed = derive_seed(seed, "fd-tape", 0);
    std::vector<Task> batch = fd_task_batch(seed);

    // pick a parameter draw whose relu inputs stay clear of the kink
    ParamSet params;
    bool found = false;
    for (int attempt = 0; attempt < 64 && !found; ++attempt) {
        params = fd_params(net, derive_seed(seed, "fd-attempt",
                                            static_cast<std::uint64_t>(attempt)));
        // rebuild the objective on a scratch tape and measure how far every
        // relu input sits from the kink; finite differences need clearance
        Tape scan(tape_seed);
        std::vector<CellVars> leaves = param_leaves(scan, net, params);
        double margin = 1e300;
        {
            // rebuild objective on `scan` via the public pieces
            for (const Task& task : batch) {
                auto [xtr, ytr] = design_matrices(task.train, false);
                auto [xte, yte] = design_matrices(task.test, false);
                Var x_train = scan.constant(xtr);
                Var y_train = scan.constant(ytr);
                Var x_test = scan.constant(xte);
                Var y_test = scan.constant(yte);
                std::vector<Var> masks;
                if (net.has_mask())
                    masks = sample_masks_relaxed(net, leaves, cfg.temperature);
                std::vector<CellVars> adapted;
                if (net.has_mask())
                    adapted = inner_update_mtnet(net, leaves, x_train, y_train, cfg.alpha,
                                                 cfg.inner_steps_train, masks, true);
                else if (net.has_transform())
                    adapted = inner_update_tnet(net, leaves, x_train, y_train, cfg.alpha,
                                                cfg.inner_steps_train, true);
                else
                    adapted = inner_update_maml(net, leaves, x_train, y_train, cfg.alpha,
                                                cfg.inner_steps_train, true);
                (void)mse_loss(forward(net, adapted, x_test), y_test);
            }
            for (size_t id = 0; id < scan.size(); ++id) {
                const Node& node = scan.node(static_cast<int>(id));
                if (node.op != OpKind::Relu) continue;
                for (double v : scan.node(node.a).value.data())
                    margin = std::min(margin, std::fabs(v));
            }
        }
        if (margin > 1e-3) found = true;
    }
    if (!found) throw std::runtime_error("metagrad fd: no kink-safe parameter draw found");

    MetaGrads mg = meta_grads(net, params, cfg, batch, false, tape_seed);

    double worst = 0.0;
    for (size_t ci = 0; ci < params.size(); ++ci) {
        struct Slot {
            Tensor CellTensors::*member;
            bool active;
            const Tensor* analytic;
        };
        const Slot slots[] = {
            {&CellTensors::W, true, &mg.g[ci].W},
            {&CellTensors::T, net.has_transform(), &mg.g[ci].T},
            {&CellTensors::zeta, net.has_mask(), &mg.g[ci].zeta},
        };
        for (const Slot& slot : slots) {
            if (!slot.active) continue;
            auto f = [&](const Tensor& x) {
                ParamSet p2 = params;
                p2[ci].*slot.member = x;
                return meta_loss_value(net, p2, cfg, batch, false, tape_seed);
            };
            Tensor fd = finite_difference(f, params[ci].*slot.member, kFdStep);
            worst = std::max(worst, fd_violation(*slot.analytic, fd));
        }
    }
    return worst;
}

// ----------------------------------------------------- reduction chain

double reduction_mtnet_tnet_instance(std::uint64_t seed)
{
    Network tnet, mtnet_net;
    tnet.kind = ModelKind::Tnet;
    mtnet_net.kind = ModelKind::Mtnet;
    tnet.layer_sizes = mtnet_net.layer_sizes = {1, 4, 4, 1};

    MetaConfig cfg;
    cfg.alpha = 0.01;
    cfg.beta = 1e-3;
    cfg.meta_batch = 2;
    cfg.seed = seed;

    Rng init_a(derive_seed(seed, "init", 0));
    Rng init_b(derive_seed(seed, "init", 0));
    ParamSet pt = init_params(tnet, init_a);
    ParamSet pm = init_params(mtnet_net, init_b);
    AdamState at = AdamState::init(pt);
    AdamState am = AdamState::init(pm);

    const int iters = 8;
    double mismatch = 0.0;
    for (int it = 0; it < iters; ++it) {
        Rng task_rng(derive_seed(seed, "tasks", static_cast<std::uint64_t>(it)));
        std::vector<Task> batch;
        for (int j = 0; j < cfg.meta_batch; ++j)
            batch.push_back(sample_sinusoid_task(5, 5, task_rng));

        std::vector<std::vector<Tensor>> ones_masks(batch.size());
        for (auto& per_task : ones_masks)
            for (int c = 0; c < mtnet_net.num_cells(); ++c)
                per_task.push_back(
                    Tensor::ones(mtnet_net.cell_out(c), mtnet_net.cell_in(c)));

        const std::uint64_t tape_seed = derive_seed(seed, "tape", static_cast<std::uint64_t>(it));
        const double lt = meta_step(tnet, pt, at, cfg, batch, false, tape_seed);
        MetaStepHooks hooks;
        hooks.mask_override = &ones_masks;
        const double lm = meta_step(mtnet_net, pm, am, cfg, batch, false, tape_seed, hooks);
        if (lt != lm) mismatch = std::max(mismatch, std::fabs(lt - lm) + 1e-300);
    }
    for (size_t i = 0; i < pt.size(); ++i) {
        if (!bit_equal(pt[i].W, pm[i].W)) mismatch = std::max(mismatch, 1.0);
        if (!bit_equal(pt[i].T, pm[i].T)) mismatch = std::max(mismatch, 1.0);
    }
    return mismatch;
}

double reduction_tnet_maml_instance(std::uint64_t seed)
{
    Network maml, tnet;
    maml.kind = ModelKind::Maml;
    tnet.kind = ModelKind::Tnet;
    maml.layer_sizes = tnet.layer_sizes = {1, 4, 4, 1};

    MetaConfig cfg;
    cfg.alpha = 0.01;
    cfg.beta = 1e-3;
    cfg.meta_batch = 2;
    cfg.seed = seed;

    Rng init_a(derive_seed(seed, "init", 0));
    Rng init_b(derive_seed(seed, "init", 0));
    ParamSet pa = init_params(maml, init_a);
    ParamSet pb = init_params(tnet, init_b);  // T = identity, frozen below
    AdamState aa = AdamState::init(pa);
    AdamState ab = AdamState::init(pb);

    const int iters = 8;
    double mismatch = 0.0;
    for (int it = 0; it < iters; ++it) {
        Rng task_rng(derive_seed(seed, "tasks", static_cast<std::uint64_t>(it)));
        std::vector<Task> batch;
        for (int j = 0; j < cfg.meta_batch; ++j)
            batch.push_back(sample_sinusoid_task(5, 5, task_rng));
        const std::uint64_t tape_seed = derive_seed(seed, "tape", static_cast<std::uint64_t>(it));
        const double la = meta_step(maml, pa, aa, cfg, batch, false, tape_seed);
        MetaStepHooks hooks;
        hooks.update_T = false;
        const double lb = meta_step(tnet, pb, ab, cfg, batch, false, tape_seed, hooks);
        if (la != lb) mismatch = std::max(mismatch, std::fabs(la - lb) + 1e-300);
    }
    for (size_t i = 0; i < pa.size(); ++i)
        if (!bit_equal(pa[i].W, pb[i].W)) mismatch = std::max(mismatch, 1.0);
    return mismatch;
}

}  // namespace

std::vector<PropertyResult> run_verification(const VerifyOptions& opts)
{
    std::vector<PropertyResult> out;
    const int n = opts.instances;

    out.push_back(run_property(opts, "gradcheck-ops", n, 1.0, gradcheck_ops_instance));
    out.push_back(run_property(opts, "gradcheck-second-order", n, 1e-8,
                               second_order_instance));
    out.push_back(run_property(opts, "tape-determinism", std::min(n, 20), 0.0,
                               determinism_instance));
    out.push_back(run_property(opts, "delta-y-norm-identity", n, 1e-10, [&](std::uint64_t s) {
        return delta_norm_instance(s, opts.inject_failure);
    }));
    out.push_back(run_property(opts, "tnet-update-closed-form", n, 1e-10, tnet_closed_form_instance));
    out.push_back(run_property(opts, "masked-update-closed-form", n, 1e-10, masked_unroll_instance));
    out.push_back(run_property(opts, "subspace-cell-reconstruction", n, 1e-8, [&](std::uint64_t s) {
        return subspace_reconstruction_instance(s, opts.max_size);
    }));
    out.push_back(run_property(opts, "update-span-recovery", std::min(n, 40), 1e-6,
                               [&](std::uint64_t s) {
                                   return update_span_instance(s, opts.max_size);
                               }));
    out.push_back(run_property(opts, "metric-steepest-direction", std::min(n, 40), 1e-6,
                               [&](std::uint64_t s) {
                                   return metric_direction_instance(s, opts.max_size);
                               }));
    out.push_back(run_property(opts, "metric-probe-optimality", std::min(n, 10), 1e-6,
                               [&](std::uint64_t s) {
                                   return metric_probe_instance(s, opts.max_size,
                                                               opts.probe_count);
                               }));
    out.push_back(run_property(opts, "metric-scale-invariance", std::min(n, 20), 1e-10,
                               [&](std::uint64_t s) {
                                   return metric_scale_instance(s, opts.max_size);
                               }));
    out.push_back(run_property(opts, "metagrad-fd-maml", std::min(n, 3), 1.0,
                               [](std::uint64_t s) {
                                   return metagrad_fd_instance(s, ModelKind::Maml);
                               }));
    out.push_back(run_property(opts, "metagrad-fd-tnet", std::min(n, 3), 1.0,
                               [](std::uint64_t s) {
                                   return metagrad_fd_instance(s, ModelKind::Tnet);
                               }));
    out.push_back(run_property(opts, "metagrad-fd-mtnet", std::min(n, 3), 1.0,
                               [](std::uint64_t s) {
                                   return metagrad_fd_instance(s, ModelKind::Mtnet);
                               }));
    out.push_back(run_property(opts, "reduction-mtnet-to-tnet", std::min(n, 3), 0.0,
                               reduction_mtnet_tnet_instance));
    out.push_back(run_property(opts, "reduction-tnet-to-maml", std::min(n, 3), 0.0,
                               reduction_tnet_maml_instance));
    return out;
}

bool all_passed(const std::vector<PropertyResult>& results)
{
    for (const PropertyResult& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace mtnet
