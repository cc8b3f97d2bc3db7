#include "mtnet/meta.hpp"

#include <cmath>
#include <stdexcept>

namespace mtnet {

const char* mask_eval_mode_name(MaskEvalMode m)
{
    switch (m) {
        case MaskEvalMode::Sample: return "sample";
        case MaskEvalMode::Threshold: return "threshold";
        case MaskEvalMode::Relaxed: return "relaxed";
    }
    return "?";
}

MaskEvalMode mask_eval_mode_from_name(const std::string& name)
{
    for (MaskEvalMode m : {MaskEvalMode::Sample, MaskEvalMode::Threshold, MaskEvalMode::Relaxed})
        if (name == mask_eval_mode_name(m)) return m;
    throw std::invalid_argument("unknown mask eval mode '" + name + "'");
}

void MetaConfig::validate() const
{
    if (!(alpha > 0.0) || !(beta > 0.0) || !(temperature > 0.0))
        throw std::invalid_argument("MetaConfig: alpha, beta and temperature must be positive");
    if (inner_steps_train < 1 || inner_steps_eval < 1 || meta_batch < 1)
        throw std::invalid_argument("MetaConfig: counts must be >= 1");
    if (iterations < 0) throw std::invalid_argument("MetaConfig: negative iteration count");
}

AdamState AdamState::init(const ParamSet& params)
{
    AdamState s;
    s.cells.reserve(params.size());
    for (const CellTensors& p : params) {
        CellMoments cm;
        cm.W = {Tensor(p.W.rows(), p.W.cols()), Tensor(p.W.rows(), p.W.cols())};
        cm.T = {Tensor(p.T.rows(), p.T.cols()), Tensor(p.T.rows(), p.T.cols())};
        cm.zeta = {Tensor(p.zeta.rows(), p.zeta.cols()), Tensor(p.zeta.rows(), p.zeta.cols())};
        s.cells.push_back(std::move(cm));
    }
    return s;
}

void adam_update(Tensor& param, AdamState::Moments& mom, const Tensor& grad, double lr,
                 long step_count)
{
    if (!param.same_shape(grad)) throw std::invalid_argument("adam_update: shape mismatch");
    const double b1 = AdamState::beta1, b2 = AdamState::beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
    for (size_t i = 0; i < param.data().size(); ++i) {
        const double g = grad.data()[i];
        double& m = mom.m.data()[i];
        double& v = mom.v.data()[i];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double mhat = m / corr1;
        const double vhat = v / corr2;
        param.data()[i] -= lr * mhat / (std::sqrt(vhat) + AdamState::eps);
    }
}

namespace {

// Shared inner loop: W <- W - alpha * (mask ?) grad_W(train MSE), `steps` times.
std::vector<CellVars> inner_update_impl(const Network& net, std::span<const CellVars> cells,
                                        Var x, Var y, double alpha, int steps,
                                        std::span<const Var> masks, bool create_graph)
{
    if (steps < 1) throw std::invalid_argument("inner update: steps must be >= 1");
    std::vector<CellVars> cur(cells.begin(), cells.end());
    for (int s = 0; s < steps; ++s) {
        Var pred = forward(net, cur, x);
        Var loss = mse_loss(pred, y);
        std::vector<Var> ws;
        ws.reserve(cur.size());
        for (const CellVars& c : cur) ws.push_back(c.W);
        std::vector<Var> grads = grad(loss, ws, create_graph);
        for (size_t i = 0; i < cur.size(); ++i) {
            Var step_dir = grads[i];
            if (!masks.empty()) step_dir = hadamard(masks[i], step_dir);
            cur[i].W = sub(cur[i].W, smul(step_dir, alpha));
        }
    }
    return cur;
}

}  // namespace

std::vector<CellVars> inner_update_maml(const Network& net, std::span<const CellVars> cells,
                                        Var x, Var y, double alpha, int steps, bool create_graph)
{
    if (net.has_transform() || net.has_mask())
        throw std::invalid_argument("inner_update_maml: model must be plain");
    return inner_update_impl(net, cells, x, y, alpha, steps, {}, create_graph);
}

std::vector<CellVars> inner_update_tnet(const Network& net, std::span<const CellVars> cells,
                                        Var x, Var y, double alpha, int steps, bool create_graph)
{
    if (!net.has_transform())
        throw std::invalid_argument("inner_update_tnet: model has no transform matrices");
    return inner_update_impl(net, cells, x, y, alpha, steps, {}, create_graph);
}

std::vector<CellVars> inner_update_mtnet(const Network& net, std::span<const CellVars> cells,
                                         Var x, Var y, double alpha, int steps,
                                         std::span<const Var> masks, bool create_graph)
{
    if (masks.size() != cells.size())
        throw std::invalid_argument("inner_update_mtnet: one mask per cell required");
    for (size_t i = 0; i < masks.size(); ++i)
        if (!masks[i].value().same_shape(cells[i].W.value()))
            throw std::invalid_argument("inner_update_mtnet: mask shape mismatch at cell " +
                                        std::to_string(i));
    return inner_update_impl(net, cells, x, y, alpha, steps, masks, create_graph);
}

namespace {

std::vector<CellVars> adapt_for_task(const Network& net, std::span<const CellVars> cells,
                                     Var x, Var y, double alpha, int steps,
                                     std::span<const Var> masks, bool create_graph)
{
    if (net.has_mask()) return inner_update_mtnet(net, cells, x, y, alpha, steps, masks,
                                                  create_graph);
    if (net.has_transform()) return inner_update_tnet(net, cells, x, y, alpha, steps,
                                                      create_graph);
    return inner_update_maml(net, cells, x, y, alpha, steps, create_graph);
}

struct MetaObjective {
    Var loss;
    std::vector<CellVars> leaves;
};

MetaObjective build_meta_objective(Tape& tape, const Network& net, const ParamSet& params,
                                   const MetaConfig& cfg, std::span<const Task> batch,
                                   bool augment, const MetaStepHooks& hooks)
{
    if (batch.empty())
        throw std::invalid_argument("meta objective: empty task batch");
    if (hooks.mask_override != nullptr && hooks.mask_override->size() != batch.size())
        throw std::invalid_argument("meta objective: mask override must cover the batch");
    std::vector<CellVars> leaves = param_leaves(tape, net, params);
    Var total;
    for (size_t t = 0; t < batch.size(); ++t) {
        const Task& task = batch[t];
        auto [xtr, ytr] = design_matrices(task.train, augment);
        auto [xte, yte] = design_matrices(task.test, augment);
        Var x_train = tape.constant(std::move(xtr));
        Var y_train = tape.constant(std::move(ytr));
        Var x_test = tape.constant(std::move(xte));
        Var y_test = tape.constant(std::move(yte));

        std::vector<Var> masks;
        if (net.has_mask()) {
            if (hooks.mask_override != nullptr) {
                for (const Tensor& m : (*hooks.mask_override)[t])
                    masks.push_back(tape.constant(m));
            } else {
                masks = sample_masks_relaxed(net, leaves, cfg.temperature);
            }
            if (hooks.detach_masks)
                for (Var& m : masks) m = detach(m);
        }

        std::vector<CellVars> adapted =
            adapt_for_task(net, leaves, x_train, y_train, cfg.alpha, cfg.inner_steps_train,
                           masks, /*create_graph=*/!cfg.first_order);
        Var task_loss = mse_loss(forward(net, adapted, x_test), y_test);
        total = total.valid() ? add(total, task_loss) : task_loss;  // sum, not mean
    }
    return {total, std::move(leaves)};
}

}  // namespace

MetaGrads meta_grads(const Network& net, const ParamSet& params, const MetaConfig& cfg,
                     std::span<const Task> batch, bool augment, std::uint64_t tape_seed,
                     const MetaStepHooks& hooks)
{
    cfg.validate();
    Tape tape(tape_seed);
    MetaObjective obj = build_meta_objective(tape, net, params, cfg, batch, augment, hooks);

    std::vector<Var> wrt;
    for (const CellVars& c : obj.leaves) {
        wrt.push_back(c.W);
        wrt.push_back(c.T);
        wrt.push_back(c.zeta);
    }
    std::vector<Var> gs = grad(obj.loss, wrt, /*create_graph=*/false);

    MetaGrads out;
    out.loss = obj.loss.value()(0, 0);
    out.g.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        out.g[i].W = gs[3 * i + 0].value();
        out.g[i].T = gs[3 * i + 1].value();
        out.g[i].zeta = gs[3 * i + 2].value();
    }
    return out;
}

double meta_loss_value(const Network& net, const ParamSet& params, const MetaConfig& cfg,
                       std::span<const Task> batch, bool augment, std::uint64_t tape_seed,
                       const MetaStepHooks& hooks)
{
    cfg.validate();
    Tape tape(tape_seed);
    MetaObjective obj = build_meta_objective(tape, net, params, cfg, batch, augment, hooks);
    return obj.loss.value()(0, 0);
}

double meta_step(const Network& net, ParamSet& params, AdamState& adam, const MetaConfig& cfg,
                 std::span<const Task> batch, bool augment, std::uint64_t tape_seed,
                 const MetaStepHooks& hooks)
{
    MetaGrads mg = meta_grads(net, params, cfg, batch, augment, tape_seed, hooks);
    if (!std::isfinite(mg.loss))
        throw std::runtime_error("meta_step: non-finite meta-loss");
    adam.step_count += 1;
    for (size_t i = 0; i < params.size(); ++i) {
        adam_update(params[i].W, adam.cells[i].W, mg.g[i].W, cfg.beta, adam.step_count);
        if (net.has_transform() && hooks.update_T)
            adam_update(params[i].T, adam.cells[i].T, mg.g[i].T, cfg.beta, adam.step_count);
        if (net.has_mask() && hooks.update_zeta)
            adam_update(params[i].zeta, adam.cells[i].zeta, mg.g[i].zeta, cfg.beta,
                        adam.step_count);
    }
    return mg.loss;
}

EvalResult evaluate(const Network& net, const ParamSet& params, const TaskDistribution& dist,
                    const MetaConfig& cfg, int n_tasks, bool augment)
{
    // evaluation accepts alpha = 0 (no adaptation, e.g. step-size sweeps)
    if (!(cfg.alpha >= 0.0)) throw std::invalid_argument("evaluate: alpha must be >= 0");
    if (cfg.inner_steps_eval < 1)
        throw std::invalid_argument("evaluate: inner_steps_eval must be >= 1");
    if (net.has_mask() && cfg.mask_eval_mode == MaskEvalMode::Relaxed &&
        !(cfg.temperature > 0.0))
        throw std::invalid_argument("evaluate: relaxed masks need a positive temperature");
    dist.validate();
    if (n_tasks < 2) throw std::invalid_argument("evaluate: n_tasks must be >= 2");

    std::vector<double> losses;
    losses.reserve(static_cast<size_t>(n_tasks));
    for (int t = 0; t < n_tasks; ++t) {
        Rng task_rng(derive_seed(cfg.seed, "eval-task", static_cast<std::uint64_t>(t)));
        const Task task = sample_task(dist, task_rng);

        Tape tape(derive_seed(cfg.seed, "eval-tape", static_cast<std::uint64_t>(t)));
        std::vector<CellVars> leaves = param_leaves(tape, net, params);
        auto [xtr, ytr] = design_matrices(task.train, augment);
        auto [xte, yte] = design_matrices(task.test, augment);
        Var x_train = tape.constant(std::move(xtr));
        Var y_train = tape.constant(std::move(ytr));
        Var x_test = tape.constant(std::move(xte));
        Var y_test = tape.constant(std::move(yte));

        std::vector<Var> masks;
        if (net.has_mask()) {
            switch (cfg.mask_eval_mode) {
                case MaskEvalMode::Sample: {
                    Rng mask_rng(derive_seed(cfg.seed, "eval-mask",
                                             static_cast<std::uint64_t>(t)));
                    for (const Tensor& m : sample_masks_hard(net, params, mask_rng))
                        masks.push_back(tape.constant(m));
                    break;
                }
                case MaskEvalMode::Threshold:
                    for (const Tensor& m : threshold_masks(net, params))
                        masks.push_back(tape.constant(m));
                    break;
                case MaskEvalMode::Relaxed:
                    masks = sample_masks_relaxed(net, leaves, cfg.temperature);
                    break;
            }
        }

        std::vector<CellVars> adapted =
            adapt_for_task(net, leaves, x_train, y_train, cfg.alpha, cfg.inner_steps_eval,
                           masks, /*create_graph=*/false);
        Var loss = mse_loss(forward(net, adapted, x_test), y_test);
        losses.push_back(loss.value()(0, 0));
    }

    EvalResult r;
    r.n_tasks = n_tasks;
    double sum = 0.0;
    for (double l : losses) sum += l;
    r.mean_loss = sum / n_tasks;
    double var = 0.0;
    for (double l : losses) var += (l - r.mean_loss) * (l - r.mean_loss);
    var /= (n_tasks - 1);
    r.ci95 = 1.96 * std::sqrt(var / n_tasks);
    return r;
}

}  // namespace mtnet
