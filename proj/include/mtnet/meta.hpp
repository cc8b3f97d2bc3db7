#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtnet/net.hpp"
#include "mtnet/tasks.hpp"

namespace mtnet {

enum class MaskEvalMode { Sample, Threshold, Relaxed };

const char* mask_eval_mode_name(MaskEvalMode m);
MaskEvalMode mask_eval_mode_from_name(const std::string& name);

struct MetaConfig {
    double alpha = 1e-2;       // task-specific step size
    double beta = 1e-3;        // meta learning rate (Adam)
    double temperature = 1.0;  // relaxed-mask temperature
    int inner_steps_train = 1;
    int inner_steps_eval = 1;
    int meta_batch = 4;
    long iterations = 10000;
    MaskEvalMode mask_eval_mode = MaskEvalMode::Sample;
    bool first_order = false;  // ablation: detach inner gradients
    std::uint64_t seed = 0;

    void validate() const;
};

// Adam with conventional beta1/beta2/eps; only the learning rate is a
// training hyperparameter.
struct AdamState {
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    struct Moments {
        Tensor m;
        Tensor v;
    };
    struct CellMoments {
        Moments W, T, zeta;
    };

    long step_count = 0;
    std::vector<CellMoments> cells;

    static AdamState init(const ParamSet& params);
};

void adam_update(Tensor& param, AdamState::Moments& mom, const Tensor& grad, double lr,
                 long step_count);

// One task adaptation: `steps` sequential full-batch gradient steps on the
// train-set MSE, updating only W. Recorded differentiably when create_graph
// is set, so the meta-gradient can flow through the update.
std::vector<CellVars> inner_update_maml(const Network& net, std::span<const CellVars> cells,
                                        Var x, Var y, double alpha, int steps,
                                        bool create_graph);
std::vector<CellVars> inner_update_tnet(const Network& net, std::span<const CellVars> cells,
                                        Var x, Var y, double alpha, int steps,
                                        bool create_graph);
std::vector<CellVars> inner_update_mtnet(const Network& net, std::span<const CellVars> cells,
                                         Var x, Var y, double alpha, int steps,
                                         std::span<const Var> masks, bool create_graph);

// Test hooks for reduction-chain and gradient-path checks; defaults leave
// the training procedure unchanged.
struct MetaStepHooks {
    bool update_T = true;
    bool update_zeta = true;
    bool detach_masks = false;
    const std::vector<std::vector<Tensor>>* mask_override = nullptr;  // [task][cell]
};

struct MetaGrads {
    double loss = 0.0;            // summed post-adaptation test loss over the batch
    std::vector<CellTensors> g;   // gradient per parameter tensor
};

// Builds the meta objective on a fresh tape seeded with tape_seed and returns
// its value and gradients; does not modify params.
MetaGrads meta_grads(const Network& net, const ParamSet& params, const MetaConfig& cfg,
                     std::span<const Task> batch, bool augment, std::uint64_t tape_seed,
                     const MetaStepHooks& hooks = {});

// Meta objective value only (same tape seed => same Gumbel draws).
double meta_loss_value(const Network& net, const ParamSet& params, const MetaConfig& cfg,
                       std::span<const Task> batch, bool augment, std::uint64_t tape_seed,
                       const MetaStepHooks& hooks = {});

// One meta-iteration: meta_grads followed by an Adam step on W (and T, zeta
// where the model has them). Returns the summed meta-loss.
double meta_step(const Network& net, ParamSet& params, AdamState& adam, const MetaConfig& cfg,
                 std::span<const Task> batch, bool augment, std::uint64_t tape_seed,
                 const MetaStepHooks& hooks = {});

struct EvalResult {
    double mean_loss = 0.0;
    double ci95 = 0.0;
    int n_tasks = 0;
};

// Samples n_tasks episodes (seeded from cfg.seed), adapts with
// inner_steps_eval non-differentiable steps per task, and reports the mean
// test MSE with a 95% confidence interval. Masked models draw an evaluation
// mask per task according to cfg.mask_eval_mode.
EvalResult evaluate(const Network& net, const ParamSet& params, const TaskDistribution& dist,
                    const MetaConfig& cfg, int n_tasks, bool augment);

}  // namespace mtnet
