#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtnet/rng.hpp"
#include "mtnet/tape.hpp"
#include "mtnet/tensor.hpp"

namespace mtnet {

// Model menu. A cell computes y = T W x; the task-specific learner only ever
// touches W. Masked variants gate the W update row-wise (or per weight for
// the -full variants).
enum class ModelKind { Maml, Mnet, MnetFull, Tnet, Mtnet, MtnetFull };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

bool model_has_transform(ModelKind k);  // learned T
bool model_has_mask(ModelKind k);       // learned zeta / mask
bool model_mask_per_weight(ModelKind k);

// Structure only; parameter values live in ParamSet.
struct Network {
    ModelKind kind = ModelKind::Maml;
    std::vector<int> layer_sizes;  // {in, hidden..., out}

    int num_cells() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int cell_in(int i) const { return layer_sizes[static_cast<size_t>(i)]; }
    int cell_out(int i) const { return layer_sizes[static_cast<size_t>(i) + 1]; }
    bool has_transform() const { return model_has_transform(kind); }
    bool has_mask() const { return model_has_mask(kind); }
    bool mask_per_weight() const { return model_mask_per_weight(kind); }

    void validate() const;
};

// One cell's parameter triple. T is identity and zeta zero for model kinds
// that do not use them; they are stored anyway so checkpoints stay uniform.
struct CellTensors {
    Tensor W;
    Tensor T;
    Tensor zeta;  // n x 1 row-granular, n x m per-weight
};

using ParamSet = std::vector<CellTensors>;

// W ~ truncated normal (std 1e-2, cut at 2 std), T = identity, zeta = 0.
ParamSet init_params(const Network& net, Rng& rng);

struct CellVars {
    Var W;
    Var T;
    Var zeta;
};

std::vector<CellVars> param_leaves(Tape& tape, const Network& net, const ParamSet& params);

// T^L W^L relu( ... relu(T^1 W^1 x) ... ); no activation after the last cell.
Var forward(const Network& net, std::span<const CellVars> cells, Var x);

// Hard Bernoulli mask shaped like W: row j all-ones with probability
// sigmoid(zeta_j) (entrywise for per-weight zeta).
Tensor sample_mask_hard(const Tensor& zeta, bool per_weight, int cols, Rng& rng);

// Deterministic mask: on iff sigmoid(zeta) > 0.5.
Tensor threshold_mask(const Tensor& zeta, bool per_weight, int cols);

// Relaxed differentiable mask shaped like W, recorded on zeta's tape.
Var sample_mask_relaxed(Var zeta, bool per_weight, int cols, double temperature);

std::vector<Tensor> sample_masks_hard(const Network& net, const ParamSet& params, Rng& rng);
std::vector<Tensor> threshold_masks(const Network& net, const ParamSet& params);
std::vector<Var> sample_masks_relaxed(const Network& net, std::span<const CellVars> cells,
                                      double temperature);

// Checkpoint file: header meta lines, then one "tensor cell{i}.{W|T|zeta}"
// entry per parameter with 17-significant-digit values (exact round trip).
void save_checkpoint(const std::string& path, const Network& net, const ParamSet& params,
                     const std::map<std::string, std::string>& meta);

struct Checkpoint {
    Network net;
    ParamSet params;
    std::map<std::string, std::string> meta;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mtnet
