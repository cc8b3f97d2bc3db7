#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtnet/meta.hpp"
#include "mtnet/net.hpp"
#include "mtnet/tasks.hpp"

namespace mtnet {

inline constexpr const char* kVersion = "mtnet-0.1.0";

struct ExperimentConfig {
    ModelKind model = ModelKind::Mtnet;
    TaskDistribution dist;
    MetaConfig meta;
    std::vector<int> hidden = {40, 40};
    bool augment = true;  // append a constant-1 input feature
    int eval_tasks = 600;
    std::vector<int> eval_shots = {10};
    std::string output_dir = "runs/out";
    bool desk_scale = true;  // 10k iterations; full protocol is 70k
    int progress_interval = 100;

    void validate() const;
    Network make_network() const;
    // canonical sorted key=value text of every resolved field
    std::string canonical_text() const;
    std::string config_hash() const;  // fnv1a-64 hex of canonical_text
};

long desk_iterations();
long full_iterations();

struct TrainOutputs {
    std::string checkpoint_path;
    std::string training_csv_path;
    std::string config_path;
    double final_loss = 0.0;
};

// Meta-trains per the config; writes config.txt, training.csv and
// checkpoint.txt under output_dir. A non-finite meta-loss aborts, leaving
// partial outputs plus a FAILED marker file.
TrainOutputs cmd_train(const ExperimentConfig& cfg);

struct ResultRecord {
    std::string model;
    int shots = 0;
    double alpha = 0.0;
    double mean_loss = 0.0;
    double ci95 = 0.0;
    int n_tasks = 0;
    long iterations = 0;
    std::uint64_t seed = 0;
    std::string version;
    std::string config_hash;
    double wall_seconds = 0.0;  // reported on stdout, not in the CSV
};

struct EvalRequest {
    std::string checkpoint_path;
    std::vector<int> shots = {10};
    int n_tasks = 600;
    int k_test = 10;
    std::optional<double> alpha_override;
    std::uint64_t seed = 0;
    MaskEvalMode mask_eval_mode = MaskEvalMode::Sample;
    int inner_steps_eval = 1;
    std::string results_csv;  // appended; header written when absent
};

std::vector<ResultRecord> cmd_eval(const EvalRequest& req);

const char* results_csv_header();
std::string result_record_csv_row(const ResultRecord& r);

struct PolyComplexityOutputs {
    std::string fractions_csv_path;
    std::string fits_csv_path;
    // [order][layer] expected updated-weight fraction after training
    std::vector<std::vector<double>> fractions;
};

// Trains one model per polynomial order in {0, 1, 2} and dumps per-layer
// expected mask fractions plus plot-ready prediction grids.
PolyComplexityOutputs cmd_poly_complexity(const ExperimentConfig& base);

}  // namespace mtnet
