#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtnet/experiment.hpp"
#include "mtnet/verify.hpp"

namespace {

using nlohmann::json;

// exit codes: 0 ok, 1 usage, 2 numerical failure, 3 verification failure
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerification = 3;

void apply_output_dir_env(std::string& dir)
{
    if (const char* env = std::getenv("MTNET_OUTPUT_DIR"); env != nullptr && *env != '\0')
        dir = env;
}

struct TrainFlags {
    std::string model = "mtnet";
    std::string task = "sinusoid";
    int poly_order = 1;
    std::string preset = "desk";  // desk | full
    mtnet::ExperimentConfig cfg;
    bool iterations_given = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f)
{
    cmd->add_option("--model", f.model,
                    "maml | mnet | mnet_full | tnet | mtnet | mtnet_full");
    cmd->add_option("--task", f.task, "sinusoid | polynomial");
    cmd->add_option("--order", f.poly_order, "polynomial order");
    cmd->add_option("--alpha", f.cfg.meta.alpha, "task-specific step size");
    cmd->add_option("--beta", f.cfg.meta.beta, "meta learning rate");
    cmd->add_option("--temperature", f.cfg.meta.temperature, "relaxed-mask temperature");
    cmd->add_option("--inner-steps-train", f.cfg.meta.inner_steps_train);
    cmd->add_option("--inner-steps-eval", f.cfg.meta.inner_steps_eval);
    cmd->add_option("--meta-batch", f.cfg.meta.meta_batch);
    auto* iters = cmd->add_option("--iterations", f.cfg.meta.iterations,
                                  "meta-iterations (overrides the preset)");
    cmd->callback([&f, iters]() { f.iterations_given = iters->count() > 0; });
    cmd->add_option("--preset", f.preset, "desk (10k iterations) | full (70k)");
    cmd->add_option("--k-train", f.cfg.dist.k_train, "train examples per task");
    cmd->add_option("--k-test", f.cfg.dist.k_test, "test examples per task");
    cmd->add_option("--hidden", f.cfg.hidden, "hidden layer sizes")->delimiter(',');
    cmd->add_flag("--no-augment", [&f](std::int64_t) { f.cfg.augment = false; },
                  "drop the constant-1 input feature");
    cmd->add_option("--first-order", f.cfg.meta.first_order,
                    "detach inner gradients (ablation)");
    cmd->add_option("--seed", f.cfg.meta.seed);
    cmd->add_option("--progress-interval", f.cfg.progress_interval);
    cmd->add_option("--output-dir", f.cfg.output_dir);
}

mtnet::ExperimentConfig resolve_train_config(TrainFlags& f)
{
    f.cfg.model = mtnet::model_kind_from_name(f.model);
    if (f.task == "sinusoid") f.cfg.dist.kind = mtnet::TaskKind::Sinusoid;
    else if (f.task == "polynomial") f.cfg.dist.kind = mtnet::TaskKind::Polynomial;
    else throw std::invalid_argument("--task: unknown task '" + f.task + "'");
    f.cfg.dist.poly_order = f.poly_order;
    if (f.preset != "desk" && f.preset != "full")
        throw std::invalid_argument("--preset: expected 'desk' or 'full'");
    f.cfg.desk_scale = f.preset == "desk";
    if (!f.iterations_given)
        f.cfg.meta.iterations = f.cfg.desk_scale ? mtnet::desk_iterations()
                                                 : mtnet::full_iterations();
    apply_output_dir_env(f.cfg.output_dir);
    return f.cfg;
}

int run_train(TrainFlags& f)
{
    mtnet::ExperimentConfig cfg = resolve_train_config(f);
    std::cout << "# resolved config (hash " << cfg.config_hash() << ")\n"
              << cfg.canonical_text();
    mtnet::TrainOutputs out = mtnet::cmd_train(cfg);
    std::cout << "checkpoint: " << out.checkpoint_path << "\n"
              << "training csv: " << out.training_csv_path << "\n"
              << "final meta-loss: " << out.final_loss << "\n";
    return kExitOk;
}

json property_to_json(const mtnet::PropertyResult& r)
{
    return json{{"name", r.name},
                {"instances", r.instances},
                {"max_residual", r.max_residual},
                {"tolerance", r.tolerance},
                {"pass", r.pass},
                {"seed", r.worst_seed}};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"meta-learning with learned layerwise metrics (T-net) and update "
                 "subspaces (MT-net): training, evaluation and verification harness"};
    app.require_subcommand(1);

    // ---- train ----
    TrainFlags train_flags;
    CLI::App* train = app.add_subcommand("train", "meta-train a model");
    add_train_flags(train, train_flags);

    // ---- eval ----
    mtnet::EvalRequest eval_req;
    std::string eval_mask_mode = "sample";
    double alpha_override = -1.0;
    bool alpha_override_given = false;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", eval_req.checkpoint_path)->required();
    eval->add_option("--shots", eval_req.shots, "train-set sizes to evaluate")
        ->delimiter(',');
    eval->add_option("--n-tasks", eval_req.n_tasks);
    eval->add_option("--k-test", eval_req.k_test);
    auto* ao = eval->add_option("--alpha-override", alpha_override,
                                "override the adaptation step size (0 = no adaptation)");
    eval->add_option("--seed", eval_req.seed);
    eval->add_option("--mask-eval-mode", eval_mask_mode, "sample | threshold | relaxed");
    eval->add_option("--inner-steps-eval", eval_req.inner_steps_eval);
    eval->add_option("--results-csv", eval_req.results_csv, "append records here");
    eval->callback([&]() { alpha_override_given = ao->count() > 0; });

    // ---- sweep-alpha ----
    mtnet::EvalRequest sweep_req;
    std::string sweep_mask_mode = "sample";
    CLI::App* sweep = app.add_subcommand(
        "sweep-alpha", "evaluate a checkpoint across step sizes 1e-4 .. 10");
    sweep->add_option("--checkpoint", sweep_req.checkpoint_path)->required();
    sweep->add_option("--shots", sweep_req.shots)->delimiter(',');
    sweep->add_option("--n-tasks", sweep_req.n_tasks);
    sweep->add_option("--k-test", sweep_req.k_test);
    sweep->add_option("--seed", sweep_req.seed);
    sweep->add_option("--mask-eval-mode", sweep_mask_mode);
    sweep->add_option("--inner-steps-eval", sweep_req.inner_steps_eval);
    sweep->add_option("--results-csv", sweep_req.results_csv);

    // ---- poly-complexity ----
    TrainFlags poly_flags;
    poly_flags.model = "mtnet";
    poly_flags.task = "polynomial";
    CLI::App* poly = app.add_subcommand(
        "poly-complexity",
        "train over polynomial orders 0..2 and dump per-layer update fractions");
    add_train_flags(poly, poly_flags);

    // ---- verify ----
    mtnet::VerifyOptions vopts;
    std::string verify_out;
    std::uint64_t replay_seed = 0;
    bool replay_given = false;
    CLI::App* verify = app.add_subcommand("verify", "run the numerical property suite");
    verify->add_option("--instances", vopts.instances);
    verify->add_option("--max-size", vopts.max_size);
    verify->add_option("--probes", vopts.probe_count);
    verify->add_option("--seed", vopts.seed);
    auto* rs = verify->add_option("--replay-seed", replay_seed,
                                  "re-run each property once with this instance seed");
    verify->add_flag("--inject-failure", vopts.inject_failure,
                     "self-test: perturb one identity so the suite must fail");
    verify->add_option("--report", verify_out, "write the JSON-lines report here too");
    verify->callback([&]() { replay_given = rs->count() > 0; });

    // ---- dump-tasks ----
    std::string dump_task = "sinusoid";
    int dump_order = 1;
    int dump_count = 5;
    int dump_k_train = 10, dump_k_test = 10;
    std::uint64_t dump_seed = 0;
    std::string dump_out;
    CLI::App* dump = app.add_subcommand("dump-tasks", "sample tasks and print them as CSV");
    dump->add_option("--task", dump_task);
    dump->add_option("--order", dump_order);
    dump->add_option("--count", dump_count);
    dump->add_option("--k-train", dump_k_train);
    dump->add_option("--k-test", dump_k_test);
    dump->add_option("--seed", dump_seed);
    dump->add_option("--out", dump_out, "write here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return run_train(train_flags);

        if (eval->parsed()) {
            if (alpha_override_given) eval_req.alpha_override = alpha_override;
            eval_req.mask_eval_mode = mtnet::mask_eval_mode_from_name(eval_mask_mode);
            for (const mtnet::ResultRecord& r : mtnet::cmd_eval(eval_req))
                std::cout << mtnet::result_record_csv_row(r) << "  (wall "
                          << r.wall_seconds << "s)\n";
            return kExitOk;
        }

        if (sweep->parsed()) {
            sweep_req.mask_eval_mode = mtnet::mask_eval_mode_from_name(sweep_mask_mode);
            for (double a : {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
                mtnet::EvalRequest r = sweep_req;
                r.alpha_override = a;
                for (const mtnet::ResultRecord& rec : mtnet::cmd_eval(r))
                    std::cout << mtnet::result_record_csv_row(rec) << "\n";
            }
            return kExitOk;
        }

        if (poly->parsed()) {
            mtnet::ExperimentConfig cfg = resolve_train_config(poly_flags);
            mtnet::PolyComplexityOutputs out = mtnet::cmd_poly_complexity(cfg);
            std::cout << "fractions csv: " << out.fractions_csv_path << "\n"
                      << "fit dump: " << out.fits_csv_path << "\n";
            return kExitOk;
        }

        if (verify->parsed()) {
            if (replay_given) vopts.replay_seed = replay_seed;
            std::vector<mtnet::PropertyResult> results = mtnet::run_verification(vopts);
            std::ofstream file;
            if (!verify_out.empty()) file.open(verify_out);
            for (const mtnet::PropertyResult& r : results) {
                const std::string line = property_to_json(r).dump();
                std::cout << line << "\n";
                if (file.is_open()) file << line << "\n";
            }
            return mtnet::all_passed(results) ? kExitOk : kExitVerification;
        }

        if (dump->parsed()) {
            mtnet::TaskDistribution dist;
            dist.kind = dump_task == "polynomial" ? mtnet::TaskKind::Polynomial
                                                  : mtnet::TaskKind::Sinusoid;
            dist.poly_order = dump_order;
            dist.k_train = dump_k_train;
            dist.k_test = dump_k_test;
            std::vector<mtnet::Task> tasks;
            for (int i = 0; i < dump_count; ++i) {
                mtnet::Rng rng(mtnet::derive_seed(dump_seed, "dump-tasks",
                                                  static_cast<std::uint64_t>(i)));
                tasks.push_back(mtnet::sample_task(dist, rng));
            }
            if (dump_out.empty()) {
                mtnet::write_tasks_csv(std::cout, tasks);
            } else {
                std::ofstream os(dump_out);
                mtnet::write_tasks_csv(os, tasks);
            }
            return kExitOk;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
