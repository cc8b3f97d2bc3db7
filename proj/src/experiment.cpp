#include "mtnet/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mtnet/analysis.hpp"

namespace mtnet {

namespace {

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits)
{
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::uint64_t fnv1a64_text(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double wall_since(const std::chrono::steady_clock::time_point& start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

long desk_iterations() { return 10000; }
long full_iterations() { return 70000; }

void ExperimentConfig::validate() const
{
    meta.validate();
    dist.validate();
    if (hidden.empty()) throw std::invalid_argument("ExperimentConfig: no hidden layers");
    for (int h : hidden)
        if (h <= 0) throw std::invalid_argument("ExperimentConfig: zero-sized layer");
    if (eval_shots.empty()) throw std::invalid_argument("ExperimentConfig: eval_shots empty");
    if (eval_tasks < 2) throw std::invalid_argument("ExperimentConfig: eval_tasks must be >= 2");
    if (progress_interval < 1)
        throw std::invalid_argument("ExperimentConfig: progress_interval must be >= 1");
}

Network ExperimentConfig::make_network() const
{
    Network net;
    net.kind = model;
    net.layer_sizes.push_back(augment ? 2 : 1);
    for (int h : hidden) net.layer_sizes.push_back(h);
    net.layer_sizes.push_back(1);
    return net;
}

std::string ExperimentConfig::canonical_text() const
{
    std::ostringstream os;
    os << "alpha=" << fmt(meta.alpha) << "\n";
    os << "augment=" << (augment ? 1 : 0) << "\n";
    os << "beta=" << fmt(meta.beta) << "\n";
    os << "desk_scale=" << (desk_scale ? 1 : 0) << "\n";
    os << "eval_shots=";
    for (size_t i = 0; i < eval_shots.size(); ++i)
        os << (i ? "," : "") << eval_shots[i];
    os << "\n";
    os << "eval_tasks=" << eval_tasks << "\n";
    os << "first_order=" << (meta.first_order ? 1 : 0) << "\n";
    os << "hidden=";
    for (size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
    os << "\n";
    os << "inner_steps_eval=" << meta.inner_steps_eval << "\n";
    os << "inner_steps_train=" << meta.inner_steps_train << "\n";
    os << "iterations=" << meta.iterations << "\n";
    os << "k_test=" << dist.k_test << "\n";
    os << "k_train=" << dist.k_train << "\n";
    os << "mask_eval_mode=" << mask_eval_mode_name(meta.mask_eval_mode) << "\n";
    os << "meta_batch=" << meta.meta_batch << "\n";
    os << "model=" << model_kind_name(model) << "\n";
    os << "poly_order=" << dist.poly_order << "\n";
    os << "progress_interval=" << progress_interval << "\n";
    os << "seed=" << meta.seed << "\n";
    os << "task=" << task_kind_name(dist.kind) << "\n";
    os << "temperature=" << fmt(meta.temperature) << "\n";
    return os.str();
}

std::string ExperimentConfig::config_hash() const
{
    return hex64(fnv1a64_text(canonical_text()));
}

TrainOutputs cmd_train(const ExperimentConfig& cfg)
{
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const std::string hash = cfg.config_hash();

    TrainOutputs out;
    out.config_path = cfg.output_dir + "/config.txt";
    out.training_csv_path = cfg.output_dir + "/training.csv";
    out.checkpoint_path = cfg.output_dir + "/checkpoint.txt";

    {
        std::ofstream cf(out.config_path);
        cf << "# config_hash=" << hash << "\n" << cfg.canonical_text();
    }

    Network net = cfg.make_network();
    Rng init_rng(derive_seed(cfg.meta.seed, "init", 0));
    ParamSet params = init_params(net, init_rng);
    AdamState adam = AdamState::init(params);

    std::ofstream csv(out.training_csv_path);
    csv << "# config_hash=" << hash << "\n";
    csv << "iteration,meta_loss,wall_seconds";
    for (int c = 0; c < net.num_cells(); ++c) csv << ",mask_frac_cell" << c;
    csv << "\n";

    const auto started = std::chrono::steady_clock::now();
    auto emit_progress = [&](long iter, double loss) {
        csv << iter << "," << fmt(loss) << "," << fmt_fixed(wall_since(started), 3);
        for (double f : expected_mask_fraction(net, params)) csv << "," << fmt(f);
        csv << "\n";
    };

    double loss = std::numeric_limits<double>::quiet_NaN();
    try {
        for (long iter = 0; iter < cfg.meta.iterations; ++iter) {
            Rng task_rng(derive_seed(cfg.meta.seed, "train-tasks",
                                     static_cast<std::uint64_t>(iter)));
            std::vector<Task> batch;
            batch.reserve(static_cast<size_t>(cfg.meta.meta_batch));
            for (int j = 0; j < cfg.meta.meta_batch; ++j)
                batch.push_back(sample_task(cfg.dist, task_rng));
            const std::uint64_t tape_seed =
                derive_seed(cfg.meta.seed, "train-tape", static_cast<std::uint64_t>(iter));
            loss = meta_step(net, params, adam, cfg.meta, batch, cfg.augment, tape_seed);
            if ((iter + 1) % cfg.progress_interval == 0 || iter + 1 == cfg.meta.iterations)
                emit_progress(iter + 1, loss);
        }
    } catch (const std::runtime_error& e) {
        csv.flush();
        std::ofstream failed(cfg.output_dir + "/FAILED");
        failed << e.what() << "\n";
        save_checkpoint(out.checkpoint_path, net, params,
                        {{"config_hash", hash}, {"status", "failed"}});
        throw;
    }

    std::map<std::string, std::string> meta;
    meta["config_hash"] = hash;
    meta["alpha"] = fmt(cfg.meta.alpha);
    meta["temperature"] = fmt(cfg.meta.temperature);
    meta["iterations"] = std::to_string(cfg.meta.iterations);
    meta["seed"] = std::to_string(cfg.meta.seed);
    meta["augment"] = cfg.augment ? "1" : "0";
    meta["task"] = task_kind_name(cfg.dist.kind);
    meta["poly_order"] = std::to_string(cfg.dist.poly_order);
    meta["k_test"] = std::to_string(cfg.dist.k_test);
    save_checkpoint(out.checkpoint_path, net, params, meta);
    out.final_loss = cfg.meta.iterations > 0 ? loss : 0.0;
    return out;
}

const char* results_csv_header()
{
    return "model,shots,alpha,mean_loss,ci95,n_tasks,iterations,seed,version,config_hash";
}

std::string result_record_csv_row(const ResultRecord& r)
{
    std::ostringstream os;
    os << r.model << "," << r.shots << "," << fmt(r.alpha) << "," << fmt(r.mean_loss) << ","
       << fmt(r.ci95) << "," << r.n_tasks << "," << r.iterations << "," << r.seed << ","
       << r.version << "," << r.config_hash;
    return os.str();
}

std::vector<ResultRecord> cmd_eval(const EvalRequest& req)
{
    Checkpoint ck = load_checkpoint(req.checkpoint_path);
    const auto meta_get = [&](const char* key, const std::string& fallback) {
        auto it = ck.meta.find(key);
        return it == ck.meta.end() ? fallback : it->second;
    };

    MetaConfig cfg;
    cfg.alpha = req.alpha_override ? *req.alpha_override
                                   : std::stod(meta_get("alpha", "0.01"));
    cfg.temperature = std::stod(meta_get("temperature", "1"));
    cfg.inner_steps_eval = req.inner_steps_eval;
    cfg.mask_eval_mode = req.mask_eval_mode;
    cfg.seed = req.seed;
    const bool augment = meta_get("augment", "1") == "1";

    TaskDistribution dist;
    dist.kind = meta_get("task", "sinusoid") == "sinusoid" ? TaskKind::Sinusoid
                                                           : TaskKind::Polynomial;
    dist.poly_order = std::stoi(meta_get("poly_order", "1"));
    dist.k_test = req.k_test;

    std::vector<ResultRecord> records;
    const auto started = std::chrono::steady_clock::now();
    for (int shots : req.shots) {
        dist.k_train = shots;
        EvalResult er = evaluate(ck.net, ck.params, dist, cfg, req.n_tasks, augment);

        ResultRecord r;
        r.model = model_kind_name(ck.net.kind);
        r.shots = shots;
        r.alpha = req.alpha_override ? *req.alpha_override : cfg.alpha;
        r.mean_loss = er.mean_loss;
        r.ci95 = er.ci95;
        r.n_tasks = er.n_tasks;
        r.iterations = std::stol(meta_get("iterations", "0"));
        r.seed = req.seed;
        r.version = kVersion;
        r.config_hash = meta_get("config_hash", "");
        r.wall_seconds = wall_since(started);
        records.push_back(r);
    }

    if (!req.results_csv.empty()) {
        namespace fs = std::filesystem;
        const bool fresh = !fs::exists(req.results_csv);
        std::ofstream os(req.results_csv, std::ios::app);
        if (fresh) os << results_csv_header() << "\n";
        for (const ResultRecord& r : records) os << result_record_csv_row(r) << "\n";
    }
    return records;
}

PolyComplexityOutputs cmd_poly_complexity(const ExperimentConfig& base)
{
    if (base.dist.kind != TaskKind::Polynomial)
        throw std::invalid_argument("cmd_poly_complexity: task must be polynomial");
    namespace fs = std::filesystem;
    fs::create_directories(base.output_dir);

    PolyComplexityOutputs out;
    out.fractions_csv_path = base.output_dir + "/fractions.csv";
    out.fits_csv_path = base.output_dir + "/fits.csv";

    std::ofstream fracs(out.fractions_csv_path);
    std::ofstream fits(out.fits_csv_path);

    for (int order = 0; order <= 2; ++order) {
        ExperimentConfig cfg = base;
        cfg.dist.poly_order = order;
        cfg.output_dir = base.output_dir + "/order" + std::to_string(order);
        if (order == 0) {
            fracs << "# config_hash=" << cfg.config_hash() << "\n";
            fracs << "order,layer,expected_update_fraction\n";
            fits << "# config_hash=" << cfg.config_hash() << "\n";
            fits << "order,x,true_y,pre_adaptation,post_adaptation\n";
        }
        TrainOutputs tr = cmd_train(cfg);
        Checkpoint ck = load_checkpoint(tr.checkpoint_path);

        std::vector<double> fr = expected_mask_fraction(ck.net, ck.params);
        out.fractions.push_back(fr);
        for (size_t layer = 0; layer < fr.size(); ++layer)
            fracs << order << "," << layer << "," << fmt(fr[layer]) << "\n";

        // qualitative fit dump: one sampled task, predictions on a fixed grid
        Rng task_rng(derive_seed(cfg.meta.seed, "fit-task", static_cast<std::uint64_t>(order)));
        Task task = sample_task(cfg.dist, task_rng);

        auto predict = [&](const ParamSet& params, double x) {
            Tape tape(0);
            std::vector<CellVars> leaves = param_leaves(tape, ck.net, params);
            Tensor input(cfg.augment ? 2 : 1, 1);
            input(0, 0) = x;
            if (cfg.augment) input(1, 0) = 1.0;
            return forward(ck.net, leaves, tape.constant(input)).value()(0, 0);
        };

        // adapt once on the dumped task (threshold mask keeps this deterministic)
        ParamSet adapted = ck.params;
        {
            Tape tape(derive_seed(cfg.meta.seed, "fit-adapt", static_cast<std::uint64_t>(order)));
            std::vector<CellVars> leaves = param_leaves(tape, ck.net, ck.params);
            auto [xtr, ytr] = design_matrices(task.train, cfg.augment);
            Var x_train = tape.constant(std::move(xtr));
            Var y_train = tape.constant(std::move(ytr));
            std::vector<Var> masks;
            if (ck.net.has_mask())
                for (const Tensor& m : threshold_masks(ck.net, ck.params))
                    masks.push_back(tape.constant(m));
            std::vector<CellVars> ad =
                ck.net.has_mask()
                    ? inner_update_mtnet(ck.net, leaves, x_train, y_train, cfg.meta.alpha,
                                         cfg.meta.inner_steps_eval, masks, false)
                    : (ck.net.has_transform()
                           ? inner_update_tnet(ck.net, leaves, x_train, y_train, cfg.meta.alpha,
                                               cfg.meta.inner_steps_eval, false)
                           : inner_update_maml(ck.net, leaves, x_train, y_train, cfg.meta.alpha,
                                               cfg.meta.inner_steps_eval, false));
            for (size_t i = 0; i < adapted.size(); ++i) adapted[i].W = ad[i].W.value();
        }
        for (int gi = 0; gi <= 100; ++gi) {
            const double x = -5.0 + 0.1 * gi;
            fits << order << "," << fmt(x) << "," << fmt(task_target(task, x)) << ","
                 << fmt(predict(ck.params, x)) << "," << fmt(predict(adapted, x)) << "\n";
        }
    }
    return out;
}

}  // namespace mtnet
