#include "mtnet/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace mtnet {

const char* task_kind_name(TaskKind k)
{
    return k == TaskKind::Sinusoid ? "sinusoid" : "polynomial";
}

void TaskDistribution::validate() const
{
    if (k_train < 1 || k_test < 1)
        throw std::invalid_argument("TaskDistribution: k_train and k_test must be >= 1");
    if (kind == TaskKind::Polynomial && poly_order < 0)
        throw std::invalid_argument("TaskDistribution: polynomial order must be >= 0");
}

namespace {

double poly_eval(const std::vector<double>& coeffs, double x)
{
    double y = 0.0;
    for (size_t i = coeffs.size(); i-- > 0;) y = y * x + coeffs[i];
    return y;
}

std::vector<Example> draw_examples(int k, Rng& rng, const Task& task)
{
    std::vector<Example> out(static_cast<size_t>(k));
    for (auto& e : out) {
        e.x = rng.uniform(-5.0, 5.0);
        e.y = task_target(task, e.x);
    }
    return out;
}

}  // namespace

double task_target(const Task& task, double x)
{
    if (task.kind == TaskKind::Sinusoid) {
        const double a = task.descriptor[0], w = task.descriptor[1], b = task.descriptor[2];
        return a * std::sin(w * x + b);
    }
    return poly_eval(task.descriptor, x);
}

Task sample_sinusoid_task(int k_train, int k_test, Rng& rng)
{
    Task t;
    t.kind = TaskKind::Sinusoid;
    t.descriptor = {rng.uniform(0.1, 5.0), rng.uniform(0.8, 1.2),
                    rng.uniform(0.0, std::numbers::pi)};
    t.train = draw_examples(k_train, rng, t);
    t.test = draw_examples(k_test, rng, t);
    return t;
}

Task sample_polynomial_task(int order, int k_train, int k_test, Rng& rng)
{
    if (order < 0) throw std::invalid_argument("sample_polynomial_task: negative order");
    Task t;
    t.kind = TaskKind::Polynomial;
    t.descriptor.resize(static_cast<size_t>(order) + 1);
    for (auto& c : t.descriptor) c = rng.uniform(-1.0, 1.0);
    t.train = draw_examples(k_train, rng, t);
    t.test = draw_examples(k_test, rng, t);
    return t;
}

Task sample_task(const TaskDistribution& dist, Rng& rng)
{
    dist.validate();
    if (dist.kind == TaskKind::Sinusoid)
        return sample_sinusoid_task(dist.k_train, dist.k_test, rng);
    return sample_polynomial_task(dist.poly_order, dist.k_train, dist.k_test, rng);
}

std::pair<Tensor, Tensor> design_matrices(std::span<const Example> examples, bool augment)
{
    const int k = static_cast<int>(examples.size());
    Tensor x(augment ? 2 : 1, k);
    Tensor y(1, k);
    for (int j = 0; j < k; ++j) {
        x(0, j) = examples[static_cast<size_t>(j)].x;
        if (augment) x(1, j) = 1.0;
        y(0, j) = examples[static_cast<size_t>(j)].y;
    }
    return {std::move(x), std::move(y)};
}

void write_tasks_csv(std::ostream& os, std::span<const Task> tasks)
{
    char buf[128];
    for (size_t i = 0; i < tasks.size(); ++i) {
        const Task& t = tasks[i];
        os << "# task " << i << " " << task_kind_name(t.kind) << " descriptor";
        for (double d : t.descriptor) {
            std::snprintf(buf, sizeof(buf), " %.17g", d);
            os << buf;
        }
        os << "\n";
        if (i == 0) os << "task,split,x,y\n";
        auto emit = [&](const char* split, const std::vector<Example>& xs) {
            for (const Example& e : xs) {
                std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g", i, split, e.x, e.y);
                os << buf << "\n";
            }
        };
        emit("train", t.train);
        emit("test", t.test);
    }
}

}  // namespace mtnet
