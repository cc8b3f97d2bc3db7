#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtnet/rng.hpp"
#include "mtnet/tensor.hpp"

namespace mtnet {

enum class TaskKind { Sinusoid, Polynomial };

const char* task_kind_name(TaskKind k);

struct Example {
    double x = 0.0;
    double y = 0.0;
};

// One few-shot regression episode: noiseless samples of a single target
// function, with the generating parameters kept in `descriptor`.
struct Task {
    std::vector<Example> train;
    std::vector<Example> test;
    std::vector<double> descriptor;  // sinusoid: {A, w, b}; polynomial: {c0..cn}
    TaskKind kind = TaskKind::Sinusoid;
};

struct TaskDistribution {
    TaskKind kind = TaskKind::Sinusoid;
    int poly_order = 1;  // used when kind == Polynomial
    int k_train = 10;
    int k_test = 10;

    void validate() const;
};

// y(x) = A sin(w x + b), A ~ U[0.1, 5.0], w ~ U[0.8, 1.2], b ~ U[0, pi],
// x ~ U[-5, 5] i.i.d. for both sets.
Task sample_sinusoid_task(int k_train, int k_test, Rng& rng);

// y(x) = sum_i c_i x^i with c_i ~ U[-1, 1], x ~ U[-5, 5].
Task sample_polynomial_task(int order, int k_train, int k_test, Rng& rng);

Task sample_task(const TaskDistribution& dist, Rng& rng);

double task_target(const Task& task, double x);

// Stacks examples into network inputs/targets: X is in_dim x k (in_dim = 2
// with a constant-1 feature row when augment is set, else 1), Y is 1 x k.
std::pair<Tensor, Tensor> design_matrices(std::span<const Example> examples, bool augment);

// CSV dump: a descriptor header line, then split,x,y rows.
void write_tasks_csv(std::ostream& os, std::span<const Task> tasks);

}  // namespace mtnet
