#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtnet/tensor.hpp"

namespace mtnet {

struct VerifyOptions {
    int instances = 100;     // randomized instances per property
    int max_size = 16;       // upper bound on matrix side
    int probe_count = 10000; // steepest-descent probe draws
    std::uint64_t seed = 20260801;
    std::optional<std::uint64_t> replay_seed;  // run one instance with exactly this seed
    bool inject_failure = false;  // harness self-test: perturb one residual
};

struct PropertyResult {
    std::string name;
    int instances = 0;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::uint64_t worst_seed = 0;  // instance seed reproducing max_residual
};

// Closed-form identities, proposition constructions, autodiff gradient
// checks, meta-gradient FD agreement, reduction chain, determinism.
std::vector<PropertyResult> run_verification(const VerifyOptions& opts);

bool all_passed(const std::vector<PropertyResult>& results);

}  // namespace mtnet
