#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "mtnet/tensor.hpp"

namespace mtnet {

// Seeded random stream with hand-rolled transforms so that draws are
// reproducible bit-for-bit for a fixed seed and call sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    // (0, 1), never exactly zero
    double uniform_open() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal();
    double gumbel();
    double truncated_normal(double stddev, double trunc = 2.0);

private:
    std::mt19937_64 gen_;
};

// Independent substream seed for (master, stream label, index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index);

Tensor truncated_normal_matrix(int rows, int cols, double stddev, Rng& rng);
Tensor gaussian_matrix(int rows, int cols, Rng& rng);

}  // namespace mtnet
