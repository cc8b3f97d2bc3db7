#include "mtnet/rng.hpp"

#include <cmath>
#include <numbers>

namespace mtnet {

double Rng::normal()
{
    // Box-Muller, one variate per call
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gumbel()
{
    const double u = uniform_open();
    return -std::log(-std::log(u));
}

double Rng::truncated_normal(double stddev, double trunc)
{
    for (;;) {
        const double z = normal();
        if (std::fabs(z) <= trunc) return stddev * z;
    }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index)
{
    return splitmix64(splitmix64(master ^ fnv1a64(stream)) ^ index);
}

Tensor truncated_normal_matrix(int rows, int cols, double stddev, Rng& rng)
{
    Tensor t(rows, cols);
    for (auto& v : t.data()) v = rng.truncated_normal(stddev);
    return t;
}

Tensor gaussian_matrix(int rows, int cols, Rng& rng)
{
    Tensor t(rows, cols);
    for (auto& v : t.data()) v = rng.normal();
    return t;
}

}  // namespace mtnet
