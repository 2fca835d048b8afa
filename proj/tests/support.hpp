#pragma once

#include <cstdint>
#include <filesystem>
#include <cmath>
#include <random>

namespace hsps::test {

inline std::filesystem::path data_dir() { return HSPS_DATA_DIR; }
inline std::filesystem::path materials_dir() { return data_dir() / "materials"; }

// Small wrapper for property tests; every test picks its own fixed seed.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// Binomial standard error of a probability estimated from n trials.
inline double binomial_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace hsps::test
