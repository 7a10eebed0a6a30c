#pragma once
// Deterministic randomness. All sampling in the engine goes through Rng so
// a seed fully pins every artifact; distribution transforms are hand-rolled
// because the std::*_distribution algorithms are implementation-defined.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sgqa {

// FNV-1a over raw bytes. Used for seed derivation and config hashing.
uint64_t fnv1a(std::string_view bytes, uint64_t basis = 1469598103934665603ull);

// Independent stream seed from a base seed and a tag.
uint64_t derive_seed(uint64_t base, std::string_view tag);

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1), identical across platforms.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform index in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(next_u64() % n);
    }

    // Standard normal via Box-Muller, spare value cached.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[uniform_index(items.size())];
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace sgqa
