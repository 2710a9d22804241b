#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace tailaug {

// Deterministic RNG. All distributions are hand-rolled on top of the raw
// 64-bit stream so results are identical across standard libraries; the
// std::<distribution> classes make no such guarantee.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {
        // splitmix warmup decorrelates small consecutive seeds
        for (int i = 0; i < 4; ++i) next();
    }

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // standard normal via Box-Muller; draws two uniforms every call so the
    // stream position does not depend on caller interleaving
    double normal() {
        double u1 = uniform01(), u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // integer in [0, n)
    uint64_t randint(uint64_t n) { return n ? next() % n : 0; }

    bool bernoulli(double p) { return uniform01() < p; }

    // index sampled proportionally to non-negative weights
    size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = uniform01() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[randint(items.size())];
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = randint(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    // independent child stream; same (seed, label) always gives the same child
    Rng fork(const std::string& label) const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : label) h = (h ^ c) * 0x100000001b3ULL;
        return Rng(state_ ^ h);
    }

private:
    uint64_t state_;
};

}  // namespace tailaug
