#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "presgan/errors.hpp"
#include "presgan/tensor.hpp"

namespace presgan {

// splitmix64 finalizer; used to fold (seed, path...) into one stream seed.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic random stream. All draws go through uniform() so results are
// identical across platforms (mt19937_64 output is fully specified by the
// standard; none of the distribution adapters from <random> are used).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    // Independent stream addressed by (seed, path). Streams for different
    // paths never share state, which keeps batched and resumed computations
    // byte-identical to their sequential counterparts.
    static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
        for (std::uint64_t p : path) h = mix64(h + 0x9e3779b97f4a7c15ULL * (p + 1));
        return RngStream(h);
    }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void normal_fill(Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal();
    }

    Tensor normal_tensor(std::vector<std::size_t> shape) {
        Tensor t(std::move(shape));
        normal_fill(t);
        return t;
    }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw config_error("rng: below(0)");
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    // Index draw from an (assumed normalized) probability vector.
    std::size_t categorical(const std::vector<double>& probs) {
        double u = uniform();
        double c = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            c += probs[k];
            if (u < c) return k;
        }
        return probs.empty() ? 0 : probs.size() - 1;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace presgan
