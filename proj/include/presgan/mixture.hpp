#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "presgan/rng.hpp"
#include "presgan/tensor.hpp"

namespace presgan {

// Ring-of-Gaussians target: K isotropic components of the given standard
// deviation, centers equally spaced on a circle, mixed by `proportions`.
struct MixtureSpec {
    std::size_t K = 10;
    double radius = 3.0;
    double component_std = 0.05;
    std::vector<double> proportions;
    std::uint64_t seed = 0;

    void validate() const {
        if (K == 0) throw config_error("mixture: K must be >= 1");
        if (!(component_std > 0.0)) throw config_error("mixture: component_std must be > 0");
        if (proportions.size() != K)
            throw config_error("mixture: expected " + std::to_string(K) + " proportions");
        double sum = 0.0;
        for (double p : proportions) {
            if (p < 0.0) throw config_error("mixture: negative proportion");
            sum += p;
        }
        if (std::abs(sum - 1.0) >= 1e-9) throw config_error("mixture: proportions must sum to 1");
    }

    static std::vector<double> uniform_proportions(std::size_t K) {
        return std::vector<double>(K, 1.0 / static_cast<double>(K));
    }
};

struct Dataset {
    Tensor points;            // N x 2
    std::vector<int> labels;  // component of origin
    MixtureSpec spec;
};

// Row k = (r cos(2 pi k / K), r sin(2 pi k / K)).
inline Tensor ring_centers(std::size_t K, double r) {
    if (K == 0) throw config_error("ring centers: K must be >= 1");
    Tensor centers = Tensor::matrix(K, 2);
    for (std::size_t k = 0; k < K; ++k) {
        double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(k) / static_cast<double>(K);
        centers(k, 0) = r * std::cos(angle);
        centers(k, 1) = r * std::sin(angle);
    }
    return centers;
}

inline Dataset sample_mixture(const MixtureSpec& spec, std::size_t n, RngStream& rng) {
    spec.validate();
    if (n == 0) throw config_error("sample mixture: need n >= 1");
    Tensor centers = ring_centers(spec.K, spec.radius);
    Dataset out;
    out.spec = spec;
    out.points = Tensor::matrix(n, 2);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = rng.categorical(spec.proportions);
        out.labels[i] = static_cast<int>(k);
        out.points(i, 0) = centers(k, 0) + spec.component_std * rng.normal();
        out.points(i, 1) = centers(k, 1) + spec.component_std * rng.normal();
    }
    return out;
}

// Imbalance ladder: level 1 is the balanced mixture; at level L the first
// L-1 classes get weight 1e-3 and the remaining classes share the rest
// equally (renormalized).
inline std::vector<double> imbalanced_proportions(int level, std::size_t K = 10) {
    if (level < 1 || static_cast<std::size_t>(level) > K)
        throw config_error("imbalanced proportions: level must lie in [1, K]");
    std::vector<double> p(K);
    std::size_t minority = static_cast<std::size_t>(level - 1);
    double rest = (1.0 - 1e-3 * static_cast<double>(minority)) / static_cast<double>(K - minority);
    for (std::size_t k = 0; k < K; ++k) p[k] = k < minority ? 1e-3 : rest;
    return p;
}

}  // namespace presgan
