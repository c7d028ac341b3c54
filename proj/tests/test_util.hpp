#pragma once

#include <cmath>
#include <random>

#include "plasthin/tensor.hpp"
#include "plasthin/tensor_kinematics.hpp"

namespace plasthin::test {

inline Sym3 random_sym(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    return {nd(rng), nd(rng), nd(rng), nd(rng), nd(rng), nd(rng)};
}

inline Sym3 random_dev(std::mt19937_64& rng, double scale = 1.0) { return dev(random_sym(rng, scale)); }

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    return {nd(rng), nd(rng), nd(rng)};
}

inline double max_abs_diff(const Sym3& a, const Sym3& b) {
    double m = 0.0;
    for (int i = 0; i < 6; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Full 3x3 matrix of a Sym3, for oracles that should not reuse the packed storage.
inline void to_full(const Sym3& a, double out[3][3]) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = a(i, j);
}

} // namespace plasthin::test
