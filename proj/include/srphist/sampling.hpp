#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "geometry.hpp"
#include "random.hpp"

namespace srphist {

/// n draws from the standard d-variate Gaussian (Box-Muller over the
/// counter RNG, so identical on every platform).
inline PointSet gaussian_sample(std::size_t n, std::size_t d, std::uint64_t seed) {
    PointSet out(d);
    out.reserve(n);
    CounterRng rng(seed);
    std::vector<double> row(d);
    bool have_spare = false;
    double spare = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& x : row) {
            if (have_spare) {
                x = spare;
                have_spare = false;
                continue;
            }
            const double u1 = 1.0 - rng.uniform();  // (0, 1]
            const double u2 = rng.uniform();
            const double r = std::sqrt(-2.0 * std::log(u1));
            x = r * std::cos(2.0 * std::numbers::pi * u2);
            spare = r * std::sin(2.0 * std::numbers::pi * u2);
            have_spare = true;
        }
        out.push_back(row);
    }
    return out;
}

/// n draws uniform on a box (closed upper facets are hit with probability 0).
inline PointSet uniform_sample(std::size_t n, const Box& box, std::uint64_t seed) {
    PointSet out(box.dim());
    out.reserve(n);
    CounterRng rng(seed);
    std::vector<double> row(box.dim());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < box.dim(); ++j) row[j] = box[j].lo + rng.uniform() * width(box[j]);
        out.push_back(row);
    }
    return out;
}

}  // namespace srphist
