#include "mimolab/constellation.hpp"

#include <cmath>
#include <stdexcept>

namespace mimolab {

Constellation make_constellation(int order) {
    if (order != 4 && order != 16 && order != 64) {
        throw std::invalid_argument("make_constellation: unsupported QAM order " +
                                    std::to_string(order) + " (expected 4, 16, or 64)");
    }
    const int side = int(std::lround(std::sqrt(double(order))));

    // Levels {-(side-1), ..., -1, +1, ..., side-1} in steps of 2.
    std::vector<double> levels(side);
    for (int i = 0; i < side; ++i) {
        levels[i] = double(2 * i - (side - 1));
    }

    double power = 0.0;
    for (double a : levels) {
        for (double b : levels) {
            power += a * a + b * b;
        }
    }
    const double scale = 1.0 / std::sqrt(power / double(order));

    Constellation c;
    c.order = order;
    c.points.reserve(order);
    for (double a : levels) {
        for (double b : levels) {
            c.points.emplace_back(a * scale, b * scale);
        }
    }
    return c;
}

std::vector<int> sample_symbols(int n_tr, const Constellation& c, Rng& rng) {
    std::vector<int> idx(n_tr);
    for (int i = 0; i < n_tr; ++i) {
        idx[i] = int(rng.uniform_int(uint64_t(c.order)));
    }
    return idx;
}

int nearest_point(cplx z, const Constellation& c) {
    int best = 0;
    double best_d = std::norm(z - c.points[0]);
    for (int k = 1; k < c.order; ++k) {
        const double d = std::norm(z - c.points[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

} // namespace mimolab
