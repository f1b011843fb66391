#include "mimolab/tensor.hpp"

#include <cmath>

namespace mimolab {

Tensor glorot_uniform(int rows, int cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / double(rows + cols));
    Tensor t(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            t(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
        }
    }
    return t;
}

bool all_finite(const Tensor& t) {
    return t.allFinite();
}

} // namespace mimolab
