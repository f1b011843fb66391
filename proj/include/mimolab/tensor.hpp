#pragma once

#include <Eigen/Dense>

#include "mimolab/rng.hpp"

namespace mimolab {

// All network math is dense 2-D double precision. Vectors are 1 x n rows,
// scalars 1 x 1. Eigen's single-threaded products have a fixed reduction
// order, which keeps every forward/backward pass bit-reproducible.
using Tensor = Eigen::MatrixXd;

// Glorot-style uniform init on (-sqrt(6/(fan_in+fan_out)), +...).
Tensor glorot_uniform(int rows, int cols, Rng& rng);

bool all_finite(const Tensor& t);

} // namespace mimolab
