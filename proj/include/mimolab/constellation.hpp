#pragma once

#include <complex>
#include <vector>

#include "mimolab/rng.hpp"

namespace mimolab {

using cplx = std::complex<double>;

// Square QAM constellation, normalized to unit average power.
// Points are ordered row-major over the (I, Q) grid, lowest amplitude level
// first on each axis, so the ordering is deterministic.
struct Constellation {
    int order = 0;                 // M: 4, 16, or 64
    std::vector<cplx> points;      // M points, E|s|^2 == 1
};

// order must be 4, 16, or 64; throws std::invalid_argument otherwise.
Constellation make_constellation(int order);

// I.i.d. uniform indices over [0, M).
std::vector<int> sample_symbols(int n_tr, const Constellation& c, Rng& rng);

// Index of the closest constellation point; ties go to the lowest index.
int nearest_point(cplx z, const Constellation& c);

} // namespace mimolab
