#pragma once

#include <Eigen/Dense>

#include "mimolab/constellation.hpp"
#include "mimolab/rng.hpp"

namespace mimolab {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// One draw of the linear MIMO forward process y = H x + n.
// sigma is the per-complex-entry noise standard deviation: real and imaginary
// parts of each noise entry have variance sigma^2 / 2.
struct MimoInstance {
    CMat H;
    std::vector<int> x_indices;
    CVec y;
    double sigma = 0.0;
    double snr_db = 0.0;
};

struct CorrelationSpec {
    double rho_rx = 0.0;
    double rho_tx = 0.0;
    bool partial = false; // skip the transmit-side factor
};

// Real-valued equivalent of (H, y):
//   H_r = [[Re H, -Im H], [Im H, Re H]],  y_r = [Re y; Im y].
// Column block i of per_user_columns pairs columns i and n_tr + i of H_r,
// i.e. the realified channel column of user i.
struct RealifiedInstance {
    RMat H_r;
    RVec y_r;
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> per_user_columns;
};

// Entries i.i.d. circular complex Gaussian with per-entry variance 1/n_r.
CMat sample_channel_iid(int n_r, int n_tr, Rng& rng);

// Exponential correlation matrix R_ij = rho^|i-j| together with its principal
// square root. 0 <= rho < 1 required.
struct CorrelationMatrix {
    RMat R;
    RMat sqrt;
};
CorrelationMatrix exp_correlation_matrix(int n, double rho);

// Kronecker-correlated channel R_R^{1/2} H_w R_T^{1/2}; the transmit factor
// is omitted when spec.partial is true.
CMat sample_channel_kronecker(int n_r, int n_tr, const CorrelationSpec& spec, Rng& rng);

// Noise std for a target SNR: sigma^2 = n_tr / (n_r * 10^(snr_db/10)), using
// the analytic expectations E||Hx||^2 = n_tr and E||n||^2 = n_r sigma^2.
double sigma_for_snr(int n_r, int n_tr, double snr_db);

// y = H x + n with n i.i.d. CN(0, sigma^2) per entry.
MimoInstance transmit(const CMat& H, const std::vector<int>& x_indices,
                      const Constellation& c, double sigma, Rng& rng);

// Channel estimation error: H* = H + W, W entries CN(0, sigma_w^2) with
// sigma_w^2 = ||H||_F^2 / (n_r * n_tr * 10^(est_snr_db/10)).
CMat perturb_channel(const CMat& H, double est_snr_db, Rng& rng);

RealifiedInstance realify(const CMat& H, const CVec& y);

// Symbol vector from indices.
CVec symbols_from_indices(const std::vector<int>& idx, const Constellation& c);

} // namespace mimolab
