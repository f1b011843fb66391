#pragma once

#include <optional>

#include "mimolab/channel.hpp"

namespace mimolab {

struct DetectionResult {
    std::vector<int> hard_indices;
    std::optional<CVec> soft_estimate; // pre-slicing estimate when available
};

// soft = pinv(H) y. H must have full column rank.
DetectionResult detect_zf(const CMat& H, const CVec& y, const Constellation& c);

// soft = H^H y.
DetectionResult detect_mf(const CMat& H, const CVec& y, const Constellation& c);

// soft = (H^H H + sigma^2 I)^{-1} H^H y.
DetectionResult detect_mmse(const CMat& H, const CVec& y, double sigma,
                            const Constellation& c);

// Exhaustive minimizer of ||y - H x||^2 over the full symbol grid.
// Requires M^n_tr <= 2^20; ties break lexicographically on index vectors.
DetectionResult detect_ml(const CMat& H, const CVec& y, const Constellation& c);

// AMP with a componentwise posterior-mean denoiser under the uniform discrete
// prior and an Onsager-corrected residual. State:
//   tau^2_0 = sigma^2 + n_tr/n_r, x0 = 0, z0 = y
//   r      = x + H^H z
//   x_i    = sum_s s w_s / sum_s w_s,   w_s = exp(-|r_i - s|^2 / tau^2)
//   v_i    = sum_s |s|^2 w_s / sum w_s - |x_i|^2
//   z      = y - H x + (n_tr/n_r) z mean(v) / tau^2
//   tau^2  = sigma^2 + (n_tr/n_r) mean(v)
DetectionResult detect_amp(const CMat& H, const CVec& y, double sigma,
                           const Constellation& c, int iters = 50);

// V-BLAST ZF-SIC: repeatedly pick the undetected stream whose pseudoinverse
// row norm is minimal (max post-nulling SNR), slice, cancel, repeat.
DetectionResult detect_vblast(const CMat& H, const CVec& y, double sigma,
                              const Constellation& c);

} // namespace mimolab
