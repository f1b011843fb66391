#include "mimolab/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace mimolab {

CMat sample_channel_iid(int n_r, int n_tr, Rng& rng) {
    if (n_tr < 1 || n_tr > n_r) {
        throw std::invalid_argument("sample_channel_iid: need 1 <= n_tr <= n_r");
    }
    const double s = 1.0 / std::sqrt(2.0 * double(n_r)); // per-part std for variance 1/n_r
    CMat H(n_r, n_tr);
    for (int i = 0; i < n_r; ++i) {
        for (int j = 0; j < n_tr; ++j) {
            H(i, j) = cplx(rng.normal() * s, rng.normal() * s);
        }
    }
    return H;
}

CorrelationMatrix exp_correlation_matrix(int n, double rho) {
    if (rho < 0.0 || rho >= 1.0) {
        throw std::invalid_argument("exp_correlation_matrix: rho must lie in [0, 1)");
    }
    RMat R(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            R(i, j) = std::pow(rho, std::abs(i - j));
        }
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(R);
    RMat sqrt = es.eigenvectors() *
                es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
    return {R, sqrt};
}

CMat sample_channel_kronecker(int n_r, int n_tr, const CorrelationSpec& spec, Rng& rng) {
    CMat H = sample_channel_iid(n_r, n_tr, rng);
    if (spec.rho_rx > 0.0) {
        H = exp_correlation_matrix(n_r, spec.rho_rx).sqrt * H;
    }
    if (!spec.partial && spec.rho_tx > 0.0) {
        H = H * exp_correlation_matrix(n_tr, spec.rho_tx).sqrt;
    }
    return H;
}

double sigma_for_snr(int n_r, int n_tr, double snr_db) {
    if (n_tr < 1) {
        throw std::invalid_argument("sigma_for_snr: n_tr must be >= 1");
    }
    const double snr = std::pow(10.0, snr_db / 10.0);
    return std::sqrt(double(n_tr) / (double(n_r) * snr));
}

CVec symbols_from_indices(const std::vector<int>& idx, const Constellation& c) {
    CVec x(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        x(Eigen::Index(i)) = c.points[size_t(idx[i])];
    }
    return x;
}

MimoInstance transmit(const CMat& H, const std::vector<int>& x_indices,
                      const Constellation& c, double sigma, Rng& rng) {
    if (Eigen::Index(x_indices.size()) != H.cols()) {
        throw std::invalid_argument("transmit: x_indices length must equal H columns");
    }
    MimoInstance inst;
    inst.H = H;
    inst.x_indices = x_indices;
    inst.sigma = sigma;
    const CVec x = symbols_from_indices(x_indices, c);
    CVec n(H.rows());
    const double s = sigma / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        n(i) = cplx(rng.normal() * s, rng.normal() * s);
    }
    inst.y = H * x + n;
    return inst;
}

CMat perturb_channel(const CMat& H, double est_snr_db, Rng& rng) {
    if (!std::isfinite(est_snr_db)) {
        throw std::invalid_argument("perturb_channel: est_snr_db must be finite");
    }
    const double snr = std::pow(10.0, est_snr_db / 10.0);
    // Per-instance Frobenius norm stands in for the ensemble expectation.
    const double sigma_w2 = H.squaredNorm() / (double(H.rows()) * double(H.cols()) * snr);
    const double s = std::sqrt(sigma_w2 / 2.0);
    CMat Hp = H;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        for (Eigen::Index j = 0; j < H.cols(); ++j) {
            Hp(i, j) += cplx(rng.normal() * s, rng.normal() * s);
        }
    }
    return Hp;
}

RealifiedInstance realify(const CMat& H, const CVec& y) {
    const Eigen::Index n_r = H.rows();
    const Eigen::Index n_tr = H.cols();
    RealifiedInstance r;
    r.H_r.resize(2 * n_r, 2 * n_tr);
    r.H_r.topLeftCorner(n_r, n_tr) = H.real();
    r.H_r.topRightCorner(n_r, n_tr) = -H.imag();
    r.H_r.bottomLeftCorner(n_r, n_tr) = H.imag();
    r.H_r.bottomRightCorner(n_r, n_tr) = H.real();
    r.y_r.resize(2 * n_r);
    r.y_r.head(n_r) = y.real();
    r.y_r.tail(n_r) = y.imag();
    r.per_user_columns.reserve(size_t(n_tr));
    for (Eigen::Index i = 0; i < n_tr; ++i) {
        Eigen::Matrix<double, Eigen::Dynamic, 2> block(2 * n_r, 2);
        block.col(0) = r.H_r.col(i);
        block.col(1) = r.H_r.col(n_tr + i);
        r.per_user_columns.push_back(std::move(block));
    }
    return r;
}

} // namespace mimolab
