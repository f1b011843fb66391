#include "mimolab/detectors.hpp"

#include <cmath>
#include <stdexcept>

namespace mimolab {

namespace {

std::vector<int> slice(const CVec& soft, const Constellation& c) {
    std::vector<int> idx(size_t(soft.size()));
    for (Eigen::Index i = 0; i < soft.size(); ++i) {
        idx[size_t(i)] = nearest_point(soft(i), c);
    }
    return idx;
}

} // namespace

DetectionResult detect_zf(const CMat& H, const CVec& y, const Constellation& c) {
    Eigen::CompleteOrthogonalDecomposition<CMat> cod(H);
    if (cod.rank() < H.cols()) {
        throw std::invalid_argument("detect_zf: H is rank-deficient");
    }
    CVec soft = cod.solve(y);
    return {slice(soft, c), soft};
}

DetectionResult detect_mf(const CMat& H, const CVec& y, const Constellation& c) {
    CVec soft = H.adjoint() * y;
    return {slice(soft, c), soft};
}

DetectionResult detect_mmse(const CMat& H, const CVec& y, double sigma,
                            const Constellation& c) {
    const Eigen::Index n_tr = H.cols();
    CMat A = H.adjoint() * H;
    A += (sigma * sigma) * CMat::Identity(n_tr, n_tr);
    CVec soft = A.ldlt().solve(H.adjoint() * y);
    return {slice(soft, c), soft};
}

DetectionResult detect_ml(const CMat& H, const CVec& y, const Constellation& c) {
    const int n_tr = int(H.cols());
    const double cap = std::pow(double(c.order), double(n_tr));
    if (cap > double(1 << 20)) {
        throw std::invalid_argument(
            "detect_ml: M^n_tr exceeds the 2^20 enumeration cap; use a smaller instance");
    }

    std::vector<int> idx(size_t(n_tr), 0);
    std::vector<int> best = idx;
    CVec Hx = CVec::Zero(H.rows());
    for (int i = 0; i < n_tr; ++i) {
        Hx += H.col(i) * c.points[0];
    }
    double best_cost = (y - Hx).squaredNorm();

    // Odometer over index vectors in lexicographic order; strict improvement
    // keeps the earliest minimizer, which is the lexicographic tie-break.
    while (true) {
        int pos = n_tr - 1;
        while (pos >= 0 && idx[size_t(pos)] == c.order - 1) {
            Hx -= H.col(pos) * c.points[size_t(c.order - 1)];
            Hx += H.col(pos) * c.points[0];
            idx[size_t(pos)] = 0;
            --pos;
        }
        if (pos < 0) {
            break;
        }
        Hx -= H.col(pos) * c.points[size_t(idx[size_t(pos)])];
        ++idx[size_t(pos)];
        Hx += H.col(pos) * c.points[size_t(idx[size_t(pos)])];

        const double cost = (y - Hx).squaredNorm();
        if (cost < best_cost) {
            best_cost = cost;
            best = idx;
        }
    }
    return {best, std::nullopt};
}

DetectionResult detect_amp(const CMat& H, const CVec& y, double sigma,
                           const Constellation& c, int iters) {
    const Eigen::Index n_r = H.rows();
    const Eigen::Index n_tr = H.cols();
    const double beta = double(n_tr) / double(n_r);

    CVec x = CVec::Zero(n_tr);
    CVec z = y;
    double tau2 = sigma * sigma + beta;

    for (int it = 0; it < iters; ++it) {
        const CVec r = x + H.adjoint() * z;
        double v_sum = 0.0;
        for (Eigen::Index i = 0; i < n_tr; ++i) {
            // Posterior mean/variance under the uniform discrete prior.
            // Max-subtraction keeps the exponentials in range.
            double max_e = -INFINITY;
            for (int k = 0; k < c.order; ++k) {
                max_e = std::max(max_e, -std::norm(r(i) - c.points[size_t(k)]) / tau2);
            }
            double wsum = 0.0, p2 = 0.0;
            cplx mean(0.0, 0.0);
            for (int k = 0; k < c.order; ++k) {
                const cplx s = c.points[size_t(k)];
                const double w = std::exp(-std::norm(r(i) - s) / tau2 - max_e);
                wsum += w;
                mean += w * s;
                p2 += w * std::norm(s);
            }
            mean /= wsum;
            x(i) = mean;
            v_sum += p2 / wsum - std::norm(mean);
        }
        const double v_mean = v_sum / double(n_tr);
        z = y - H * x + (beta * v_mean / tau2) * z;
        tau2 = sigma * sigma + beta * v_mean;
        if (!std::isfinite(tau2) || !x.allFinite()) {
            throw std::runtime_error("detect_amp: state diverged (NaN/Inf)");
        }
    }
    return {slice(x, c), x};
}

DetectionResult detect_vblast(const CMat& H, const CVec& y, double /*sigma*/,
                              const Constellation& c) {
    const int n_tr = int(H.cols());
    std::vector<int> remaining(static_cast<size_t>(n_tr), 0);
    for (int i = 0; i < n_tr; ++i) {
        remaining[size_t(i)] = i;
    }
    std::vector<int> hard(size_t(n_tr), 0);
    CVec resid = y;

    while (!remaining.empty()) {
        CMat Hs(H.rows(), Eigen::Index(remaining.size()));
        for (size_t k = 0; k < remaining.size(); ++k) {
            Hs.col(Eigen::Index(k)) = H.col(remaining[k]);
        }
        Eigen::CompleteOrthogonalDecomposition<CMat> cod(Hs);
        if (cod.rank() < Hs.cols()) {
            throw std::invalid_argument("detect_vblast: residual channel is rank-deficient");
        }
        CMat pinv = cod.pseudoInverse();

        // Max post-nulling SNR = min pseudoinverse row norm; ties to the
        // lowest remaining index for determinism.
        size_t pick = 0;
        double best = pinv.row(0).squaredNorm();
        for (size_t k = 1; k < remaining.size(); ++k) {
            const double n = pinv.row(Eigen::Index(k)).squaredNorm();
            if (n < best) {
                best = n;
                pick = k;
            }
        }
        const int user = remaining[pick];
        const cplx soft = (pinv.row(Eigen::Index(pick)) * resid)(0);
        const int sym = nearest_point(soft, c);
        hard[size_t(user)] = sym;
        resid -= H.col(user) * c.points[size_t(sym)];
        remaining.erase(remaining.begin() + long(pick));
    }
    return {hard, std::nullopt};
}

} // namespace mimolab
