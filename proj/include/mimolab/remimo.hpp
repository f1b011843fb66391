#pragma once

#include "mimolab/detectors.hpp"
#include "mimolab/params.hpp"
#include "mimolab/tape.hpp"

namespace mimolab {

// Architecture hyperparameters for the recurrent equivariant detector.
// d_phi (the encoder input width) is determined by the constituents of the
// per-user feature [s, x_hat, delta_y, h]; when it is not divisible by
// n_heads the feature is zero-padded up to the next multiple.
struct RemimoConfig {
    int d_s = 64;     // state width
    int n_heads = 4;  // attention heads per encoder
    int T = 6;        // encoder-predictor block count
    int order = 4;    // constellation order M
    int n_r = 16;     // receiver count
    int d_te = 0;     // transmitters-encoding width; 0 means n_r rounded up to even

    int te_width() const { return d_te > 0 ? d_te : n_r + (n_r % 2); }
    int d_phi_raw() const { return d_s + order + 4 * n_r; }
    int d_phi() const {
        const int r = d_phi_raw() % n_heads;
        return r == 0 ? d_phi_raw() : d_phi_raw() + (n_heads - r);
    }
    int d_k() const { return d_phi() / n_heads; } // also d_v
    int d_psi() const { return d_s + order + 4 * n_r + 1; }
    int feature_dim() const { return 4 * n_r + 1 + te_width(); } // gamma input
};

struct RemimoModel {
    RemimoConfig cfg;
    Constellation constellation;
    ParamStore params;
};

// Fresh model with Glorot-uniform weights, zero biases, unit/zero layer norms.
RemimoModel make_remimo(const RemimoConfig& cfg, uint64_t seed);

// Sinusoidal encoding of the active user count; identical for every user.
// TE[2i] = sin(n_tr / (2 n_r)^(2i/d_te)) / sqrt(d_s), TE[2i+1] the cosine.
RVec transmitters_encoding(int n_tr, int n_r, int d_te, int d_s);

// Components of the Gaussian log-likelihood gradient handed to the network:
// normalized residual realify(y - H z) / sqrt(2 n_tr), per-user realified
// channel columns, and sigma / sqrt(2 n_tr).
struct LikelihoodInputs {
    RVec delta_y_norm;  // length 2 n_r
    RMat h_realified;   // n_tr x 2 n_r, one row per user
    double sigma_norm = 0.0;
};
LikelihoodInputs likelihood_inputs(const CMat& H, const CVec& y, const CVec& z,
                                   double sigma, int n_tr);

// Probability-weighted sum of constellation points (Eq. holds the row sums to 1).
cplx soft_symbol(const Eigen::RowVectorXd& p_row, const Constellation& c);

// Differentiable forward graph. probs/attn are plain tensors snapshotted from
// the tape so callers can inspect them without touching Vars.
struct RemimoGraph {
    std::vector<Var> logits;                // per block, n_tr x M pre-softmax
    std::vector<Tensor> probs;              // per block, n_tr x M
    std::vector<std::vector<Tensor>> attn;  // [block][head], n_tr x n_tr
    Tensor initial_state;                   // n_tr x d_s
    std::vector<std::pair<int, Var>> param_leaves; // (param index, tape leaf)
};
RemimoGraph remimo_build(Tape& tape, const RemimoModel& model, const CMat& H,
                         const CVec& y, double sigma, bool needs_grad);

// Parameter leaves pushed once onto a tape so that every sample graph built on
// the same tape shares them: one copy of the weights (and one gradient buffer)
// per batch instead of per sample.
struct RemimoParamVars {
    std::vector<std::pair<int, Var>> leaves; // (param index, tape leaf)
};
RemimoParamVars remimo_param_vars(Tape& tape, const RemimoModel& model,
                                  bool needs_grad);
RemimoGraph remimo_build(Tape& tape, const RemimoModel& model,
                         const RemimoParamVars& pv, const CMat& H, const CVec& y,
                         double sigma);

// Accumulates d(loss)/d(theta) from shared parameter leaves, scaled by `scale`.
void accumulate_gradients(const Tape& tape, const RemimoParamVars& pv,
                          ParamStore& params, double scale);

// (1/n_tr) sum_t w_t sum_i CE(logits_i^t, x_i); weights must sum to 1.
Var remimo_loss(Tape& tape, const RemimoGraph& graph, const std::vector<int>& targets,
                const std::vector<double>& weights);

// Inference-only forward.
struct RemimoOutput {
    std::vector<Tensor> probs;
    std::vector<std::vector<Tensor>> attn;
    Tensor initial_state;
};
RemimoOutput remimo_forward(const RemimoModel& model, const CMat& H, const CVec& y,
                            double sigma);

// Hard detection from the final block's probabilities; ties to lowest index.
DetectionResult detect_remimo(const RemimoModel& model, const CMat& H, const CVec& y,
                              double sigma);

// Accumulates d(loss)/d(theta) into model.params gradients, scaled by `scale`.
void accumulate_gradients(const Tape& tape, const RemimoGraph& graph,
                          ParamStore& params, double scale);

} // namespace mimolab
