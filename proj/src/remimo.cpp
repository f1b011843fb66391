#include "mimolab/remimo.hpp"

#include <cmath>
#include <stdexcept>

namespace mimolab {

namespace {

std::string block_prefix(int t) { return "block" + std::to_string(t) + "."; }

} // namespace

RemimoModel make_remimo(const RemimoConfig& cfg, uint64_t seed) {
    if (cfg.T < 1) {
        throw std::invalid_argument("make_remimo: T must be >= 1");
    }
    if (cfg.d_phi() % cfg.n_heads != 0) {
        throw std::invalid_argument("make_remimo: d_phi not divisible by n_heads");
    }
    RemimoModel model;
    model.cfg = cfg;
    model.constellation = make_constellation(cfg.order);
    ParamStore& p = model.params;
    Rng rng(Rng::mix(seed));

    const int d_s = cfg.d_s;
    const int d_f = cfg.feature_dim();
    p.add("gamma.W1", glorot_uniform(d_f, 4 * d_s, rng));
    p.add("gamma.b1", Tensor::Zero(1, 4 * d_s));
    p.add("gamma.W2", glorot_uniform(4 * d_s, d_s, rng));
    p.add("gamma.b2", Tensor::Zero(1, d_s));

    const int d_phi = cfg.d_phi();
    const int d_k = cfg.d_k();
    const int d_psi = cfg.d_psi();
    const int h1 = d_psi / 2;
    const int h2 = d_psi / 4;
    for (int t = 0; t < cfg.T; ++t) {
        const std::string b = block_prefix(t);
        for (int h = 0; h < cfg.n_heads; ++h) {
            const std::string a = b + "attn.h" + std::to_string(h) + ".";
            p.add(a + "Wq", glorot_uniform(d_phi, d_k, rng));
            p.add(a + "Wk", glorot_uniform(d_phi, d_k, rng));
            p.add(a + "Wv", glorot_uniform(d_phi, d_k, rng));
        }
        p.add(b + "attn.Wo", glorot_uniform(cfg.n_heads * d_k, d_s, rng));
        p.add(b + "ln1.gain", Tensor::Ones(1, d_s));
        p.add(b + "ln1.shift", Tensor::Zero(1, d_s));
        p.add(b + "ffn.W1", glorot_uniform(d_s, 4 * d_s, rng));
        p.add(b + "ffn.b1", Tensor::Zero(1, 4 * d_s));
        p.add(b + "ffn.W2", glorot_uniform(4 * d_s, d_s, rng));
        p.add(b + "ffn.b2", Tensor::Zero(1, d_s));
        p.add(b + "ln2.gain", Tensor::Ones(1, d_s));
        p.add(b + "ln2.shift", Tensor::Zero(1, d_s));
        p.add(b + "pred.W1", glorot_uniform(d_psi, h1, rng));
        p.add(b + "pred.b1", Tensor::Zero(1, h1));
        p.add(b + "pred.W2", glorot_uniform(h1, h2, rng));
        p.add(b + "pred.b2", Tensor::Zero(1, h2));
        p.add(b + "pred.W3", glorot_uniform(h2, cfg.order, rng));
        p.add(b + "pred.b3", Tensor::Zero(1, cfg.order));
    }
    return model;
}

RVec transmitters_encoding(int n_tr, int n_r, int d_te, int d_s) {
    if (d_te % 2 != 0) {
        throw std::invalid_argument("transmitters_encoding: d_te must be even");
    }
    RVec te(d_te);
    const double root_ds = std::sqrt(double(d_s));
    for (int i = 0; 2 * i < d_te; ++i) {
        const double freq =
            double(n_tr) / std::pow(2.0 * double(n_r), double(2 * i) / double(d_te));
        te(2 * i) = std::sin(freq) / root_ds;
        te(2 * i + 1) = std::cos(freq) / root_ds;
    }
    return te;
}

LikelihoodInputs likelihood_inputs(const CMat& H, const CVec& y, const CVec& z,
                                   double sigma, int n_tr) {
    const CVec dy = y - H * z;
    const Eigen::Index n_r = H.rows();
    LikelihoodInputs li;
    const double norm = 1.0 / std::sqrt(2.0 * double(n_tr));
    li.delta_y_norm.resize(2 * n_r);
    li.delta_y_norm.head(n_r) = dy.real() * norm;
    li.delta_y_norm.tail(n_r) = dy.imag() * norm;
    li.h_realified.resize(H.cols(), 2 * n_r);
    for (Eigen::Index i = 0; i < H.cols(); ++i) {
        li.h_realified.row(i).head(n_r) = H.col(i).real().transpose();
        li.h_realified.row(i).tail(n_r) = H.col(i).imag().transpose();
    }
    li.sigma_norm = sigma * norm;
    return li;
}

cplx soft_symbol(const Eigen::RowVectorXd& p_row, const Constellation& c) {
    cplx z(0.0, 0.0);
    for (int k = 0; k < c.order; ++k) {
        z += p_row(k) * c.points[size_t(k)];
    }
    return z;
}

RemimoParamVars remimo_param_vars(Tape& tape, const RemimoModel& model,
                                  bool needs_grad) {
    RemimoParamVars pv;
    const int n = model.params.count();
    pv.leaves.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        pv.leaves.push_back({i, tape.leaf(model.params.value(i), needs_grad)});
    }
    return pv;
}

namespace {

RemimoGraph remimo_build_impl(Tape& tape, const RemimoModel& model,
                              const std::function<Var(const std::string&)>& param,
                              const CMat& H, const CVec& y, double sigma);

} // namespace

RemimoGraph remimo_build(Tape& tape, const RemimoModel& model,
                         const RemimoParamVars& pv, const CMat& H, const CVec& y,
                         double sigma) {
    auto param = [&](const std::string& name) {
        return pv.leaves[size_t(model.params.index_of(name))].second;
    };
    return remimo_build_impl(tape, model, param, H, y, sigma);
}

RemimoGraph remimo_build(Tape& tape, const RemimoModel& model, const CMat& H,
                         const CVec& y, double sigma, bool needs_grad) {
    RemimoParamVars pv = remimo_param_vars(tape, model, needs_grad);
    RemimoGraph graph = remimo_build(tape, model, pv, H, y, sigma);
    if (needs_grad) {
        graph.param_leaves = pv.leaves;
    }
    return graph;
}

namespace {

RemimoGraph remimo_build_impl(Tape& tape, const RemimoModel& model,
                              const std::function<Var(const std::string&)>& param,
                              const CMat& H, const CVec& y, double sigma) {
    const RemimoConfig& cfg = model.cfg;
    const int n_tr = int(H.cols());
    const int n_r = int(H.rows());
    if (n_r != cfg.n_r) {
        throw std::invalid_argument("remimo_build: H row count does not match config n_r");
    }
    if (n_tr < 1 || n_tr > n_r) {
        throw std::invalid_argument("remimo_build: need 1 <= n_tr <= n_r");
    }
    const int M = cfg.order;
    const double inv_root = 1.0 / std::sqrt(2.0 * double(n_tr));

    RemimoGraph graph;
    const RealifiedInstance real = realify(H, y);

    // Per-user realified channel rows [Re h_i; Im h_i].
    Tensor h_rows(n_tr, 2 * n_r);
    for (int i = 0; i < n_tr; ++i) {
        h_rows.row(i) = real.H_r.col(i).transpose();
    }
    Var h_const = tape.constant(h_rows);

    // Initial per-user feature f_i = [y/sqrt(2 n_tr), h_i, sigma/sqrt(2 n_tr), TE].
    const RVec te = transmitters_encoding(n_tr, cfg.n_r, cfg.te_width(), cfg.d_s);
    Tensor f(n_tr, cfg.feature_dim());
    for (int i = 0; i < n_tr; ++i) {
        f.row(i).segment(0, 2 * n_r) = real.y_r.transpose() * inv_root;
        f.row(i).segment(2 * n_r, 2 * n_r) = h_rows.row(i);
        f(i, 4 * n_r) = sigma * inv_root;
        f.row(i).segment(4 * n_r + 1, cfg.te_width()) = te.transpose();
    }

    Var fv = tape.constant(f);
    Var s = tape.scale(
        tape.affine(tape.relu(tape.affine(fv, param("gamma.W1"), param("gamma.b1"))),
                    param("gamma.W2"), param("gamma.b2")),
        std::sqrt(double(cfg.d_s)));
    graph.initial_state = tape.value(s);

    // Constants shared by the likelihood recomputation in every block.
    Tensor c_re(M, 1), c_im(M, 1);
    for (int k = 0; k < M; ++k) {
        c_re(k, 0) = model.constellation.points[size_t(k)].real();
        c_im(k, 0) = model.constellation.points[size_t(k)].imag();
    }
    Var c_re_v = tape.constant(c_re);
    Var c_im_v = tape.constant(c_im);
    Var Hr_re = tape.constant(real.H_r.leftCols(n_tr));   // acts on Re z
    Var Hr_im = tape.constant(real.H_r.rightCols(n_tr));  // acts on Im z
    Var y_col = tape.constant(Tensor(real.y_r));
    Var sigma_col = tape.constant(Tensor::Constant(n_tr, 1, sigma * inv_root));
    const int pad = cfg.d_phi() - cfg.d_phi_raw();
    Var pad_v = pad > 0 ? tape.constant(Tensor::Zero(n_tr, pad)) : Var{};

    Var xhat = tape.constant(Tensor::Zero(n_tr, M));
    Var probs = tape.softmax_rows(xhat); // uniform at t = 0

    const double attn_scale = 1.0 / std::sqrt(double(cfg.d_k()));
    graph.attn.resize(size_t(cfg.T));

    for (int t = 0; t < cfg.T; ++t) {
        const std::string b = block_prefix(t);

        // delta_y from the previous block's probabilities, via soft symbols.
        Var z_re = tape.matmul(probs, c_re_v);
        Var z_im = tape.matmul(probs, c_im_v);
        Var Hz = tape.add(tape.matmul(Hr_re, z_re), tape.matmul(Hr_im, z_im));
        Var dy = tape.add(y_col, tape.scale(Hz, -1.0));
        Var dy_rep = tape.repeat_row(tape.scale(tape.transpose(dy), inv_root), n_tr);

        std::vector<Var> phi_parts = {s, xhat, dy_rep, h_const};
        if (pad > 0) {
            phi_parts.push_back(pad_v);
        }
        Var phi = tape.concat_cols(phi_parts);

        std::vector<Var> heads;
        heads.reserve(size_t(cfg.n_heads));
        for (int h = 0; h < cfg.n_heads; ++h) {
            const std::string a = b + "attn.h" + std::to_string(h) + ".";
            Var Q = tape.matmul(phi, param(a + "Wq"));
            Var K = tape.matmul(phi, param(a + "Wk"));
            Var V = tape.matmul(phi, param(a + "Wv"));
            Var A = tape.softmax_rows(tape.scale(tape.matmul_nt(Q, K), attn_scale));
            graph.attn[size_t(t)].push_back(tape.value(A));
            heads.push_back(tape.matmul(A, V));
        }
        Var mha = tape.matmul(tape.concat_cols(heads), param(b + "attn.Wo"));
        Var u = tape.layer_norm_rows(tape.add(s, mha), param(b + "ln1.gain"),
                                     param(b + "ln1.shift"));
        Var ffn = tape.affine(
            tape.relu(tape.affine(u, param(b + "ffn.W1"), param(b + "ffn.b1"))),
            param(b + "ffn.W2"), param(b + "ffn.b2"));
        s = tape.layer_norm_rows(tape.add(u, ffn), param(b + "ln2.gain"),
                                 param(b + "ln2.shift"));

        Var psi = tape.concat_cols({s, xhat, dy_rep, h_const, sigma_col});
        Var logits = tape.affine(
            tape.relu(tape.affine(
                tape.relu(tape.affine(psi, param(b + "pred.W1"), param(b + "pred.b1"))),
                param(b + "pred.W2"), param(b + "pred.b2"))),
            param(b + "pred.W3"), param(b + "pred.b3"));

        xhat = logits;
        probs = tape.softmax_rows(logits);
        graph.logits.push_back(logits);
        graph.probs.push_back(tape.value(probs));
    }
    return graph;
}

} // namespace

Var remimo_loss(Tape& tape, const RemimoGraph& graph, const std::vector<int>& targets,
                const std::vector<double>& weights) {
    if (weights.size() != graph.logits.size()) {
        throw std::invalid_argument("remimo_loss: one weight per block required");
    }
    double wsum = 0.0;
    for (double w : weights) {
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        throw std::invalid_argument("remimo_loss: weights must sum to 1");
    }
    const double inv_n = 1.0 / double(targets.size());
    Var total{};
    for (size_t t = 0; t < graph.logits.size(); ++t) {
        Var term = tape.scale(tape.cross_entropy_sum(graph.logits[t], targets),
                              weights[t] * inv_n);
        total = (t == 0) ? term : tape.add(total, term);
    }
    return total;
}

RemimoOutput remimo_forward(const RemimoModel& model, const CMat& H, const CVec& y,
                            double sigma) {
    Tape tape;
    RemimoGraph g = remimo_build(tape, model, H, y, sigma, false);
    RemimoOutput out;
    out.probs = std::move(g.probs);
    out.attn = std::move(g.attn);
    out.initial_state = std::move(g.initial_state);
    return out;
}

DetectionResult detect_remimo(const RemimoModel& model, const CMat& H, const CVec& y,
                              double sigma) {
    RemimoOutput out = remimo_forward(model, H, y, sigma);
    const Tensor& P = out.probs.back();
    DetectionResult res;
    res.hard_indices.resize(size_t(P.rows()));
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        int best = 0;
        for (int k = 1; k < P.cols(); ++k) {
            if (P(i, k) > P(i, best)) {
                best = k;
            }
        }
        res.hard_indices[size_t(i)] = best;
    }
    return res;
}

namespace {

void accumulate_leaf_gradients(const Tape& tape,
                               const std::vector<std::pair<int, Var>>& leaves,
                               ParamStore& params, double scale) {
    for (const auto& [pid, var] : leaves) {
        const Tensor& g = tape.grad(var);
        if (g.size() != 0) { // untouched leaves have no gradient buffer
            params.grad(pid) += scale * g;
        }
    }
}

} // namespace

void accumulate_gradients(const Tape& tape, const RemimoGraph& graph,
                          ParamStore& params, double scale) {
    accumulate_leaf_gradients(tape, graph.param_leaves, params, scale);
}

void accumulate_gradients(const Tape& tape, const RemimoParamVars& pv,
                          ParamStore& params, double scale) {
    accumulate_leaf_gradients(tape, pv.leaves, params, scale);
}

} // namespace mimolab
