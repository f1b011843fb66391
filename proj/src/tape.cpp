#include "mimolab/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace mimolab {

int Tape::push(Tensor value, bool needs_grad, std::function<void()> pull) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor value, bool needs_grad) {
    return {push(std::move(value), needs_grad, nullptr)};
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.rows()) {
        throw std::invalid_argument("matmul: inner dimensions disagree");
    }
    bool ng = nodes_[size_t(a.id)].needs_grad || nodes_[size_t(b.id)].needs_grad;
    int out = push(A * B, ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, b, out]() {
        const Tensor& g = nodes_[size_t(out)].grad;
        if (nodes_[size_t(a.id)].needs_grad) {
            grad_ref(a.id).noalias() += g * nodes_[size_t(b.id)].value.transpose();
        }
        if (nodes_[size_t(b.id)].needs_grad) {
            grad_ref(b.id).noalias() += nodes_[size_t(a.id)].value.transpose() * g;
        }
    };
    return {out};
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.cols()) {
        throw std::invalid_argument("matmul_nt: inner dimensions disagree");
    }
    bool ng = nodes_[size_t(a.id)].needs_grad || nodes_[size_t(b.id)].needs_grad;
    int out = push(A * B.transpose(), ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, b, out]() {
        const Tensor& g = nodes_[size_t(out)].grad;
        if (nodes_[size_t(a.id)].needs_grad) {
            grad_ref(a.id).noalias() += g * nodes_[size_t(b.id)].value;
        }
        if (nodes_[size_t(b.id)].needs_grad) {
            grad_ref(b.id).noalias() += g.transpose() * nodes_[size_t(a.id)].value;
        }
    };
    return {out};
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rows() != B.rows() || A.cols() != B.cols()) {
        throw std::invalid_argument("add: shape mismatch");
    }
    bool ng = nodes_[size_t(a.id)].needs_grad || nodes_[size_t(b.id)].needs_grad;
    int out = push(A + B, ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, b, out]() {
        const Tensor& g = nodes_[size_t(out)].grad;
        if (nodes_[size_t(a.id)].needs_grad) grad_ref(a.id) += g;
        if (nodes_[size_t(b.id)].needs_grad) grad_ref(b.id) += g;
    };
    return {out};
}

Var Tape::add_rowvec(Var a, Var bias) {
    const Tensor& A = value(a);
    const Tensor& B = value(bias);
    if (B.rows() != 1 || B.cols() != A.cols()) {
        throw std::invalid_argument("add_rowvec: bias must be 1 x cols(a)");
    }
    bool ng = nodes_[size_t(a.id)].needs_grad || nodes_[size_t(bias.id)].needs_grad;
    int out = push(A.rowwise() + B.row(0), ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, bias, out]() {
        const Tensor& g = nodes_[size_t(out)].grad;
        if (nodes_[size_t(a.id)].needs_grad) grad_ref(a.id) += g;
        if (nodes_[size_t(bias.id)].needs_grad) grad_ref(bias.id).row(0) += g.colwise().sum();
    };
    return {out};
}

Var Tape::scale(Var a, double c) {
    bool ng = nodes_[size_t(a.id)].needs_grad;
    int out = push(value(a) * c, ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, c, out]() {
        if (nodes_[size_t(a.id)].needs_grad) grad_ref(a.id) += nodes_[size_t(out)].grad * c;
    };
    return {out};
}

Var Tape::relu(Var a) {
    bool ng = nodes_[size_t(a.id)].needs_grad;
    int out = push(value(a).cwiseMax(0.0), ng, nullptr);
    // Subgradient at 0 is 0: propagate only where the input was > 0.
    nodes_[size_t(out)].pull = [this, a, out]() {
        if (!nodes_[size_t(a.id)].needs_grad) return;
        const Tensor& x = nodes_[size_t(a.id)].value;
        grad_ref(a.id) += (x.array() > 0.0).cast<double>().matrix().cwiseProduct(
            nodes_[size_t(out)].grad);
    };
    return {out};
}

Var Tape::layer_norm_rows(Var a, Var gain, Var shift, double eps) {
    const Tensor& X = value(a);
    const int n = int(X.cols());
    if (n < 2) {
        throw std::invalid_argument("layer_norm_rows: row length must be >= 2");
    }
    Tensor xhat(X.rows(), X.cols());
    Eigen::VectorXd inv_std(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double mean = X.row(r).mean();
        const double var = (X.row(r).array() - mean).square().sum() / double(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std(r) = is;
        xhat.row(r) = (X.row(r).array() - mean) * is;
    }
    Tensor out_v = (xhat.array().rowwise() * value(gain).row(0).array()).rowwise() +
                   value(shift).row(0).array();
    bool ng = nodes_[size_t(a.id)].needs_grad || nodes_[size_t(gain.id)].needs_grad ||
              nodes_[size_t(shift.id)].needs_grad;
    int out = push(std::move(out_v), ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, gain, shift, out, xhat, inv_std, n]() {
        const Tensor& g = nodes_[size_t(out)].grad;
        if (nodes_[size_t(gain.id)].needs_grad) {
            grad_ref(gain.id).row(0) += g.cwiseProduct(xhat).colwise().sum();
        }
        if (nodes_[size_t(shift.id)].needs_grad) {
            grad_ref(shift.id).row(0) += g.colwise().sum();
        }
        if (nodes_[size_t(a.id)].needs_grad) {
            const Eigen::RowVectorXd gv = nodes_[size_t(gain.id)].value.row(0);
            Tensor& ga = grad_ref(a.id);
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                Eigen::RowVectorXd dxhat = g.row(r).cwiseProduct(gv);
                const double m1 = dxhat.mean();
                const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
                ga.row(r) +=
                    inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
            }
        }
    };
    return {out};
}

Var Tape::softmax_rows(Var a) {
    const Tensor& X = value(a);
    Tensor P(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        Eigen::RowVectorXd e = (X.row(r).array() - X.row(r).maxCoeff()).exp();
        P.row(r) = e / e.sum();
    }
    bool ng = nodes_[size_t(a.id)].needs_grad;
    int out = push(std::move(P), ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, out]() {
        if (!nodes_[size_t(a.id)].needs_grad) return;
        const Tensor& P = nodes_[size_t(out)].value;
        const Tensor& g = nodes_[size_t(out)].grad;
        Tensor& ga = grad_ref(a.id);
        for (Eigen::Index r = 0; r < P.rows(); ++r) {
            const double dot = g.row(r).dot(P.row(r));
            ga.row(r) += (g.row(r).array() - dot).matrix().cwiseProduct(P.row(r));
        }
    };
    return {out};
}

Var Tape::cross_entropy_sum(Var logits, const std::vector<int>& targets) {
    const Tensor& X = value(logits);
    if (Eigen::Index(targets.size()) != X.rows()) {
        throw std::invalid_argument("cross_entropy_sum: one target per row required");
    }
    Tensor P(X.rows(), X.cols());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const int t = targets[size_t(r)];
        if (t < 0 || t >= X.cols()) {
            throw std::invalid_argument("cross_entropy_sum: target index out of range");
        }
        const double mx = X.row(r).maxCoeff();
        Eigen::RowVectorXd e = (X.row(r).array() - mx).exp();
        const double z = e.sum();
        P.row(r) = e / z;
        loss += -(X(r, t) - mx - std::log(z));
    }
    Tensor v(1, 1);
    v(0, 0) = loss;
    bool ng = nodes_[size_t(logits.id)].needs_grad;
    int out = push(std::move(v), ng, nullptr);
    nodes_[size_t(out)].pull = [this, logits, out, P, targets]() {
        if (!nodes_[size_t(logits.id)].needs_grad) return;
        const double up = nodes_[size_t(out)].grad(0, 0);
        Tensor d = P;
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            d(r, targets[size_t(r)]) -= 1.0;
        }
        grad_ref(logits.id) += up * d;
    };
    return {out};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_cols: no parts");
    }
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    bool ng = false;
    for (Var p : parts) {
        if (value(p).rows() != rows) {
            throw std::invalid_argument("concat_cols: row counts disagree");
        }
        cols += value(p).cols();
        ng = ng || nodes_[size_t(p.id)].needs_grad;
    }
    Tensor out_v(rows, cols);
    Eigen::Index off = 0;
    for (Var p : parts) {
        out_v.middleCols(off, value(p).cols()) = value(p);
        off += value(p).cols();
    }
    int out = push(std::move(out_v), ng, nullptr);
    std::vector<Var> ps = parts;
    nodes_[size_t(out)].pull = [this, ps, out]() {
        const Tensor& g = nodes_[size_t(out)].grad;
        Eigen::Index off = 0;
        for (Var p : ps) {
            const Eigen::Index w = nodes_[size_t(p.id)].value.cols();
            if (nodes_[size_t(p.id)].needs_grad) {
                grad_ref(p.id) += g.middleCols(off, w);
            }
            off += w;
        }
    };
    return {out};
}

Var Tape::transpose(Var a) {
    bool ng = nodes_[size_t(a.id)].needs_grad;
    int out = push(value(a).transpose(), ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, out]() {
        if (nodes_[size_t(a.id)].needs_grad) {
            grad_ref(a.id) += nodes_[size_t(out)].grad.transpose();
        }
    };
    return {out};
}

Var Tape::repeat_row(Var a, int rows) {
    const Tensor& A = value(a);
    if (A.rows() != 1) {
        throw std::invalid_argument("repeat_row: input must be a single row");
    }
    Tensor out_v(rows, A.cols());
    out_v.rowwise() = A.row(0);
    bool ng = nodes_[size_t(a.id)].needs_grad;
    int out = push(std::move(out_v), ng, nullptr);
    nodes_[size_t(out)].pull = [this, a, out]() {
        if (nodes_[size_t(a.id)].needs_grad) {
            grad_ref(a.id).row(0) += nodes_[size_t(out)].grad.colwise().sum();
        }
    };
    return {out};
}

void Tape::backward(Var root) {
    Node& r = nodes_[size_t(root.id)];
    if (r.value.rows() != 1 || r.value.cols() != 1) {
        throw std::invalid_argument("backward: root must be a 1 x 1 scalar");
    }
    grad_ref(root.id)(0, 0) = 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[size_t(i)];
        // A node whose grad was never written has no downstream consumer on
        // this tape (or sits past the root); there is nothing to propagate.
        if (n.needs_grad && n.pull && n.grad.size() != 0) {
            n.pull();
        }
    }
}

} // namespace mimolab
