#include "mimolab/params.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace mimolab {

int ParamStore::add(const std::string& name, Tensor value) {
    if (index_.count(name)) {
        throw std::invalid_argument("ParamStore::add: duplicate name " + name);
    }
    const int id = int(names_.size());
    names_.push_back(name);
    index_[name] = id;
    grads_.push_back(Tensor::Zero(value.rows(), value.cols()));
    m_.push_back(Tensor::Zero(value.rows(), value.cols()));
    v_.push_back(Tensor::Zero(value.rows(), value.cols()));
    values_.push_back(std::move(value));
    return id;
}

int ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::invalid_argument("ParamStore: unknown parameter " + name);
    }
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& g : grads_) {
        g.setZero();
    }
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, double(step_));
    const double bc2 = 1.0 - std::pow(beta2, double(step_));
    for (size_t i = 0; i < values_.size(); ++i) {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * grads_[i];
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * grads_[i].cwiseProduct(grads_[i]);
        values_[i].array() -= lr * (m_[i].array() / bc1) /
                              ((v_[i].array() / bc2).sqrt() + eps);
        grads_[i].setZero();
    }
}

int64_t ParamStore::scalar_count() const {
    int64_t n = 0;
    for (const auto& v : values_) {
        n += v.size();
    }
    return n;
}

GradCheckReport grad_check(ParamStore& store,
                           const std::function<double(ParamStore&)>& loss_of_params,
                           int coordinates, uint64_t seed) {
    // Flatten (tensor, element) coordinates and sample without replacement
    // when the request exceeds the total count.
    struct Coord {
        int tensor;
        Eigen::Index elem;
    };
    const int64_t total = store.scalar_count();
    std::vector<Coord> coords;
    Rng rng(Rng::mix(seed));
    if (int64_t(coordinates) >= total) {
        for (int t = 0; t < store.count(); ++t) {
            for (Eigen::Index e = 0; e < store.value(t).size(); ++e) {
                coords.push_back({t, e});
            }
        }
    } else {
        for (int k = 0; k < coordinates; ++k) {
            int64_t flat = int64_t(rng.uniform_int(uint64_t(total)));
            for (int t = 0; t < store.count(); ++t) {
                if (flat < store.value(t).size()) {
                    coords.push_back({t, Eigen::Index(flat)});
                    break;
                }
                flat -= store.value(t).size();
            }
        }
    }

    GradCheckReport report;
    report.coordinates_checked = int(coords.size());
    for (const Coord& c : coords) {
        double& theta = store.value(c.tensor).data()[c.elem];
        const double saved = theta;
        const double h = 1e-6 * std::max(1.0, std::abs(saved));
        theta = saved + h;
        const double lp = loss_of_params(store);
        theta = saved - h;
        const double lm = loss_of_params(store);
        theta = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = store.grad(c.tensor).data()[c.elem];
        // The denominator floor absorbs central-difference roundoff
        // (~eps * |loss| / h ~ 1e-10 for unit-scale losses): coordinates whose
        // true gradient sits below that noise cannot be measured relatively.
        const double rel = std::abs(fd - an) / std::max({1e-5, std::abs(fd), std::abs(an)});
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coordinate =
                store.name(c.tensor) + "[" + std::to_string(c.elem) + "]";
        }
    }
    return report;
}

} // namespace mimolab
