#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mimolab/tensor.hpp"

namespace mimolab {

// Named parameter tensors with matching gradient accumulators and Adam moment
// buffers. Names keep insertion order, which pins checkpoint layout and the
// coordinate ordering used by grad_check.
class ParamStore {
  public:
    int add(const std::string& name, Tensor value);

    int index_of(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    int count() const { return int(names_.size()); }
    const std::string& name(int i) const { return names_[size_t(i)]; }

    Tensor& value(int i) { return values_[size_t(i)]; }
    const Tensor& value(int i) const { return values_[size_t(i)]; }
    Tensor& value(const std::string& name) { return values_[size_t(index_of(name))]; }
    const Tensor& value(const std::string& name) const {
        return values_[size_t(index_of(name))];
    }
    Tensor& grad(int i) { return grads_[size_t(i)]; }
    Tensor& adam_m(int i) { return m_[size_t(i)]; }
    Tensor& adam_v(int i) { return v_[size_t(i)]; }

    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }

    void zero_grads();

    // Bias-corrected Adam update in place; gradients are zeroed afterward.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    // Total scalar count across all tensors.
    int64_t scalar_count() const;

  private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<Tensor> values_, grads_, m_, v_;
    int64_t step_ = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_coordinate;
    int coordinates_checked = 0;
};

// Compares the analytic gradient already stored in `store` (for the loss
// closure `loss_of_params`) against central finite differences at a sampled
// subset of coordinates. `loss_of_params` must recompute the scalar loss from
// the current parameter values without touching gradients.
GradCheckReport grad_check(ParamStore& store,
                           const std::function<double(ParamStore&)>& loss_of_params,
                           int coordinates, uint64_t seed);

} // namespace mimolab
