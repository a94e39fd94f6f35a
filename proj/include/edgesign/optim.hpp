#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "edgesign/tensor.hpp"

namespace edgesign {

// Adam with bias correction. Moment buffers live here, one pair per
// registered parameter; step() consumes the populated grads and zeroes them.
template <typename T>
class Adam {
 public:
  struct Hyper {
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(std::vector<Tensor<T>> params, Hyper hyper = {})
      : hyper_(hyper), params_(std::move(params)) {
    for (const auto& p : params_) {
      if (!p.requires_grad()) {
        throw TensorError("Adam: parameter does not require grad");
      }
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  std::int64_t step_count() const { return step_; }
  const Hyper& hyper() const { return hyper_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const {
    return v_[i];
  }

  void step() {
    for (const auto& p : params_) {
      if (!p.has_grad()) {
        throw TensorError("Adam: parameter is missing its gradient");
      }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, double(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto values = params_[k].values_mut();
      auto grads = params_[k].grad();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grads[i];
        m_[k][i] = hyper_.beta1 * m_[k][i] + (1.0 - hyper_.beta1) * g;
        v_[k][i] = hyper_.beta2 * v_[k][i] + (1.0 - hyper_.beta2) * g * g;
        const double m_hat = m_[k][i] / bc1;
        const double v_hat = v_[k][i] / bc2;
        values[i] = static_cast<T>(
            double(values[i]) -
            hyper_.lr * m_hat / (std::sqrt(v_hat) + hyper_.eps));
      }
      params_[k].zero_grad();
    }
  }

 private:
  Hyper hyper_;
  std::int64_t step_ = 0;
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace edgesign
