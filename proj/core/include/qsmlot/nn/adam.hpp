#pragma once

#include <cmath>
#include <vector>

#include "qsmlot/nn/tensor.hpp"

namespace qsmlot::nn {

// Adam with the optimizer's standard defaults (beta1 0.9, beta2 0.999,
// eps 1e-8); the learning rate follows the staged schedule and is passed
// per step. Frozen parameters are skipped.
template <class T>
class Adam {
 public:
  explicit Adam(const std::vector<Param<T>*>& params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), 0.0);
      v_[i].assign(params[i]->value.size(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t p = 0; p < params_.size(); ++p) {
      Param<T>* par = params_[p];
      if (!par->trainable) continue;
      for (std::size_t i = 0; i < par->value.size(); ++i) {
        const double g = static_cast<double>(par->grad[i]);
        m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g;
        v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[p][i] / bc1;
        const double vhat = v_[p][i] / bc2;
        par->value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

 private:
  std::vector<Param<T>*> params_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace qsmlot::nn
