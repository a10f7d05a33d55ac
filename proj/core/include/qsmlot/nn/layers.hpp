#pragma once

#include <cmath>
#include <string>

#include "qsmlot/nn/ops.hpp"
#include "qsmlot/rng.hpp"

namespace qsmlot::nn {

// Convolutions that feed a batch-norm layer run bias-free: a constant
// channel shift is removed by the normalization, so the bias would be a
// degenerate (zero-gradient) parameter.
template <class T>
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(std::string name, int cin, int cout, int ksize, bool with_bias = true)
      : cin_(cin), cout_(cout), ksize_(ksize), with_bias_(with_bias) {
    weight_.resize(name + ".weight", {cout, cin, ksize, ksize, ksize});
    if (with_bias_) bias_.resize(name + ".bias", {cout});
  }

  void init(Rng& rng, double std) {
    for (auto& v : weight_.value) v = static_cast<T>(rng.normal(0.0, std));
    for (auto& v : bias_.value) v = static_cast<T>(rng.normal(0.0, std));
  }

  Tensor5<T> forward(const Tensor5<T>& x) {
    if (x.c != cin_) throw StructuralError(weight_.name + ": channel mismatch");
    input_ = x;
    Tensor5<T> out;
    conv3_same_forward(x, weight_.value.data(), with_bias_ ? bias_.value.data() : nullptr, cout_,
                       ksize_, out);
    return out;
  }

  Tensor5<T> backward(const Tensor5<T>& grad_out) {
    conv3_same_backward_weight(input_, grad_out, ksize_, weight_.grad.data(),
                               with_bias_ ? bias_.grad.data() : nullptr);
    Tensor5<T> grad_in;
    conv3_same_backward_data(grad_out, weight_.value.data(), cin_, ksize_, grad_in);
    return grad_in;
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&weight_);
    if (with_bias_) out.push_back(&bias_);
  }

 private:
  int cin_ = 0, cout_ = 0, ksize_ = 3;
  bool with_bias_ = true;
  Param<T> weight_, bias_;
  Tensor5<T> input_;
};

template <class T>
class ConvTranspose3d {
 public:
  ConvTranspose3d() = default;
  ConvTranspose3d(std::string name, int cin, int cout, bool with_bias = true)
      : cin_(cin), cout_(cout), with_bias_(with_bias) {
    weight_.resize(name + ".weight", {cin, cout, 2, 2, 2});
    if (with_bias_) bias_.resize(name + ".bias", {cout});
  }

  void init(Rng& rng, double std) {
    for (auto& v : weight_.value) v = static_cast<T>(rng.normal(0.0, std));
    for (auto& v : bias_.value) v = static_cast<T>(rng.normal(0.0, std));
  }

  Tensor5<T> forward(const Tensor5<T>& x) {
    if (x.c != cin_) throw StructuralError(weight_.name + ": channel mismatch");
    input_ = x;
    Tensor5<T> out;
    upconv2_forward(x, weight_.value.data(), with_bias_ ? bias_.value.data() : nullptr, cout_, out);
    return out;
  }

  Tensor5<T> backward(const Tensor5<T>& grad_out) {
    Tensor5<T> grad_in;
    upconv2_backward(input_, grad_out, weight_.value.data(), grad_in, weight_.grad.data(),
                     with_bias_ ? bias_.grad.data() : nullptr);
    return grad_in;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&weight_);
    if (with_bias_) out.push_back(&bias_);
  }

 private:
  int cin_ = 0, cout_ = 0;
  bool with_bias_ = true;
  Param<T> weight_, bias_;
  Tensor5<T> input_;
};

// Batch normalization over (batch, spatial) per channel. Training mode uses
// batch statistics and updates running estimates (biased batch variance for
// normalization, unbiased for the running estimate); eval mode uses the
// frozen running statistics.
template <class T>
class BatchNorm3d {
 public:
  BatchNorm3d() = default;
  BatchNorm3d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5)
      : channels_(channels), momentum_(momentum), eps_(eps) {
    gamma_.resize(name + ".gamma", {channels});
    beta_.resize(name + ".beta", {channels});
    running_mean_.assign(static_cast<std::size_t>(channels), 0.0);
    running_var_.assign(static_cast<std::size_t>(channels), 1.0);
    std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  }

  Tensor5<T> forward(const Tensor5<T>& x, bool train) {
    if (x.c != channels_) throw StructuralError(gamma_.name + ": channel mismatch");
    input_ = x;
    train_mode_ = train;
    const std::int64_t per_ch = static_cast<std::int64_t>(x.n) * x.spatial();
    mean_.assign(static_cast<std::size_t>(channels_), 0.0);
    var_.assign(static_cast<std::size_t>(channels_), 0.0);
    if (train) {
      for (int ch = 0; ch < channels_; ++ch) {
        double m = 0.0;
        for (int bn = 0; bn < x.n; ++bn) {
          const T* s = x.slice(bn, ch);
          for (std::int64_t i = 0; i < x.spatial(); ++i) m += static_cast<double>(s[i]);
        }
        m /= static_cast<double>(per_ch);
        double v = 0.0;
        for (int bn = 0; bn < x.n; ++bn) {
          const T* s = x.slice(bn, ch);
          for (std::int64_t i = 0; i < x.spatial(); ++i) {
            const double d = static_cast<double>(s[i]) - m;
            v += d * d;
          }
        }
        v /= static_cast<double>(per_ch);
        mean_[static_cast<std::size_t>(ch)] = m;
        var_[static_cast<std::size_t>(ch)] = v;
        const double unbiased = per_ch > 1 ? v * per_ch / (per_ch - 1) : v;
        running_mean_[static_cast<std::size_t>(ch)] =
            (1.0 - momentum_) * running_mean_[static_cast<std::size_t>(ch)] + momentum_ * m;
        running_var_[static_cast<std::size_t>(ch)] =
            (1.0 - momentum_) * running_var_[static_cast<std::size_t>(ch)] + momentum_ * unbiased;
      }
    } else {
      mean_ = running_mean_;
      var_ = running_var_;
    }

    Tensor5<T> out(x.n, x.c, x.nx, x.ny, x.nz);
    xhat_ = Tensor5<T>(x.n, x.c, x.nx, x.ny, x.nz);
    for (int ch = 0; ch < channels_; ++ch) {
      const double inv_sd = 1.0 / std::sqrt(var_[static_cast<std::size_t>(ch)] + eps_);
      const double g = static_cast<double>(gamma_.value[static_cast<std::size_t>(ch)]);
      const double b = static_cast<double>(beta_.value[static_cast<std::size_t>(ch)]);
      const double m = mean_[static_cast<std::size_t>(ch)];
      for (int bn = 0; bn < x.n; ++bn) {
        const T* s = x.slice(bn, ch);
        T* xh = xhat_.slice(bn, ch);
        T* o = out.slice(bn, ch);
        for (std::int64_t i = 0; i < x.spatial(); ++i) {
          const double h = (static_cast<double>(s[i]) - m) * inv_sd;
          xh[i] = static_cast<T>(h);
          o[i] = static_cast<T>(g * h + b);
        }
      }
    }
    return out;
  }

  Tensor5<T> backward(const Tensor5<T>& grad_out) {
    const Tensor5<T>& x = input_;
    const std::int64_t per_ch = static_cast<std::int64_t>(x.n) * x.spatial();
    Tensor5<T> grad_in(x.n, x.c, x.nx, x.ny, x.nz);
    for (int ch = 0; ch < channels_; ++ch) {
      const double inv_sd = 1.0 / std::sqrt(var_[static_cast<std::size_t>(ch)] + eps_);
      const double g = static_cast<double>(gamma_.value[static_cast<std::size_t>(ch)]);
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int bn = 0; bn < x.n; ++bn) {
        const T* dy = grad_out.slice(bn, ch);
        const T* xh = xhat_.slice(bn, ch);
        for (std::int64_t i = 0; i < x.spatial(); ++i) {
          sum_dy += static_cast<double>(dy[i]);
          sum_dy_xhat += static_cast<double>(dy[i]) * static_cast<double>(xh[i]);
        }
      }
      gamma_.grad[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy_xhat);
      beta_.grad[static_cast<std::size_t>(ch)] += static_cast<T>(sum_dy);

      for (int bn = 0; bn < x.n; ++bn) {
        const T* dy = grad_out.slice(bn, ch);
        const T* xh = xhat_.slice(bn, ch);
        T* dx = grad_in.slice(bn, ch);
        if (train_mode_) {
          const double n = static_cast<double>(per_ch);
          for (std::int64_t i = 0; i < x.spatial(); ++i) {
            const double v = g * inv_sd *
                             (static_cast<double>(dy[i]) - sum_dy / n -
                              static_cast<double>(xh[i]) * sum_dy_xhat / n);
            dx[i] = static_cast<T>(v);
          }
        } else {
          for (std::int64_t i = 0; i < x.spatial(); ++i) {
            dx[i] = static_cast<T>(g * inv_sd * static_cast<double>(dy[i]));
          }
        }
      }
    }
    return grad_in;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }
  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }

 private:
  int channels_ = 0;
  double momentum_ = 0.1, eps_ = 1e-5;
  bool train_mode_ = true;
  Param<T> gamma_, beta_;
  std::vector<double> running_mean_, running_var_;
  std::vector<double> mean_, var_;
  Tensor5<T> input_, xhat_;
};

template <class T>
class Relu {
 public:
  Tensor5<T> forward(const Tensor5<T>& x) {
    mask_.assign(static_cast<std::size_t>(x.size()), 0);
    Tensor5<T> out(x.n, x.c, x.nx, x.ny, x.nz);
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      if (x.data[ii] > T(0)) {
        out.data[ii] = x.data[ii];
        mask_[ii] = 1;
      }
    }
    return out;
  }
  Tensor5<T> backward(const Tensor5<T>& grad_out) {
    Tensor5<T> grad_in(grad_out.n, grad_out.c, grad_out.nx, grad_out.ny, grad_out.nz);
    for (std::int64_t i = 0; i < grad_out.size(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      grad_in.data[ii] = mask_[ii] ? grad_out.data[ii] : T(0);
    }
    return grad_in;
  }

 private:
  std::vector<std::uint8_t> mask_;
};

template <class T>
class MaxPool3d {
 public:
  Tensor5<T> forward(const Tensor5<T>& x) {
    n_ = x.n; c_ = x.c; nx_ = x.nx; ny_ = x.ny; nz_ = x.nz;
    Tensor5<T> out;
    maxpool2_forward(x, out, argmax_);
    return out;
  }
  Tensor5<T> backward(const Tensor5<T>& grad_out) {
    Tensor5<T> grad_in(n_, c_, nx_, ny_, nz_);
    maxpool2_backward(grad_out, argmax_, grad_in);
    return grad_in;
  }

 private:
  int n_ = 0, c_ = 0, nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<std::int64_t> argmax_;
};

}  // namespace qsmlot::nn
