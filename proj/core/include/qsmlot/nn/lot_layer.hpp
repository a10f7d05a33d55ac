#pragma once

#include <cmath>
#include <vector>

#include "qsmlot/nn/config.hpp"
#include "qsmlot/nn/ops.hpp"
#include "qsmlot/phase.hpp"
#include "qsmlot/rng.hpp"

namespace qsmlot::nn {

// The LoT layer: per output channel c,
//   out_c = [cos(phi) * (K_c * sin(phi)) - sin(phi) * (K_c * cos(phi))] / (B0 * TE).
// Fixed mode holds one frozen kernel bit-equal to the canonical 27-point
// stencil; learnable mode holds `kernels` trainable 3x3x3 kernels (16 in
// the standard configuration), each initialized at the canonical stencil
// plus small noise. The phase input is the network input, so no gradient
// with respect to it is produced.
template <class T>
class LotLayer {
 public:
  LotLayer() = default;
  LotLayer(LotMode mode, int kernels) : mode_(mode) {
    const int n_k = mode == LotMode::fixed ? 1 : kernels;
    kernels_.resize("lot.kernels", {n_k, 1, 3, 3, 3}, mode == LotMode::learnable);
    const auto canonical = LaplacianStencil::canonical27();
    for (int k = 0; k < n_k; ++k) {
      for (int i = 0; i < 27; ++i) {
        kernels_.value[static_cast<std::size_t>(k * 27 + i)] =
            static_cast<T>(canonical.weights[static_cast<std::size_t>(i)]);
      }
    }
  }

  void init(Rng& rng, double std) {
    if (mode_ == LotMode::fixed) return;  // frozen at the canonical stencil
    for (auto& v : kernels_.value) v += static_cast<T>(rng.normal(0.0, std));
  }

  int out_channels() const { return static_cast<int>(kernels_.shape[0]); }
  LotMode mode() const { return mode_; }

  // te_s: one echo time per batch element.
  Tensor5<T> forward(const Tensor5<T>& phase, const std::vector<double>& te_s, double b0_tesla) {
    if (phase.c != 1) throw StructuralError("LotLayer: expected a single input channel");
    if (static_cast<int>(te_s.size()) != phase.n) {
      throw StructuralError("LotLayer: one TE per batch element required");
    }
    if (!(b0_tesla > 0.0)) throw DomainError("LotLayer: B0 must be positive");
    for (double te : te_s) {
      if (!(te > 0.0)) throw DomainError("LotLayer: TE must be positive");
    }

    sin_ = Tensor5<T>(phase.n, 1, phase.nx, phase.ny, phase.nz);
    cos_ = Tensor5<T>(phase.n, 1, phase.nx, phase.ny, phase.nz);
    for (std::int64_t i = 0; i < phase.size(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      sin_.data[ii] = static_cast<T>(std::sin(static_cast<double>(phase.data[ii])));
      cos_.data[ii] = static_cast<T>(std::cos(static_cast<double>(phase.data[ii])));
    }
    inv_scale_.resize(te_s.size());
    for (std::size_t i = 0; i < te_s.size(); ++i) {
      inv_scale_[i] = 1.0 / (b0_tesla * te_s[i]);
    }

    const int n_k = out_channels();
    Tensor5<T> k_sin, k_cos;
    conv3_same_forward(sin_, kernels_.value.data(), static_cast<const T*>(nullptr), n_k, 3, k_sin);
    conv3_same_forward(cos_, kernels_.value.data(), static_cast<const T*>(nullptr), n_k, 3, k_cos);

    Tensor5<T> out(phase.n, n_k, phase.nx, phase.ny, phase.nz);
    for (int bn = 0; bn < phase.n; ++bn) {
      const T* s = sin_.slice(bn, 0);
      const T* c = cos_.slice(bn, 0);
      const T inv = static_cast<T>(inv_scale_[static_cast<std::size_t>(bn)]);
      for (int ch = 0; ch < n_k; ++ch) {
        const T* ks = k_sin.slice(bn, ch);
        const T* kc = k_cos.slice(bn, ch);
        T* o = out.slice(bn, ch);
        for (std::int64_t i = 0; i < out.spatial(); ++i) {
          o[i] = (c[i] * ks[i] - s[i] * kc[i]) * inv;
        }
      }
    }
    return out;
  }

  // Accumulates kernel gradients (learnable mode); the phase input receives
  // none by design.
  void backward(const Tensor5<T>& grad_out) {
    if (mode_ == LotMode::fixed) return;
    const int n_k = out_channels();
    // d out_c / d K_c distributes through the two correlations:
    //   dK_c += corr_wgrad(sin, cos .* g_c / (B0 TE)) - corr_wgrad(cos, sin .* g_c / (B0 TE))
    Tensor5<T> g_cos(grad_out.n, n_k, grad_out.nx, grad_out.ny, grad_out.nz);
    Tensor5<T> g_sin(grad_out.n, n_k, grad_out.nx, grad_out.ny, grad_out.nz);
    for (int bn = 0; bn < grad_out.n; ++bn) {
      const T* s = sin_.slice(bn, 0);
      const T* c = cos_.slice(bn, 0);
      const T inv = static_cast<T>(inv_scale_[static_cast<std::size_t>(bn)]);
      for (int ch = 0; ch < n_k; ++ch) {
        const T* g = grad_out.slice(bn, ch);
        T* gc = g_cos.slice(bn, ch);
        T* gs = g_sin.slice(bn, ch);
        for (std::int64_t i = 0; i < grad_out.spatial(); ++i) {
          gc[i] = c[i] * g[i] * inv;
          gs[i] = s[i] * g[i] * inv;
        }
      }
    }
    conv3_same_backward_weight(sin_, g_cos, 3, kernels_.grad.data(), static_cast<T*>(nullptr));
    // Subtract the second term by negating its grad contribution.
    std::vector<T> tmp(kernels_.grad.size(), T(0));
    conv3_same_backward_weight(cos_, g_sin, 3, tmp.data(), static_cast<T*>(nullptr));
    for (std::size_t i = 0; i < tmp.size(); ++i) kernels_.grad[i] -= tmp[i];
  }

  Param<T>& kernels() { return kernels_; }
  void collect(std::vector<Param<T>*>& out) { out.push_back(&kernels_); }

 private:
  LotMode mode_ = LotMode::fixed;
  Param<T> kernels_;
  Tensor5<T> sin_, cos_;
  std::vector<double> inv_scale_;
};

}  // namespace qsmlot::nn
