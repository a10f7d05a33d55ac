#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qsmlot/nn/layers.hpp"
#include "qsmlot/nn/lot_layer.hpp"

namespace qsmlot::nn {

template <class T>
struct ConvBnRelu {
  Conv3d<T> conv;
  BatchNorm3d<T> bn;
  Relu<T> relu;

  ConvBnRelu() = default;
  ConvBnRelu(const std::string& name, int cin, int cout, int ksize)
      : conv(name + ".conv", cin, cout, ksize, /*with_bias=*/false), bn(name + ".bn", cout) {}

  Tensor5<T> forward(const Tensor5<T>& x, bool train) {
    return relu.forward(bn.forward(conv.forward(x), train));
  }
  Tensor5<T> backward(const Tensor5<T>& g) {
    return conv.backward(bn.backward(relu.backward(g)));
  }
  void init(Rng& rng, double std) { conv.init(rng, std); }
  void collect(std::vector<Param<T>*>& out) {
    conv.collect(out);
    bn.collect(out);
  }
};

template <class T>
struct UpBnRelu {
  ConvTranspose3d<T> up;
  BatchNorm3d<T> bn;
  Relu<T> relu;

  UpBnRelu() = default;
  UpBnRelu(const std::string& name, int cin, int cout)
      : up(name + ".up", cin, cout, /*with_bias=*/false), bn(name + ".bn", cout) {}

  Tensor5<T> forward(const Tensor5<T>& x, bool train) {
    return relu.forward(bn.forward(up.forward(x), train));
  }
  Tensor5<T> backward(const Tensor5<T>& g) {
    return up.backward(bn.backward(relu.backward(g)));
  }
  void init(Rng& rng, double std) { up.init(rng, std); }
  void collect(std::vector<Param<T>*>& out) {
    up.collect(out);
    bn.collect(out);
  }
};

// Residual 3D U-Net: per level two conv(+BN+ReLU) blocks and a 2x2x2 max
// pool, a two-block bottleneck, then per level a transposed conv(+BN+ReLU),
// a skip concatenation and two more conv blocks; a final 1x1x1 convolution;
// and a skip connection from the network input to the output.
//
// When the input and output channel counts differ (learnable LoT mode), the
// residual skip adds the channel mean of the input.
template <class T>
class UNet {
 public:
  UNet() = default;
  explicit UNet(const UnetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    int ch = cfg.base_channels;
    int cin = cfg.in_channels;
    for (int d = 0; d < cfg.depth; ++d) {
      const std::string base = "enc" + std::to_string(d);
      enc_.emplace_back(base + "a", cin, ch, 3);
      enc_.emplace_back(base + "b", ch, ch, 3);
      pools_.emplace_back();
      cin = ch;
      ch *= 2;
    }
    bott_a_ = ConvBnRelu<T>("bottleneck_a", cin, ch, 3);
    bott_b_ = ConvBnRelu<T>("bottleneck_b", ch, ch, 3);
    int prev = ch;
    for (int d = cfg.depth - 1; d >= 0; --d) {
      const int skip_ch = cfg.base_channels * (1 << d);
      const std::string base = "dec" + std::to_string(d);
      ups_.emplace_back(base + "_up", prev, skip_ch);
      dec_.emplace_back(base + "a", 2 * skip_ch, skip_ch, 3);
      dec_.emplace_back(base + "b", skip_ch, skip_ch, 3);
      prev = skip_ch;
    }
    final_ = Conv3d<T>("final", prev, cfg.out_channels, 1);
    skip_grads_.resize(static_cast<std::size_t>(cfg.depth));
  }

  void init(Rng& rng, double std) {
    for (auto& b : enc_) b.init(rng, std);
    bott_a_.init(rng, std);
    bott_b_.init(rng, std);
    for (auto& u : ups_) u.init(rng, std);
    for (auto& b : dec_) b.init(rng, std);
    final_.init(rng, std);
  }

  Tensor5<T> forward(const Tensor5<T>& x, bool train) {
    if (x.c != cfg_.in_channels) throw StructuralError("unet: input channel mismatch");
    const int div = 1 << cfg_.depth;
    if (x.nx % div || x.ny % div || x.nz % div) {
      throw StructuralError("unet: spatial dims must be divisible by 2^depth = " +
                            std::to_string(div) + "; pad the input (zero padding, crop back)");
    }
    input_ = x;
    skips_.clear();
    Tensor5<T> h = x;
    for (int d = 0; d < cfg_.depth; ++d) {
      h = enc_[static_cast<std::size_t>(2 * d)].forward(h, train);
      h = enc_[static_cast<std::size_t>(2 * d + 1)].forward(h, train);
      skips_.push_back(h);
      h = pools_[static_cast<std::size_t>(d)].forward(h);
    }
    h = bott_a_.forward(h, train);
    h = bott_b_.forward(h, train);
    for (int i = 0; i < cfg_.depth; ++i) {
      const int d = cfg_.depth - 1 - i;
      h = ups_[static_cast<std::size_t>(i)].forward(h, train);
      h = concat_channels(skips_[static_cast<std::size_t>(d)], h);
      h = dec_[static_cast<std::size_t>(2 * i)].forward(h, train);
      h = dec_[static_cast<std::size_t>(2 * i + 1)].forward(h, train);
    }
    h = final_.forward(h);

    // Residual input -> output skip.
    if (cfg_.in_channels == cfg_.out_channels) {
      for (std::int64_t i = 0; i < h.size(); ++i) {
        h.data[static_cast<std::size_t>(i)] += x.data[static_cast<std::size_t>(i)];
      }
    } else if (cfg_.out_channels == 1) {
      const T inv = static_cast<T>(1.0 / cfg_.in_channels);
      for (int bn = 0; bn < x.n; ++bn) {
        T* o = h.slice(bn, 0);
        for (int ch = 0; ch < x.c; ++ch) {
          const T* s = x.slice(bn, ch);
          for (std::int64_t i = 0; i < x.spatial(); ++i) o[i] += s[i] * inv;
        }
      }
    } else {
      throw StructuralError("unet: residual skip needs in_channels == out_channels or out_channels == 1");
    }
    return h;
  }

  // Gradient with respect to the network input (the residual path included).
  Tensor5<T> backward(const Tensor5<T>& grad_out) {
    Tensor5<T> g = final_.backward(grad_out);
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      const int d = cfg_.depth - 1 - i;
      g = dec_[static_cast<std::size_t>(2 * i + 1)].backward(g);
      g = dec_[static_cast<std::size_t>(2 * i)].backward(g);
      Tensor5<T> g_skip, g_up;
      split_channels(g, skips_[static_cast<std::size_t>(d)].c, g_skip, g_up);
      g = ups_[static_cast<std::size_t>(i)].backward(g_up);
      skip_grads_[static_cast<std::size_t>(d)] = std::move(g_skip);
    }
    g = bott_b_.backward(g);
    g = bott_a_.backward(g);
    for (int d = cfg_.depth - 1; d >= 0; --d) {
      g = pools_[static_cast<std::size_t>(d)].backward(g);
      for (std::int64_t i = 0; i < g.size(); ++i) {
        g.data[static_cast<std::size_t>(i)] +=
            skip_grads_[static_cast<std::size_t>(d)].data[static_cast<std::size_t>(i)];
      }
      g = enc_[static_cast<std::size_t>(2 * d + 1)].backward(g);
      g = enc_[static_cast<std::size_t>(2 * d)].backward(g);
    }
    // Residual path.
    if (cfg_.in_channels == cfg_.out_channels) {
      for (std::int64_t i = 0; i < g.size(); ++i) {
        g.data[static_cast<std::size_t>(i)] += grad_out.data[static_cast<std::size_t>(i)];
      }
    } else {
      const T inv = static_cast<T>(1.0 / cfg_.in_channels);
      for (int bn = 0; bn < g.n; ++bn) {
        const T* go = grad_out.slice(bn, 0);
        for (int ch = 0; ch < g.c; ++ch) {
          T* gi = g.slice(bn, ch);
          for (std::int64_t i = 0; i < g.spatial(); ++i) gi[i] += go[i] * inv;
        }
      }
    }
    return g;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& b : enc_) b.collect(out);
    bott_a_.collect(out);
    bott_b_.collect(out);
    for (auto& u : ups_) u.collect(out);
    for (auto& b : dec_) b.collect(out);
    final_.collect(out);
    return out;
  }

  const UnetConfig& config() const { return cfg_; }

  // Running statistics for checkpointing, in declaration order of the
  // batch-norm layers.
  std::vector<BatchNorm3d<T>*> batchnorms() {
    std::vector<BatchNorm3d<T>*> out;
    for (auto& b : enc_) out.push_back(&b.bn);
    out.push_back(&bott_a_.bn);
    out.push_back(&bott_b_.bn);
    for (auto& u : ups_) out.push_back(&u.bn);
    for (auto& b : dec_) out.push_back(&b.bn);
    return out;
  }

 private:
  UnetConfig cfg_;
  std::vector<ConvBnRelu<T>> enc_;
  std::vector<MaxPool3d<T>> pools_;
  ConvBnRelu<T> bott_a_, bott_b_;
  std::vector<UpBnRelu<T>> ups_;
  std::vector<ConvBnRelu<T>> dec_;
  Conv3d<T> final_;
  Tensor5<T> input_;
  std::vector<Tensor5<T>> skips_;
  std::vector<Tensor5<T>> skip_grads_;
};

// LoT layer followed by the residual U-Net.
template <class T>
class LotUnet {
 public:
  LotUnet() = default;
  explicit LotUnet(const LotUnetConfig& cfg)
      : cfg_(cfg), lot_(cfg.lot_mode, cfg.lot_kernels), unet_(cfg.unet) {
    cfg.validate();
  }

  void init(Rng& rng, double std) {
    lot_.init(rng, std);
    unet_.init(rng, std);
  }

  Tensor5<T> forward(const Tensor5<T>& phase, const std::vector<double>& te_s, double b0,
                     bool train) {
    return unet_.forward(lot_.forward(phase, te_s, b0), train);
  }

  // Accumulates all parameter gradients; no gradient flows to the phase.
  void backward(const Tensor5<T>& grad_out) {
    const Tensor5<T> g_lot = unet_.backward(grad_out);
    lot_.backward(g_lot);
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    lot_.collect(out);
    auto u = unet_.params();
    out.insert(out.end(), u.begin(), u.end());
    return out;
  }

  LotLayer<T>& lot() { return lot_; }
  UNet<T>& unet() { return unet_; }
  const LotUnetConfig& config() const { return cfg_; }

 private:
  LotUnetConfig cfg_;
  LotLayer<T> lot_;
  UNet<T> unet_;
};

}  // namespace qsmlot::nn
