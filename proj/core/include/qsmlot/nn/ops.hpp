#pragma once

#include <algorithm>
#include <type_traits>

#include "qsmlot/nn/tensor.hpp"

namespace qsmlot::nn {

// Convolution primitives used by the layers. These follow the usual deep
// learning convention (cross-correlation) with zero padding and stride 1;
// kernels are cubes of odd size. Weight layout: [cout][cin][kx][ky][kz],
// x fastest, matching the tensor spatial order.

// One (cout, batch) slice pair at a time, organized as 27 (or k^3) shifted
// axpy passes so the inner x loop is contiguous in both buffers.
template <class T>
void conv3_same_forward(const Tensor5<T>& in, const T* weight, const T* bias, int cout, int ksize,
                        Tensor5<T>& out) {
  const int r = ksize / 2;
  const int nx = in.nx, ny = in.ny, nz = in.nz;
  out = Tensor5<T>(in.n, cout, nx, ny, nz);
  for (int bn = 0; bn < in.n; ++bn) {
    for (int co = 0; co < cout; ++co) {
      T* dst0 = out.slice(bn, co);
      if (bias) {
        std::fill(dst0, dst0 + out.spatial(), bias[co]);
      }
      for (int ci = 0; ci < in.c; ++ci) {
        const T* src0 = in.slice(bn, ci);
        const T* w = weight + ((static_cast<std::int64_t>(co) * in.c + ci) * ksize * ksize * ksize);
        for (int oz = -r; oz <= r; ++oz) {
          for (int oy = -r; oy <= r; ++oy) {
            for (int ox = -r; ox <= r; ++ox) {
              const T wv = w[(ox + r) + ksize * ((oy + r) + ksize * (oz + r))];
              if (wv == T(0)) continue;
              const int z0 = std::max(0, -oz), z1 = nz - std::max(0, oz);
              const int y0 = std::max(0, -oy), y1 = ny - std::max(0, oy);
              const int x0 = std::max(0, -ox), x1 = nx - std::max(0, ox);
              for (int z = z0; z < z1; ++z) {
                for (int y = y0; y < y1; ++y) {
                  const std::int64_t di = x0 + static_cast<std::int64_t>(nx) * (y + static_cast<std::int64_t>(ny) * z);
                  const std::int64_t si = (x0 + ox) + static_cast<std::int64_t>(nx) * ((y + oy) + static_cast<std::int64_t>(ny) * (z + oz));
                  T* dst = dst0 + di;
                  const T* src = src0 + si;
                  for (int x = x0; x < x1; ++x) *dst++ += wv * *src++;
                }
              }
            }
          }
        }
      }
    }
  }
}

// Gradient wrt input: the adjoint correlation (offsets negated).
template <class T>
void conv3_same_backward_data(const Tensor5<T>& grad_out, const T* weight, int cin, int ksize,
                              Tensor5<T>& grad_in) {
  const int r = ksize / 2;
  const int nx = grad_out.nx, ny = grad_out.ny, nz = grad_out.nz;
  grad_in = Tensor5<T>(grad_out.n, cin, nx, ny, nz);
  for (int bn = 0; bn < grad_out.n; ++bn) {
    for (int ci = 0; ci < cin; ++ci) {
      T* dst0 = grad_in.slice(bn, ci);
      for (int co = 0; co < grad_out.c; ++co) {
        const T* src0 = grad_out.slice(bn, co);
        const T* w = weight + ((static_cast<std::int64_t>(co) * cin + ci) * ksize * ksize * ksize);
        for (int oz = -r; oz <= r; ++oz) {
          for (int oy = -r; oy <= r; ++oy) {
            for (int ox = -r; ox <= r; ++ox) {
              const T wv = w[(ox + r) + ksize * ((oy + r) + ksize * (oz + r))];
              if (wv == T(0)) continue;
              // din[u] += w[o] * dout[u - o]
              const int z0 = std::max(0, oz), z1 = nz + std::min(0, oz);
              const int y0 = std::max(0, oy), y1 = ny + std::min(0, oy);
              const int x0 = std::max(0, ox), x1 = nx + std::min(0, ox);
              for (int z = z0; z < z1; ++z) {
                for (int y = y0; y < y1; ++y) {
                  const std::int64_t di = x0 + static_cast<std::int64_t>(nx) * (y + static_cast<std::int64_t>(ny) * z);
                  const std::int64_t si = (x0 - ox) + static_cast<std::int64_t>(nx) * ((y - oy) + static_cast<std::int64_t>(ny) * (z - oz));
                  T* dst = dst0 + di;
                  const T* src = src0 + si;
                  for (int x = x0; x < x1; ++x) *dst++ += wv * *src++;
                }
              }
            }
          }
        }
      }
    }
  }
}

// Gradient wrt weights: shifted box dot products. Accumulates into
// grad_weight (callers zero it per step, not per call).
template <class T>
void conv3_same_backward_weight(const Tensor5<T>& in, const Tensor5<T>& grad_out, int ksize,
                                T* grad_weight, T* grad_bias) {
  const int r = ksize / 2;
  const int nx = in.nx, ny = in.ny, nz = in.nz;
  for (int bn = 0; bn < in.n; ++bn) {
    for (int co = 0; co < grad_out.c; ++co) {
      const T* g0 = grad_out.slice(bn, co);
      if (grad_bias) {
        T acc = T(0);
        for (std::int64_t i = 0; i < grad_out.spatial(); ++i) acc += g0[i];
        grad_bias[co] += acc;
      }
      for (int ci = 0; ci < in.c; ++ci) {
        const T* s0 = in.slice(bn, ci);
        T* gw = grad_weight + ((static_cast<std::int64_t>(co) * in.c + ci) * ksize * ksize * ksize);
        for (int oz = -r; oz <= r; ++oz) {
          for (int oy = -r; oy <= r; ++oy) {
            for (int ox = -r; ox <= r; ++ox) {
              // dw[o] += sum_x dout[x] * in[x + o]
              const int z0 = std::max(0, -oz), z1 = nz - std::max(0, oz);
              const int y0 = std::max(0, -oy), y1 = ny - std::max(0, oy);
              const int x0 = std::max(0, -ox), x1 = nx - std::max(0, ox);
              T acc = T(0);
              for (int z = z0; z < z1; ++z) {
                for (int y = y0; y < y1; ++y) {
                  const std::int64_t gi = x0 + static_cast<std::int64_t>(nx) * (y + static_cast<std::int64_t>(ny) * z);
                  const std::int64_t si = (x0 + ox) + static_cast<std::int64_t>(nx) * ((y + oy) + static_cast<std::int64_t>(ny) * (z + oz));
                  const T* g = g0 + gi;
                  const T* s = s0 + si;
                  for (int x = x0; x < x1; ++x) acc += *g++ * *s++;
                }
              }
              gw[(ox + r) + ksize * ((oy + r) + ksize * (oz + r))] += acc;
            }
          }
        }
      }
    }
  }
}

// 2x2x2 stride-2 transposed convolution. The stride equals the kernel size,
// so every output voxel receives exactly one tap per input channel:
// out[co, X] = bias[co] + sum_ci w[ci][co][X&1] * in[ci, X>>1].
// Weight layout: [cin][cout][kx][ky][kz].
template <class T>
void upconv2_forward(const Tensor5<T>& in, const T* weight, const T* bias, int cout,
                     Tensor5<T>& out) {
  out = Tensor5<T>(in.n, cout, 2 * in.nx, 2 * in.ny, 2 * in.nz);
  for (int bn = 0; bn < in.n; ++bn) {
    for (int co = 0; co < cout; ++co) {
      T* dst = out.slice(bn, co);
      std::int64_t p = 0;
      for (int Z = 0; Z < out.nz; ++Z) {
        const int z = Z >> 1, kz = Z & 1;
        for (int Y = 0; Y < out.ny; ++Y) {
          const int y = Y >> 1, ky = Y & 1;
          for (int X = 0; X < out.nx; ++X, ++p) {
            const int x = X >> 1, kx = X & 1;
            T acc = bias ? bias[co] : T(0);
            for (int ci = 0; ci < in.c; ++ci) {
              const T w = weight[kx + 2 * (ky + 2 * (kz + 2 * (static_cast<std::int64_t>(ci) * cout + co)))];
              acc += w * in.at(bn, ci, x, y, z);
            }
            dst[p] = acc;
          }
        }
      }
    }
  }
}

template <class T>
void upconv2_backward(const Tensor5<T>& in, const Tensor5<T>& grad_out, const T* weight,
                      Tensor5<T>& grad_in, T* grad_weight, T* grad_bias) {
  const int cout = grad_out.c;
  grad_in = Tensor5<T>(in.n, in.c, in.nx, in.ny, in.nz);
  for (int bn = 0; bn < in.n; ++bn) {
    for (int co = 0; co < cout; ++co) {
      const T* g0 = grad_out.slice(bn, co);
      if (grad_bias) {
        T acc = T(0);
        for (std::int64_t i = 0; i < grad_out.spatial(); ++i) acc += g0[i];
        grad_bias[co] += acc;
      }
    }
    for (int ci = 0; ci < in.c; ++ci) {
      for (int z = 0; z < in.nz; ++z) {
        for (int y = 0; y < in.ny; ++y) {
          for (int x = 0; x < in.nx; ++x) {
            const T v = in.at(bn, ci, x, y, z);
            T din = T(0);
            for (int kz = 0; kz < 2; ++kz) {
              for (int ky = 0; ky < 2; ++ky) {
                for (int kx = 0; kx < 2; ++kx) {
                  for (int co = 0; co < cout; ++co) {
                    const std::int64_t wi = kx + 2 * (ky + 2 * (kz + 2 * (static_cast<std::int64_t>(ci) * cout + co)));
                    const T g = grad_out.at(bn, co, 2 * x + kx, 2 * y + ky, 2 * z + kz);
                    din += weight[wi] * g;
                    grad_weight[wi] += v * g;
                  }
                }
              }
            }
            grad_in.at(bn, ci, x, y, z) = din;
          }
        }
      }
    }
  }
}

// 2x2x2 max pooling, stride 2. Requires even spatial dims. argmax holds the
// flat input index of the winner for the backward scatter.
template <class T>
void maxpool2_forward(const Tensor5<T>& in, Tensor5<T>& out, std::vector<std::int64_t>& argmax) {
  if (in.nx % 2 || in.ny % 2 || in.nz % 2) {
    throw StructuralError("maxpool2: spatial dims must be even");
  }
  out = Tensor5<T>(in.n, in.c, in.nx / 2, in.ny / 2, in.nz / 2);
  argmax.assign(static_cast<std::size_t>(out.size()), 0);
  std::int64_t p = 0;
  for (int bn = 0; bn < in.n; ++bn) {
    for (int ch = 0; ch < in.c; ++ch) {
      for (int z = 0; z < out.nz; ++z) {
        for (int y = 0; y < out.ny; ++y) {
          for (int x = 0; x < out.nx; ++x, ++p) {
            T best{};
            std::int64_t best_i = -1;
            for (int dz = 0; dz < 2; ++dz) {
              for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                  const std::int64_t i = in.index(bn, ch, 2 * x + dx, 2 * y + dy, 2 * z + dz);
                  const T v = in.data[static_cast<std::size_t>(i)];
                  if (best_i < 0 || v > best) {
                    best = v;
                    best_i = i;
                  }
                }
              }
            }
            out.data[static_cast<std::size_t>(p)] = best;
            argmax[static_cast<std::size_t>(p)] = best_i;
          }
        }
      }
    }
  }
}

template <class T>
void maxpool2_backward(const Tensor5<T>& grad_out, const std::vector<std::int64_t>& argmax,
                       Tensor5<T>& grad_in) {
  for (std::int64_t i = 0; i < grad_out.size(); ++i) {
    grad_in.data[static_cast<std::size_t>(argmax[static_cast<std::size_t>(i)])] +=
        grad_out.data[static_cast<std::size_t>(i)];
  }
}

// Channel concatenation [a | b] and its gradient split.
template <class T>
Tensor5<T> concat_channels(const Tensor5<T>& a, const Tensor5<T>& b) {
  if (a.n != b.n || a.nx != b.nx || a.ny != b.ny || a.nz != b.nz) {
    throw StructuralError("concat: spatial/batch dims differ");
  }
  Tensor5<T> out(a.n, a.c + b.c, a.nx, a.ny, a.nz);
  for (int bn = 0; bn < a.n; ++bn) {
    for (int ch = 0; ch < a.c; ++ch) {
      std::copy(a.slice(bn, ch), a.slice(bn, ch) + a.spatial(), out.slice(bn, ch));
    }
    for (int ch = 0; ch < b.c; ++ch) {
      std::copy(b.slice(bn, ch), b.slice(bn, ch) + b.spatial(), out.slice(bn, a.c + ch));
    }
  }
  return out;
}

template <class T>
void split_channels(const Tensor5<T>& grad, int c_first, Tensor5<T>& ga, Tensor5<T>& gb) {
  ga = Tensor5<T>(grad.n, c_first, grad.nx, grad.ny, grad.nz);
  gb = Tensor5<T>(grad.n, grad.c - c_first, grad.nx, grad.ny, grad.nz);
  for (int bn = 0; bn < grad.n; ++bn) {
    for (int ch = 0; ch < c_first; ++ch) {
      std::copy(grad.slice(bn, ch), grad.slice(bn, ch) + grad.spatial(), ga.slice(bn, ch));
    }
    for (int ch = 0; ch < gb.c; ++ch) {
      std::copy(grad.slice(bn, c_first + ch), grad.slice(bn, c_first + ch) + grad.spatial(),
                gb.slice(bn, ch));
    }
  }
}

// Mean squared error over all elements; grad (optional) is filled with
// dL/dpred. type_identity keeps the pointer out of deduction so callers can
// pass a plain nullptr.
template <class T>
double mse_loss(const Tensor5<T>& pred, const Tensor5<T>& target,
                std::type_identity_t<Tensor5<T>>* grad) {
  if (!pred.same_shape(target)) throw StructuralError("mse_loss: shape mismatch");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double loss = 0.0;
  if (grad) *grad = Tensor5<T>(pred.n, pred.c, pred.nx, pred.ny, pred.nz);
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double d = static_cast<double>(pred.data[ii]) - static_cast<double>(target.data[ii]);
    loss += d * d;
    if (grad) grad->data[ii] = static_cast<T>(2.0 * d * inv_n);
  }
  return loss * inv_n;
}

}  // namespace qsmlot::nn
