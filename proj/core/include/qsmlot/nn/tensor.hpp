#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsmlot/errors.hpp"
#include "qsmlot/volume.hpp"

namespace qsmlot::nn {

// Dense 5D tensor (batch, channels, x, y, z). Spatial storage matches the
// canonical volume order: x fastest, then y, then z, then channel, then
// batch element.
template <class T>
struct Tensor5 {
  int n = 0, c = 0, nx = 0, ny = 0, nz = 0;
  std::vector<T> data;

  Tensor5() = default;
  Tensor5(int n_, int c_, int nx_, int ny_, int nz_, T fill = T(0))
      : n(n_), c(c_), nx(nx_), ny(ny_), nz(nz_),
        data(static_cast<std::size_t>(n_) * c_ * nx_ * ny_ * nz_, fill) {}

  std::int64_t spatial() const { return static_cast<std::int64_t>(nx) * ny * nz; }
  std::int64_t size() const { return static_cast<std::int64_t>(n) * c * spatial(); }

  std::int64_t index(int bn, int ch, int x, int y, int z) const {
    return x + static_cast<std::int64_t>(nx) *
                   (y + static_cast<std::int64_t>(ny) *
                            (z + static_cast<std::int64_t>(nz) *
                                     (ch + static_cast<std::int64_t>(c) * bn)));
  }
  T at(int bn, int ch, int x, int y, int z) const { return data[static_cast<std::size_t>(index(bn, ch, x, y, z))]; }
  T& at(int bn, int ch, int x, int y, int z) { return data[static_cast<std::size_t>(index(bn, ch, x, y, z))]; }

  T* slice(int bn, int ch) { return data.data() + static_cast<std::size_t>((static_cast<std::int64_t>(bn) * c + ch) * spatial()); }
  const T* slice(int bn, int ch) const { return data.data() + static_cast<std::size_t>((static_cast<std::int64_t>(bn) * c + ch) * spatial()); }

  bool same_shape(const Tensor5& o) const {
    return n == o.n && c == o.c && nx == o.nx && ny == o.ny && nz == o.nz;
  }
};

// Single-channel tensor from a volume (batch size 1).
template <class T>
Tensor5<T> tensor_from_volume(const ScalarVolume& v) {
  Tensor5<T> t(1, 1, v.dims.nx, v.dims.ny, v.dims.nz);
  for (std::size_t i = 0; i < v.data.size(); ++i) t.data[i] = static_cast<T>(v.data[i]);
  return t;
}

template <class T>
ScalarVolume volume_from_tensor(const Tensor5<T>& t, int bn, int ch, Unit unit,
                                Spacing spacing = {}) {
  ScalarVolume v(Dims3{t.nx, t.ny, t.nz}, unit, 0.0, spacing);
  const T* s = t.slice(bn, ch);
  for (std::int64_t i = 0; i < t.spatial(); ++i) v.data[static_cast<std::size_t>(i)] = static_cast<double>(s[i]);
  return v;
}

// Named parameter with its gradient accumulator.
template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool trainable = true;

  void resize(std::string n, std::vector<int> s, bool train = true) {
    name = std::move(n);
    shape = std::move(s);
    std::int64_t total = 1;
    for (int d : shape) total *= d;
    value.assign(static_cast<std::size_t>(total), T(0));
    grad.assign(static_cast<std::size_t>(total), T(0));
    trainable = train;
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
  std::int64_t count() const { return static_cast<std::int64_t>(value.size()); }
};

}  // namespace qsmlot::nn
