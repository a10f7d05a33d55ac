#include "qsmlot/phase.hpp"

#include <cmath>
#include <string>

#include "qsmlot/fft.hpp"
#include "qsmlot/rng.hpp"

namespace qsmlot {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

void require_stencil_grid(const ScalarVolume& vol, const char* what) {
  if (vol.dims.nx < 3 || vol.dims.ny < 3 || vol.dims.nz < 3) {
    throw StructuralError(std::string(what) + ": dims must be >= 3 per axis");
  }
  if (!vol.spacing.isotropic(1e-9)) {
    throw DomainError(std::string(what) +
                      ": the canonical stencil requires isotropic voxel spacing");
  }
}

// Zero-padded convolution of a single volume with a 3x3x3 kernel. True
// convolution (kernel flipped); identical to correlation for symmetric
// kernels. Offsets are applied as 27 shifted axpy passes so the inner x
// loop stays contiguous.
void conv27_zeropad(const ScalarVolume& in, const LaplacianStencil& k, double scale,
                    ScalarVolume& out) {
  const Dims3 d = in.dims;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        // out(x) += w * in(x - d) for convolution; equivalently shift by -d.
        const double w = k.at(dx, dy, dz) * scale;
        if (w == 0.0) continue;
        const int z0 = std::max(0, dz), z1 = d.nz + std::min(0, dz);
        const int y0 = std::max(0, dy), y1 = d.ny + std::min(0, dy);
        const int x0 = std::max(0, dx), x1 = d.nx + std::min(0, dx);
        for (int z = z0; z < z1; ++z) {
          for (int y = y0; y < y1; ++y) {
            const double* src = &in.data[in.index(x0 - dx, y - dy, z - dz)];
            double* dst = &out.data[out.index(x0, y, z)];
            for (int x = x0; x < x1; ++x) *dst++ += w * *src++;
          }
        }
      }
    }
  }
}

}  // namespace

double LaplacianStencil::weight_sum() const {
  // Neumaier-compensated so the structural zero of the canonical kernel is
  // computed exactly rather than up to accumulation order.
  double sum = 0.0, comp = 0.0;
  for (double w : weights) {
    const double t = sum + w;
    if (std::abs(sum) >= std::abs(w)) {
      comp += (sum - t) + w;
    } else {
      comp += (w - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

LaplacianStencil LaplacianStencil::canonical27() {
  LaplacianStencil k;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int m = std::abs(dx) + std::abs(dy) + std::abs(dz);
        const double w = m == 0 ? -44.0 : m == 1 ? 3.0 : m == 2 ? 1.5 : 1.0;
        k.at(dx, dy, dz) = w / 13.0;
      }
    }
  }
  // The kernel weights are rationals whose sum is exactly zero; their
  // correctly-rounded doubles sum to a small residual (a few units of
  // 2^-56). Fold it evenly into the eight corners - an exact operation in
  // their binade - so the stored kernel annihilates constants exactly and
  // stays bit-symmetric.
  const double residual = k.weight_sum();
  const double corner_adjust = residual / 8.0;
  for (int dz = -1; dz <= 1; dz += 2) {
    for (int dy = -1; dy <= 1; dy += 2) {
      for (int dx = -1; dx <= 1; dx += 2) {
        k.at(dx, dy, dz) -= corner_adjust;
      }
    }
  }
  return k;
}

std::vector<double> stencil_transfer(const LaplacianStencil& k, Dims3 dims) {
  std::vector<double> t(static_cast<std::size_t>(dims.count()), 0.0);
  std::int64_t idx = 0;
  for (int kz = 0; kz < dims.nz; ++kz) {
    for (int ky = 0; ky < dims.ny; ++ky) {
      for (int kx = 0; kx < dims.nx; ++kx, ++idx) {
        double sum = 0.0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              sum += k.at(dx, dy, dz) *
                     std::cos(kTwoPi * (static_cast<double>(kx) * dx / dims.nx +
                                        static_cast<double>(ky) * dy / dims.ny +
                                        static_cast<double>(kz) * dz / dims.nz));
        t[static_cast<std::size_t>(idx)] = sum;
      }
    }
  }
  return t;
}

ScalarVolume stencil_apply(const ScalarVolume& vol, const LaplacianStencil& k) {
  require_stencil_grid(vol, "stencil_apply");
  ScalarVolume out(vol.dims, vol.unit, 0.0, vol.spacing);
  const double scale = 1.0 / (vol.spacing.dx * vol.spacing.dx);
  conv27_zeropad(vol, k, scale, out);
  return out;
}

double wrap_scalar(double x) {
  const double w = x - kTwoPi * std::ceil((x - kPi) / kTwoPi);
  // Guard the open end of the interval against rounding.
  if (w <= -kPi) return w + kTwoPi;
  if (w > kPi) return w - kTwoPi;
  return w;
}

ScalarVolume wrap(const ScalarVolume& phase) {
  phase.require_finite("wrap");
  ScalarVolume out = phase;
  out.unit = Unit::radians;
  for (auto& v : out.data) v = wrap_scalar(v);
  return out;
}

ScalarVolume lot_numerator(const ScalarVolume& phase_w, const LaplacianStencil& k) {
  require_stencil_grid(phase_w, "lot");
  const Dims3 d = phase_w.dims;
  ScalarVolume sin_p(d, Unit::dimensionless, 0.0, phase_w.spacing);
  ScalarVolume cos_p(d, Unit::dimensionless, 0.0, phase_w.spacing);
  for (std::int64_t i = 0; i < phase_w.size(); ++i) {
    sin_p.data[i] = std::sin(phase_w.data[i]);
    cos_p.data[i] = std::cos(phase_w.data[i]);
  }
  const double scale = 1.0 / (phase_w.spacing.dx * phase_w.spacing.dx);
  ScalarVolume ksin(d, Unit::dimensionless, 0.0, phase_w.spacing);
  ScalarVolume kcos(d, Unit::dimensionless, 0.0, phase_w.spacing);
  conv27_zeropad(sin_p, k, scale, ksin);
  conv27_zeropad(cos_p, k, scale, kcos);
  ScalarVolume out(d, Unit::radians, 0.0, phase_w.spacing);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out.data[i] = cos_p.data[i] * ksin.data[i] - sin_p.data[i] * kcos.data[i];
  }
  return out;
}

ScalarVolume lot(const ScalarVolume& phase_w, double b0_tesla, double te_s,
                 const LaplacianStencil& k) {
  if (!(b0_tesla > 0.0)) throw DomainError("lot: B0 must be positive");
  if (!(te_s > 0.0)) throw DomainError("lot: TE must be positive");
  ScalarVolume out = lot_numerator(phase_w, k);
  const double inv = 1.0 / (b0_tesla * te_s);
  for (auto& v : out.data) v *= inv;
  out.unit = Unit::rad_per_tesla_second;
  return out;
}

ScalarVolume laplacian_unwrap(const ScalarVolume& phase_w, const LaplacianStencil& k) {
  require_stencil_grid(phase_w, "laplacian_unwrap");
  const Dims3 d = phase_w.dims;
  const std::int64_t n = d.count();

  // Trig Laplacian with circular convolutions, evaluated in k-space so the
  // forward operator matches the transfer function used for the inverse.
  std::vector<std::complex<double>> sin_p(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> cos_p(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    sin_p[static_cast<std::size_t>(i)] = std::sin(phase_w.data[static_cast<std::size_t>(i)]);
    cos_p[static_cast<std::size_t>(i)] = std::cos(phase_w.data[static_cast<std::size_t>(i)]);
  }
  const std::vector<double> transfer = stencil_transfer(k, d);
  auto s_hat = fft::forward(d, sin_p);
  auto c_hat = fft::forward(d, cos_p);
  for (std::int64_t i = 0; i < n; ++i) {
    s_hat[static_cast<std::size_t>(i)] *= transfer[static_cast<std::size_t>(i)];
    c_hat[static_cast<std::size_t>(i)] *= transfer[static_cast<std::size_t>(i)];
  }
  const auto k_sin = fft::inverse(d, s_hat);
  const auto k_cos = fft::inverse(d, c_hat);

  std::vector<std::complex<double>> numerator(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    numerator[ii] = cos_p[ii].real() * k_sin[ii].real() - sin_p[ii].real() * k_cos[ii].real();
  }

  // Thresholded pseudo-inverse of the transfer function.
  double max_mag = 0.0;
  for (double t : transfer) max_mag = std::max(max_mag, std::abs(t));
  const double cutoff = 1e-6 * max_mag;

  auto num_hat = fft::forward(d, numerator);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    if (std::abs(transfer[ii]) < cutoff) {
      num_hat[ii] = 0.0;
    } else {
      num_hat[ii] /= transfer[ii];
    }
  }
  const auto unwrapped = fft::inverse(d, num_hat);

  ScalarVolume out(d, Unit::radians, 0.0, phase_w.spacing);
  for (std::int64_t i = 0; i < n; ++i) {
    out.data[static_cast<std::size_t>(i)] = unwrapped[static_cast<std::size_t>(i)].real();
  }
  return out;
}

std::pair<ScalarVolume, ScalarVolume> add_complex_noise(const ScalarVolume& magnitude,
                                                        const ScalarVolume& phase_w,
                                                        const NoiseSpec& spec,
                                                        const Mask& mask) {
  detail::require_same_dims(magnitude.dims, phase_w.dims, "add_complex_noise");
  detail::require_same_dims(magnitude.dims, mask.dims, "add_complex_noise");
  if (!(spec.snr > 0.0)) throw DomainError("add_complex_noise: snr must be positive");

  const RoiStats stats = roi_stats(magnitude, mask);  // throws on empty mask
  const double sigma = stats.mean / spec.snr;

  Rng rng(spec.rng_seed);
  ScalarVolume mag_out(magnitude.dims, magnitude.unit, 0.0, magnitude.spacing);
  ScalarVolume phase_out(phase_w.dims, Unit::radians, 0.0, phase_w.spacing);
  for (std::int64_t i = 0; i < magnitude.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double re = magnitude.data[ii] * std::cos(phase_w.data[ii]) + rng.normal(0.0, sigma);
    const double im = magnitude.data[ii] * std::sin(phase_w.data[ii]) + rng.normal(0.0, sigma);
    mag_out.data[ii] = std::hypot(re, im);
    phase_out.data[ii] = wrap_scalar(std::atan2(im, re));
  }
  return {std::move(mag_out), std::move(phase_out)};
}

}  // namespace qsmlot
