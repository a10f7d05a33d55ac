#pragma once

// Independent brute-force oracles used to freeze expected values. These
// deliberately avoid the library's implementation paths (no FFT wrapper, no
// stencil helpers) so each check compares two distinct routes.

#include <cmath>
#include <complex>
#include <vector>

#include "qsmlot/volume.hpp"

namespace oracles {

// Naive O(N^2) direct DFT evaluation of IFFT(D .* FFT(chi)) with the dipole
// spectrum built from first principles.
inline qsmlot::ScalarVolume dipole_field_direct_dft(const qsmlot::ScalarVolume& chi) {
  using namespace qsmlot;
  const Dims3 d = chi.dims;
  const std::int64_t n = d.count();
  const double two_pi = 2.0 * 3.14159265358979323846;

  auto freq = [](int i, int len) { return i <= len / 2 ? i : i - len; };

  // Forward DFT: X(k) = sum_x chi(x) exp(-2pi i k.x / n)
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(n));
  std::int64_t ki = 0;
  for (int kz = 0; kz < d.nz; ++kz) {
    for (int ky = 0; ky < d.ny; ++ky) {
      for (int kx = 0; kx < d.nx; ++kx, ++ki) {
        std::complex<double> acc = 0.0;
        for (int z = 0; z < d.nz; ++z) {
          for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
              const double ph = -two_pi * (static_cast<double>(kx) * x / d.nx +
                                           static_cast<double>(ky) * y / d.ny +
                                           static_cast<double>(kz) * z / d.nz);
              acc += chi.at(x, y, z) * std::complex<double>(std::cos(ph), std::sin(ph));
            }
          }
        }
        const double fx = static_cast<double>(freq(kx, d.nx)) / d.nx;
        const double fy = static_cast<double>(freq(ky, d.ny)) / d.ny;
        const double fz = static_cast<double>(freq(kz, d.nz)) / d.nz;
        const double k2 = fx * fx + fy * fy + fz * fz;
        const double dk = k2 == 0.0 ? 0.0 : (1.0 / 3.0 - fz * fz / k2);
        spec[static_cast<std::size_t>(ki)] = acc * dk;
      }
    }
  }

  // Inverse DFT.
  ScalarVolume out(d, Unit::ppm, 0.0, chi.spacing);
  std::int64_t xi = 0;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x, ++xi) {
        std::complex<double> acc = 0.0;
        std::int64_t kj = 0;
        for (int kz = 0; kz < d.nz; ++kz) {
          for (int ky = 0; ky < d.ny; ++ky) {
            for (int kx = 0; kx < d.nx; ++kx, ++kj) {
              const double ph = two_pi * (static_cast<double>(kx) * x / d.nx +
                                          static_cast<double>(ky) * y / d.ny +
                                          static_cast<double>(kz) * z / d.nz);
              acc += spec[static_cast<std::size_t>(kj)] *
                     std::complex<double>(std::cos(ph), std::sin(ph));
            }
          }
        }
        out.at(x, y, z) = acc.real() / static_cast<double>(n);
      }
    }
  }
  return out;
}

// Analytic field of a uniformly magnetized sphere: 0 inside,
// (chi/3) (R/r)^3 (3 cos^2 theta - 1) outside, theta measured from b0 (z).
inline double sphere_field_analytic(double chi_ppm, double radius, double dx, double dy, double dz) {
  const double r2 = dx * dx + dy * dy + dz * dz;
  const double r = std::sqrt(r2);
  if (r <= radius) return 0.0;
  const double cos_t = dz / r;
  const double ratio = radius / r;
  return chi_ppm / 3.0 * ratio * ratio * ratio * (3.0 * cos_t * cos_t - 1.0);
}

// Brute-force erosion: keep a voxel iff every voxel of the Euclidean ball
// around it is inside the grid and true.
inline qsmlot::Mask erode_bruteforce(const qsmlot::Mask& m, int radius) {
  using namespace qsmlot;
  Mask out(m.dims, false);
  for (int k = 0; k < m.dims.nz; ++k)
    for (int j = 0; j < m.dims.ny; ++j)
      for (int i = 0; i < m.dims.nx; ++i) {
        bool keep = m.at(i, j, k);
        for (int dz = -radius; dz <= radius && keep; ++dz)
          for (int dy = -radius; dy <= radius && keep; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) {
              if (dx * dx + dy * dy + dz * dz > radius * radius) continue;
              const int x = i + dx, y = j + dy, z = k + dz;
              if (x < 0 || y < 0 || z < 0 || x >= m.dims.nx || y >= m.dims.ny || z >= m.dims.nz ||
                  !m.at(x, y, z)) {
                keep = false;
                break;
              }
            }
        if (keep) out.set(i, j, k, true);
      }
  return out;
}

// Direct per-window 3D SSIM with a Gaussian window; windows fully inside
// grid and mask only. Slow and simple.
inline double ssim_direct(const qsmlot::ScalarVolume& a, const qsmlot::ScalarVolume& b,
                          const qsmlot::Mask& mask, int window, double sigma, double k1, double k2,
                          double dynamic_range) {
  using namespace qsmlot;
  const int r = window / 2;
  std::vector<double> g(static_cast<std::size_t>(window));
  double gs = 0.0;
  for (int i = -r; i <= r; ++i) {
    g[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    gs += g[static_cast<std::size_t>(i + r)];
  }
  for (auto& v : g) v /= gs;
  const double c1 = (k1 * dynamic_range) * (k1 * dynamic_range);
  const double c2 = (k2 * dynamic_range) * (k2 * dynamic_range);

  double sum = 0.0;
  std::int64_t count = 0;
  const Dims3 d = a.dims;
  for (int z = r; z < d.nz - r; ++z)
    for (int y = r; y < d.ny - r; ++y)
      for (int x = r; x < d.nx - r; ++x) {
        bool ok = true;
        for (int dz = -r; dz <= r && ok; ++dz)
          for (int dy = -r; dy <= r && ok; ++dy)
            for (int dx = -r; dx <= r; ++dx)
              if (!mask.at(x + dx, y + dy, z + dz)) {
                ok = false;
                break;
              }
        if (!ok) continue;
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dz = -r; dz <= r; ++dz)
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
              const double w = g[static_cast<std::size_t>(dx + r)] * g[static_cast<std::size_t>(dy + r)] *
                               g[static_cast<std::size_t>(dz + r)];
              const double va = a.at(x + dx, y + dy, z + dz);
              const double vb = b.at(x + dx, y + dy, z + dz);
              mx += w * va;
              my += w * vb;
              sxx += w * va * va;
              syy += w * vb * vb;
              sxy += w * va * vb;
            }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
  return sum / static_cast<double>(count);
}

}  // namespace oracles
