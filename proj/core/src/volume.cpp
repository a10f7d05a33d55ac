#include "qsmlot/volume.hpp"

#include <cmath>
#include <string>

namespace qsmlot {

const char* unit_name(Unit u) {
  switch (u) {
    case Unit::ppm: return "ppm";
    case Unit::radians: return "radians";
    case Unit::hertz: return "hertz";
    case Unit::dimensionless: return "dimensionless";
    case Unit::rad_per_tesla_second: return "rad_per_tesla_second";
  }
  return "unknown";
}

namespace detail {
void require_same_dims(Dims3 a, Dims3 b, const char* what) {
  if (!(a == b)) {
    throw StructuralError(std::string(what) + ": dims mismatch (" +
                          std::to_string(a.nx) + "x" + std::to_string(a.ny) + "x" + std::to_string(a.nz) +
                          " vs " +
                          std::to_string(b.nx) + "x" + std::to_string(b.ny) + "x" + std::to_string(b.nz) + ")");
  }
}

static void require_positive_dims(Dims3 d, const char* what) {
  if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) {
    throw StructuralError(std::string(what) + ": dims must be positive");
  }
}

static void require_positive_spacing(Spacing s, const char* what) {
  if (!(s.dx > 0.0) || !(s.dy > 0.0) || !(s.dz > 0.0)) {
    throw DomainError(std::string(what) + ": spacing must be strictly positive");
  }
}
}  // namespace detail

ScalarVolume::ScalarVolume(Dims3 d, Unit u, double fill, Spacing s)
    : dims(d), spacing(s), unit(u), data(static_cast<std::size_t>(d.count()), fill) {
  detail::require_positive_dims(d, "ScalarVolume");
  detail::require_positive_spacing(s, "ScalarVolume");
}

ScalarVolume::ScalarVolume(Dims3 d, Unit u, std::vector<double> values, Spacing s)
    : dims(d), spacing(s), unit(u), data(std::move(values)) {
  detail::require_positive_dims(d, "ScalarVolume");
  detail::require_positive_spacing(s, "ScalarVolume");
  if (static_cast<std::int64_t>(data.size()) != d.count()) {
    throw StructuralError("ScalarVolume: data length does not match dims");
  }
}

void ScalarVolume::require_finite(const char* what) const {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(what) + ": volume contains non-finite values");
    }
  }
}

ComplexVolume::ComplexVolume(Dims3 d, std::complex<double> fill, Spacing s)
    : dims(d), spacing(s), data(static_cast<std::size_t>(d.count()), fill) {
  detail::require_positive_dims(d, "ComplexVolume");
  detail::require_positive_spacing(s, "ComplexVolume");
}

ComplexVolume from_polar(const ScalarVolume& magnitude, const ScalarVolume& phase) {
  detail::require_same_dims(magnitude.dims, phase.dims, "from_polar");
  ComplexVolume out(magnitude.dims, {}, magnitude.spacing);
  for (std::int64_t i = 0; i < magnitude.size(); ++i) {
    out.data[i] = std::polar(magnitude.data[i], phase.data[i]);
  }
  return out;
}

std::pair<ScalarVolume, ScalarVolume> to_polar(const ComplexVolume& v) {
  ScalarVolume mag(v.dims, Unit::dimensionless, 0.0, v.spacing);
  ScalarVolume phase(v.dims, Unit::radians, 0.0, v.spacing);
  for (std::int64_t i = 0; i < v.size(); ++i) {
    mag.data[i] = std::abs(v.data[i]);
    double p = std::arg(v.data[i]);  // [-pi, pi]
    if (p <= -3.14159265358979323846) p = 3.14159265358979323846;
    phase.data[i] = p;
  }
  return {std::move(mag), std::move(phase)};
}

Mask::Mask(Dims3 d, bool fill) : dims(d), data(static_cast<std::size_t>(d.count()), fill ? 1 : 0) {
  detail::require_positive_dims(d, "Mask");
}

std::int64_t Mask::count_true() const {
  std::int64_t n = 0;
  for (auto v : data) n += (v != 0);
  return n;
}

Mask erode(const Mask& mask, int radius) {
  if (radius < 0) throw DomainError("erode: radius must be >= 0");
  if (radius == 0) return mask;

  // Offsets of the ball structuring element.
  std::vector<std::array<int, 3>> ball;
  const int r2 = radius * radius;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy + dz * dz <= r2) ball.push_back({dx, dy, dz});

  const Dims3 d = mask.dims;
  Mask out(d, false);
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        if (!mask.at(i, j, k)) continue;
        bool keep = true;
        for (const auto& o : ball) {
          const int x = i + o[0], y = j + o[1], z = k + o[2];
          if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz || !mask.at(x, y, z)) {
            keep = false;
            break;
          }
        }
        if (keep) out.set(i, j, k, true);
      }
  return out;
}

RoiStats roi_stats(const ScalarVolume& vol, const Mask& roi) {
  detail::require_same_dims(vol.dims, roi.dims, "roi_stats");
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < vol.size(); ++i) {
    if (roi.data[i]) {
      sum += vol.data[i];
      ++n;
    }
  }
  if (n == 0) throw DomainError("roi_stats: empty ROI");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::int64_t i = 0; i < vol.size(); ++i) {
    if (roi.data[i]) {
      const double d = vol.data[i] - mean;
      ss += d * d;
    }
  }
  return {mean, std::sqrt(ss / static_cast<double>(n)), n};
}

ScalarVolume resample_nearest(const ScalarVolume& vol, Dims3 new_dims) {
  detail::require_positive_dims(new_dims, "resample_nearest");
  const Dims3 s = vol.dims;
  Spacing sp{vol.spacing.dx * s.nx / new_dims.nx,
             vol.spacing.dy * s.ny / new_dims.ny,
             vol.spacing.dz * s.nz / new_dims.nz};
  ScalarVolume out(new_dims, vol.unit, 0.0, sp);
  // Voxel-centre mapping: destination voxel i covers [i, i+1) on its own
  // grid; its centre lands at (i + 0.5) * n_src / n_dst on the source grid.
  auto map = [](int i, int n_dst, int n_src) {
    int s_idx = static_cast<int>((i + 0.5) * n_src / n_dst);
    if (s_idx >= n_src) s_idx = n_src - 1;
    return s_idx;
  };
  for (int k = 0; k < new_dims.nz; ++k) {
    const int sk = map(k, new_dims.nz, s.nz);
    for (int j = 0; j < new_dims.ny; ++j) {
      const int sj = map(j, new_dims.ny, s.ny);
      for (int i = 0; i < new_dims.nx; ++i) {
        out.at(i, j, k) = vol.at(map(i, new_dims.nx, s.nx), sj, sk);
      }
    }
  }
  return out;
}

}  // namespace qsmlot
