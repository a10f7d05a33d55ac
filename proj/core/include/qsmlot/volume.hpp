#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "qsmlot/errors.hpp"

namespace qsmlot {

struct Dims3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::int64_t count() const {
    return static_cast<std::int64_t>(nx) * ny * nz;
  }
  bool operator==(const Dims3&) const = default;
};

// Voxel spacing in mm. Default isotropic 1 mm.
struct Spacing {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  bool isotropic(double tol = 1e-12) const {
    return std::abs(dx - dy) <= tol * dx && std::abs(dx - dz) <= tol * dx;
  }
  bool operator==(const Spacing&) const = default;
};

enum class Unit {
  ppm,
  radians,
  hertz,
  dimensionless,
  rad_per_tesla_second,
};

const char* unit_name(Unit u);

// Canonical voxel order, assumed by every FFT and stencil in this library:
// x varies fastest, then y, then z. index(i,j,k) = i + nx*(j + ny*k).
//
// Volumes are value types; operations return new volumes and never mutate
// their inputs.
class ScalarVolume {
 public:
  ScalarVolume() = default;
  ScalarVolume(Dims3 dims, Unit unit, double fill = 0.0, Spacing spacing = {});
  ScalarVolume(Dims3 dims, Unit unit, std::vector<double> data, Spacing spacing = {});

  Dims3 dims;
  Spacing spacing;
  Unit unit = Unit::dimensionless;
  std::vector<double> data;

  std::int64_t index(int i, int j, int k) const {
    return i + static_cast<std::int64_t>(dims.nx) * (j + static_cast<std::int64_t>(dims.ny) * k);
  }
  double at(int i, int j, int k) const { return data[index(i, j, k)]; }
  double& at(int i, int j, int k) { return data[index(i, j, k)]; }
  std::int64_t size() const { return dims.count(); }

  // Throws DomainError if any voxel is NaN or infinite.
  void require_finite(const char* what) const;
};

class ComplexVolume {
 public:
  ComplexVolume() = default;
  ComplexVolume(Dims3 dims, std::complex<double> fill = {}, Spacing spacing = {});

  Dims3 dims;
  Spacing spacing;
  std::vector<std::complex<double>> data;

  std::int64_t size() const { return dims.count(); }
};

// Builds M * exp(i*phase) from a (magnitude, phase) pair; from_polar and
// to_polar round-trip losslessly up to floating-point rounding.
ComplexVolume from_polar(const ScalarVolume& magnitude, const ScalarVolume& phase);
// Returns (magnitude, phase) with phase in (-pi, pi].
std::pair<ScalarVolume, ScalarVolume> to_polar(const ComplexVolume& v);

class Mask {
 public:
  Mask() = default;
  explicit Mask(Dims3 dims, bool fill = false);

  Dims3 dims;
  std::vector<std::uint8_t> data;  // 0 or 1

  std::int64_t index(int i, int j, int k) const {
    return i + static_cast<std::int64_t>(dims.nx) * (j + static_cast<std::int64_t>(dims.ny) * k);
  }
  bool at(int i, int j, int k) const { return data[index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool v) { data[index(i, j, k)] = v ? 1 : 0; }
  std::int64_t size() const { return dims.count(); }
  std::int64_t count_true() const;
};

// Morphological erosion with a Euclidean-ball structuring element of the
// given voxel radius (voxel-centre distance <= radius). Voxels outside the
// grid count as false, so erosion also shrinks away from the grid boundary.
// radius 0 is the identity.
Mask erode(const Mask& mask, int radius);

struct RoiStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::int64_t count = 0;
};

// Mean and population std over the true voxels of roi.
RoiStats roi_stats(const ScalarVolume& vol, const Mask& roi);

// Nearest-neighbour resampling onto a new grid. Binary inputs stay binary.
// The physical extent is preserved: new spacing = old spacing * old_n/new_n.
ScalarVolume resample_nearest(const ScalarVolume& vol, Dims3 new_dims);

namespace detail {
void require_same_dims(Dims3 a, Dims3 b, const char* what);
}

}  // namespace qsmlot
