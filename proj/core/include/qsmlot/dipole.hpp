#pragma once

#include <array>
#include <vector>

#include "qsmlot/volume.hpp"

namespace qsmlot {

struct AcquisitionParams {
  double b0_tesla = 3.0;
  double gamma_bar_mhz_per_t = 42.5764;  // gamma/2pi for hydrogen
  std::vector<double> te_s;              // strictly increasing echo times
  std::array<double, 3> b0_direction{0.0, 0.0, 1.0};

  void validate() const;
};

struct EchoSeries {
  AcquisitionParams params;
  std::vector<ScalarVolume> phases;      // one per TE, radians
  std::vector<ScalarVolume> magnitudes;  // one per TE

  void validate() const;
};

// Fourier-domain dipole kernel D(k) = 1/3 - kz^2/|k|^2 with kz taken along
// b0_direction and the k=0 bin set to 0. The k grid uses FFT integer
// frequencies scaled by 1/(n*spacing) per axis.
class DipoleKernel {
 public:
  static DipoleKernel make(Dims3 dims, Spacing spacing = {},
                           std::array<double, 3> b0_direction = {0.0, 0.0, 1.0});

  Dims3 dims;
  Spacing spacing;
  std::array<double, 3> b0_direction{0.0, 0.0, 1.0};
  std::vector<double> spectrum;  // values in [-2/3, 1/3]
};

// field = IFFT(D * FFT(chi)): the dimensionless field perturbation in ppm
// produced by a susceptibility distribution in ppm.
ScalarVolume forward_field(const ScalarVolume& chi_ppm, const DipoleKernel& d);

// Wrapped phase accrued by a field map at the given echo:
// wrap(2*pi * gamma_bar*1e6 * B0 * field*1e-6 * TE).
ScalarVolume phase_evolve(const ScalarVolume& field_ppm, const AcquisitionParams& params,
                          int te_index);

// Truncated k-space division. Bins where |D| < threshold divide by
// sign(D)*threshold instead; the k=0 bin maps to 0. threshold in (0, 1/3].
ScalarVolume tkd_invert(const ScalarVolume& field_ppm, const DipoleKernel& d,
                        double threshold = 0.2);

struct EchoFitResult {
  ScalarVolume value;
  Mask zero_weight;  // voxels where sum_i M_i * TE_i^2 == 0 (output forced to 0)
};

// Per-voxel magnitude-weighted least-squares slope of TE-scaled values
// against echo time: x = (sum_i M_i TE_i Y_i) / (sum_i M_i TE_i^2).
EchoFitResult echo_fit(const std::vector<ScalarVolume>& te_scaled_values,
                       const std::vector<ScalarVolume>& magnitudes,
                       const std::vector<double>& te_s);

}  // namespace qsmlot
