#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "qsmlot/volume.hpp"

namespace qsmlot {

// 3x3x3 discrete Laplace kernel. Weights are indexed [dz+1][dy+1][dx+1].
struct LaplacianStencil {
  std::array<double, 27> weights{};

  double at(int dx, int dy, int dz) const {
    return weights[static_cast<std::size_t>((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1))];
  }
  double& at(int dx, int dy, int dz) {
    return weights[static_cast<std::size_t>((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1))];
  }
  double weight_sum() const;

  // The 27-point stencil: outer planes (1/13)*[[1,3/2,1],[3/2,3,3/2],[1,3/2,1]],
  // middle plane (1/13)*[[3/2,3,3/2],[3,-44,3],[3/2,3,3/2]]. Weights sum to
  // exactly zero and the kernel is symmetric under axis permutation and
  // reflection.
  static LaplacianStencil canonical27();
};

// Real transfer function of the stencil on the periodic FFT grid:
// K_hat(k) = sum_d w(d) * cos(2*pi*(kx*dx/nx + ky*dy/ny + kz*dz/nz)).
std::vector<double> stencil_transfer(const LaplacianStencil& k, Dims3 dims);

// Discrete 3D convolution with zero padding outside the grid (the same
// boundary rule a convolutional network layer uses). Interior voxels carry
// the exact 27-term weighted sum. Requires dims >= 3 per axis and isotropic
// spacing; the result is scaled by 1/dx^2.
ScalarVolume stencil_apply(const ScalarVolume& vol, const LaplacianStencil& k);

// Wraps every voxel into (-pi, pi], congruent to the input mod 2*pi.
ScalarVolume wrap(const ScalarVolume& phase);
double wrap_scalar(double x);

// cos(phi_w)*(K*sin(phi_w)) - sin(phi_w)*(K*cos(phi_w)): the Laplacian of
// the unwrapped phase computed from the wrapped phase alone. Zero-padded
// convolutions, 1/dx^2 scaling as in stencil_apply.
ScalarVolume lot_numerator(const ScalarVolume& phase_w, const LaplacianStencil& k);

// LoT operator: lot_numerator normalized by B0*TE. Output unit is
// rad/(T*s). Invariant under phase shifts by multiples of 2*pi.
ScalarVolume lot(const ScalarVolume& phase_w, double b0_tesla, double te_s,
                 const LaplacianStencil& k = LaplacianStencil::canonical27());

// Laplacian-based phase unwrapping: trig Laplacian of the wrapped phase,
// then the inverse of the stencil's transfer function in the frequency
// domain. Everything here is periodic (circular convolutions via 3D FFT,
// no mirror padding). Frequency bins whose transfer magnitude is below
// 1e-6 of the maximum are zeroed, so the result is defined up to that
// nullspace (in particular up to a constant).
ScalarVolume laplacian_unwrap(const ScalarVolume& phase_w,
                              const LaplacianStencil& k = LaplacianStencil::canonical27());

struct NoiseSpec {
  double snr = 50.0;  // sigma = mean(magnitude over mask) / snr
  std::uint64_t rng_seed = 0;
};

// Adds i.i.d. Gaussian noise to the real and imaginary parts of
// M*exp(i*phi) and returns the resulting (magnitude, phase); the phase is
// wrapped back into (-pi, pi].
std::pair<ScalarVolume, ScalarVolume> add_complex_noise(const ScalarVolume& magnitude,
                                                        const ScalarVolume& phase_w,
                                                        const NoiseSpec& spec,
                                                        const Mask& mask);

}  // namespace qsmlot
