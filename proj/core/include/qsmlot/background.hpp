#pragma once

#include <vector>

#include "qsmlot/volume.hpp"

namespace qsmlot {

// Spherical-mean-value high-pass operator S = delta - B_r, where B_r is a
// hard-thresholded voxelized ball of the given radius normalized to unit
// sum. Stored as its (real) transfer function on the periodic FFT grid;
// convolutions with S are circular, so masks are expected to stay at least
// smv_radius away from the grid boundary.
struct SmvKernel {
  int radius = 3;
  Dims3 dims;
  Spacing spacing;
  std::vector<double> spectrum;  // value at k=0 is 0 (ball sums to 1)

  static SmvKernel make(Dims3 dims, Spacing spacing, int radius);
};

// S * f (circular convolution via FFT).
ScalarVolume smv_highpass(const ScalarVolume& f, const SmvKernel& s);

struct ResharpConfig {
  int smv_radius = 3;
  double tikhonov_lambda = 1e-3;
  double cg_tol = 1e-6;  // relative residual
  int cg_max_iter = 200;

  void validate() const;
};

struct ResharpResult {
  ScalarVolume local_field;  // zero outside eroded_mask
  Mask eroded_mask;
  int iterations = 0;
  double relative_residual = 0.0;
  // Quadratic objective 1/2 f'Hf - b'f per CG iteration; strictly
  // decreasing in exact arithmetic.
  std::vector<double> objective_history;
};

// RESHARP background field removal: solves
//   min_f ||M_e S (f - total)||^2 + lambda ||f||^2
// with conjugate gradient on the normal equations, where M_e is the mask
// eroded by smv_radius. The returned field is restricted to the eroded mask.
// Throws DomainError if the eroded mask is empty and ConvergenceError if CG
// does not reach cg_tol within cg_max_iter iterations.
ResharpResult resharp(const ScalarVolume& total_field, const Mask& mask,
                      const ResharpConfig& cfg = {});

}  // namespace qsmlot
