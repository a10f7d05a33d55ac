#pragma once

#include <complex>
#include <vector>

#include "qsmlot/volume.hpp"

namespace qsmlot::fft {

// 3D complex-to-complex FFT over the canonical voxel order (x fastest).
// forward() is unnormalized; inverse() applies the 1/N factor, so
// inverse(forward(v)) == v up to rounding.
//
// Plans are cached per shape behind a mutex; execution is thread-safe and
// deterministic run to run (FFTW_ESTIMATE planning).
std::vector<std::complex<double>> forward(Dims3 dims, const std::vector<std::complex<double>>& in);
std::vector<std::complex<double>> inverse(Dims3 dims, const std::vector<std::complex<double>>& in);

// Frequency index -> signed integer frequency for an axis of length n
// (0, 1, ..., n/2, -(n-1)/2, ..., -1).
inline int freq_index(int i, int n) { return (i <= n / 2) ? i : i - n; }

}  // namespace qsmlot::fft
