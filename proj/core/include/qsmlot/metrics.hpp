#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qsmlot/volume.hpp"

namespace qsmlot {

// 100 * ||recon - truth||_2 / ||truth||_2 over the masked voxels.
double nrmse_percent(const ScalarVolume& recon, const ScalarVolume& truth, const Mask& mask);

// 10*log10(peak^2 / MSE) over the masked voxels; peak defaults to
// max|truth| in the mask. nullopt means the images are identical (MSE 0).
std::optional<double> psnr_db(const ScalarVolume& recon, const ScalarVolume& truth,
                              const Mask& mask, std::optional<double> peak = {});

struct SsimConfig {
  int window = 11;       // odd
  double sigma = 1.5;    // Gaussian window std, voxels
  double k1 = 0.01;
  double k2 = 0.03;
  // Defaults to max - min of truth over the mask.
  std::optional<double> dynamic_range;
};

// Mean local SSIM with a 3D Gaussian window, averaged over window centres
// whose full window lies inside both the grid and the mask.
double ssim(const ScalarVolume& recon, const ScalarVolume& truth, const Mask& mask,
            const SsimConfig& cfg = {});

struct LineProfile {
  std::vector<double> positions_mm;  // distance from the start point
  std::vector<double> values;        // trilinear interpolation
};

LineProfile line_profile(const ScalarVolume& vol, std::array<double, 3> start_voxel,
                         std::array<double, 3> end_voxel, int n_samples);

struct RoiMeasurement {
  std::string label;
  double mean_ppb = 0.0;  // 1 ppm = 1000 ppb
  double std_ppb = 0.0;
  std::int64_t count = 0;
};

struct MetricsReport {
  std::optional<double> psnr;  // nullopt => "identical"
  double ssim_value = 0.0;
  double nrmse = 0.0;  // percent
  std::vector<RoiMeasurement> rois;
  std::optional<LineProfile> profile;
  SsimConfig ssim_config;
  double ssim_dynamic_range_used = 0.0;
  std::optional<double> psnr_peak_used;

  std::string to_json() const;
};

MetricsReport evaluate(const ScalarVolume& recon, const ScalarVolume& truth, const Mask& mask,
                       const SsimConfig& cfg = {},
                       const std::vector<std::pair<std::string, Mask>>& rois = {});

}  // namespace qsmlot
