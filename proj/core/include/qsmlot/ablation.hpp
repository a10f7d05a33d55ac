#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qsmlot/background.hpp"
#include "qsmlot/dipole.hpp"
#include "qsmlot/volume.hpp"

namespace qsmlot {

// Step-wise error decomposition of the classical multi-step pipeline on a
// seeded hemorrhage phantom. Three entry points into the same chain:
//   (a) true local field          -> TKD
//   (b) true total field          -> RESHARP -> TKD
//   (c) wrapped phase -> Laplacian unwrap -> RESHARP -> TKD
// each scored on the hemorrhage ROI mean and on NRMSE over the analysis
// mask. An optional trained checkpoint adds the single-step network path.
struct AblationConfig {
  int size = 64;
  std::uint64_t seed = 0;
  double lesion_ppm = 1.0;   // 0 builds the lesion-free control phantom
  double te_s = 0.02;        // chosen so the lesion-adjacent phase wraps densely
  double b0_tesla = 3.0;
  double gamma_bar_mhz_per_t = 42.5764;
  double tkd_threshold = 0.2;
  double bg_rms_ppm = 2.0;
  ResharpConfig resharp;
  std::optional<std::filesystem::path> checkpoint;
};

struct AblationPhantom {
  ScalarVolume chi;          // ground truth, ppm
  ScalarVolume local_field;  // forward field of chi
  ScalarVolume total_field;  // local + exterior-source background
  ScalarVolume phase_w;      // wrapped phase at te_s
  Mask brain_mask;
  Mask roi;                  // lesion interior (eroded by 1)
  double roi_truth_mean = 0.0;
};

// The phantom: a compact healthy susceptibility cluster (spectrally
// projected onto the |D| >= threshold passband so the lesion-free control
// is well conditioned), a uniform spherical lesion, an ellipsoidal brain
// mask and a background field from sources outside the mask.
AblationPhantom make_ablation_phantom(const AblationConfig& cfg);

struct AblationEntry {
  std::string name;
  double roi_mean_ppm = 0.0;
  double roi_mean_error_rel = 0.0;  // |mean - truth| / |truth|; NaN when truth mean ~ 0
  double mask_nrmse_percent = 0.0;  // vs truth chi over the analysis mask
};

struct AblationReport {
  std::uint64_t seed = 0;
  double te_s = 0.0;
  double lesion_ppm = 0.0;
  double roi_truth_mean_ppm = 0.0;
  std::vector<AblationEntry> entries;  // a, b, c [, net]

  const AblationEntry& entry(const std::string& name) const;
  std::string to_json() const;
};

// Runs the three-entry decomposition; when out_dir is given, writes the
// reconstructions, per-step difference volumes and report.json there.
AblationReport run_ablation(const AblationConfig& cfg,
                            const std::optional<std::filesystem::path>& out_dir = {});

}  // namespace qsmlot
