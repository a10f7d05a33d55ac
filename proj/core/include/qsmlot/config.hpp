#pragma once

#include <filesystem>
#include <string>

#include "qsmlot/background.hpp"
#include "qsmlot/datagen.hpp"
#include "qsmlot/dipole.hpp"
#include "qsmlot/metrics.hpp"
#include "qsmlot/nn/config.hpp"

namespace qsmlot {

// The structured configuration document shared by every CLI subcommand.
// Parsing is strict: unknown keys are rejected, and the error lists every
// offending key path. Every run logs the resolved config hash.
struct PipelineConfig {
  std::uint64_t seed = 0;
  double b0_tesla = 3.0;
  double gamma_bar_mhz_per_t = 42.5764;
  std::string stencil = "canonical27";

  double tkd_threshold = 0.2;
  ResharpConfig resharp;
  PathologyConfig pathology;
  CropSpec crop;
  TeSampler te;
  bool noise_enabled = false;
  double noise_snr = 50.0;

  nn::LotUnetConfig model;
  nn::TrainConfig train;
  SsimConfig ssim;

  // Dataset build section.
  int dataset_n = 100;
  double healthy_fraction = 0.6;
  Dims3 patch_dims{64, 64, 64};
  double bg_rms_ppm = 1.0;

  // Ablation section.
  int ablate_size = 64;
  double ablate_lesion_ppm = 1.0;
  double ablate_te_s = 0.02;
  int ablate_seeds = 5;

  void validate() const;
  std::string to_json() const;
  // FNV-1a hash of the canonical JSON dump.
  std::string hash() const;

  static PipelineConfig from_json_text(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace qsmlot
