#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "qsmlot/errors.hpp"

namespace qsmlot::nn {

enum class LotMode { fixed, learnable };

// Residual 3D U-Net shape. depth = number of pooling levels; channels
// double per level starting from base_channels.
struct UnetConfig {
  int depth = 4;
  int base_channels = 8;
  int in_channels = 1;
  int out_channels = 1;

  void validate() const;

  // Channel widths are configuration, not architectural claims: the
  // depth-4 layer counts (18/4/4/22/22/4/1) hold for any width.
  static UnetConfig full_preset() { return {4, 16, 1, 1}; }
  static UnetConfig desk_preset() { return {2, 8, 1, 1}; }
};

struct LotUnetConfig {
  LotMode lot_mode = LotMode::fixed;
  int lot_kernels = 16;  // learnable mode only; fixed mode always has 1
  UnetConfig unet;

  void validate() const;
  int lot_out_channels() const { return lot_mode == LotMode::fixed ? 1 : lot_kernels; }
  // Architecture fingerprint embedded in checkpoints; loading onto a
  // different fingerprint is rejected.
  std::string fingerprint() const;
};

struct LayerCounts {
  int conv3 = 0;      // 3x3x3 convolutions
  int maxpool = 0;    // 2x2x2 max pools
  int upconv = 0;     // 2x2x2 transposed convolutions
  int batchnorm = 0;
  int relu = 0;
  int concat = 0;
  int final_conv = 0;  // 1x1x1
  bool operator==(const LayerCounts&) const = default;
};

// Pure function of the configuration; the full depth-4 preset
// instantiates 18/4/4/22/22/4/1.
LayerCounts layer_counts(const UnetConfig& cfg);

std::int64_t parameter_count(const LotUnetConfig& cfg);

enum class Target { iqfm, iqsm };

const char* target_name(Target t);
Target target_from_name(const std::string& name);

struct TrainConfig {
  int epochs = 100;
  int batch = 4;  // desk default; the full-scale protocol uses 32
  std::array<double, 3> lr_stages{1e-3, 1e-4, 1e-5};
  std::array<int, 2> lr_boundaries{50, 80};  // stage switches after these epochs
  double init_std = 0.01;
  double noisy_fraction = 0.20;
  std::array<double, 2> noise_snr_range{10.0, 80.0};
  std::uint64_t seed = 0;
  // Early stop once the epoch loss falls to this fraction of the first
  // epoch's loss; 0 disables.
  double stop_loss_ratio = 0.0;

  void validate() const;
  double learning_rate(int epoch_1based) const;
};

}  // namespace qsmlot::nn
