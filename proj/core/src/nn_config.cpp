#include "qsmlot/nn/config.hpp"

#include <sstream>

namespace qsmlot::nn {

void UnetConfig::validate() const {
  if (depth < 1) throw DomainError("UnetConfig: depth must be >= 1");
  if (base_channels < 1) throw DomainError("UnetConfig: base_channels must be >= 1");
  if (in_channels < 1 || out_channels < 1) {
    throw DomainError("UnetConfig: channel counts must be >= 1");
  }
}

void LotUnetConfig::validate() const {
  unet.validate();
  if (lot_mode == LotMode::learnable && lot_kernels < 1) {
    throw DomainError("LotUnetConfig: learnable mode needs at least one kernel");
  }
  if (unet.in_channels != lot_out_channels()) {
    throw DomainError("LotUnetConfig: unet.in_channels must equal the LoT output channels");
  }
}

std::string LotUnetConfig::fingerprint() const {
  std::ostringstream os;
  os << "lotunet/v1;mode=" << (lot_mode == LotMode::fixed ? "fixed" : "learnable")
     << ";kernels=" << lot_out_channels() << ";depth=" << unet.depth
     << ";base=" << unet.base_channels << ";in=" << unet.in_channels
     << ";out=" << unet.out_channels;
  return os.str();
}

LayerCounts layer_counts(const UnetConfig& cfg) {
  LayerCounts c;
  // Encoder: depth levels of two conv(+BN+ReLU) blocks, each followed by a
  // pool; bottleneck: two more; decoder: per level one upconv(+BN+ReLU),
  // one concat and two conv blocks; then the final 1x1x1 conv and the
  // input->output residual skip.
  c.conv3 = 2 * cfg.depth + 2 + 2 * cfg.depth;
  c.maxpool = cfg.depth;
  c.upconv = cfg.depth;
  c.batchnorm = c.conv3 + c.upconv;
  c.relu = c.batchnorm;
  c.concat = cfg.depth;
  c.final_conv = 1;
  return c;
}

std::int64_t parameter_count(const LotUnetConfig& cfg) {
  const UnetConfig& u = cfg.unet;
  std::int64_t total = 0;
  // Convolutions inside conv+BN blocks are bias-free (the BN beta plays
  // that role); only the final 1x1x1 convolution carries a bias.
  auto conv3 = [&](std::int64_t cin, std::int64_t cout) { total += 27 * cin * cout; };
  auto conv1 = [&](std::int64_t cin, std::int64_t cout) { total += cin * cout + cout; };
  auto upconv = [&](std::int64_t cin, std::int64_t cout) { total += 8 * cin * cout; };
  auto bn = [&](std::int64_t ch) { total += 2 * ch; };  // gamma, beta

  if (cfg.lot_mode == LotMode::learnable) total += 27 * cfg.lot_kernels;

  std::int64_t ch = u.base_channels;
  std::int64_t cin = u.in_channels;
  for (int d = 0; d < u.depth; ++d) {
    conv3(cin, ch); bn(ch);
    conv3(ch, ch); bn(ch);
    cin = ch;
    ch *= 2;
  }
  conv3(cin, ch); bn(ch);
  conv3(ch, ch); bn(ch);
  std::int64_t prev = ch;
  for (int d = u.depth - 1; d >= 0; --d) {
    const std::int64_t skip_ch = u.base_channels * (std::int64_t{1} << d);
    upconv(prev, skip_ch); bn(skip_ch);
    conv3(2 * skip_ch, skip_ch); bn(skip_ch);
    conv3(skip_ch, skip_ch); bn(skip_ch);
    prev = skip_ch;
  }
  conv1(prev, u.out_channels);
  return total;
}

const char* target_name(Target t) { return t == Target::iqfm ? "iqfm" : "iqsm"; }

Target target_from_name(const std::string& name) {
  if (name == "iqfm") return Target::iqfm;
  if (name == "iqsm") return Target::iqsm;
  throw DomainError("unknown target '" + name + "' (expected iqfm or iqsm)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DomainError("TrainConfig: epochs must be >= 1");
  if (batch < 1) throw DomainError("TrainConfig: batch must be >= 1");
  if (!(lr_boundaries[0] < lr_boundaries[1])) {
    throw DomainError("TrainConfig: learning-rate schedule boundaries must be ordered");
  }
  if (noisy_fraction < 0.0 || noisy_fraction > 1.0) {
    throw DomainError("TrainConfig: noisy_fraction must be in [0, 1]");
  }
  if (!(noise_snr_range[0] > 0.0) || noise_snr_range[0] > noise_snr_range[1]) {
    throw DomainError("TrainConfig: noise_snr_range must be positive and ordered");
  }
  if (!(init_std > 0.0)) throw DomainError("TrainConfig: init_std must be positive");
}

double TrainConfig::learning_rate(int epoch_1based) const {
  if (epoch_1based <= lr_boundaries[0]) return lr_stages[0];
  if (epoch_1based <= lr_boundaries[1]) return lr_stages[1];
  return lr_stages[2];
}

}  // namespace qsmlot::nn
