#pragma once

#include <chrono>
#include <vector>

#include "qsmlot/datagen.hpp"
#include "qsmlot/dipole.hpp"
#include "qsmlot/nn/adam.hpp"
#include "qsmlot/nn/checkpoint.hpp"
#include "qsmlot/nn/unet.hpp"

namespace qsmlot::nn {

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;
  int epochs_run = 0;
};

// Trains an iQFM (local-field label) or iQSM (susceptibility label) network
// with Adam, the staged learning-rate schedule and the two noise-adding
// blocks: with probability noisy_fraction a sample's complex representation
// gets Eq.-5-style Gaussian noise (SNR drawn from noise_snr_range) before
// the LoT layer. Single-threaded reductions, so checkpoints are
// deterministic given the seed. Throws ConvergenceError if the loss turns
// non-finite.
template <class T>
TrainResult train(const std::vector<TrainingSample>& dataset, Target target,
                  const LotUnetConfig& model_cfg, const TrainConfig& cfg,
                  const std::string& config_hash = {}) {
  cfg.validate();
  if (dataset.empty()) throw DomainError("train: dataset is empty");

  LotUnet<T> model(model_cfg);
  Rng init_rng(Rng::derive(cfg.seed, 1));
  model.init(init_rng, cfg.init_std);

  Adam<T> opt(model.params());
  Rng rng(Rng::derive(cfg.seed, 2));

  const Dims3 dims = dataset[0].phase_w.dims;
  for (const auto& s : dataset) {
    detail::require_same_dims(s.phase_w.dims, dims, "train");
  }

  std::vector<int> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  TrainResult result;
  double first_epoch_loss = 0.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    // Fisher-Yates reshuffle per epoch.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    std::int64_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const int bsz = static_cast<int>(end - start);

      Tensor5<T> phase(bsz, 1, dims.nx, dims.ny, dims.nz);
      Tensor5<T> label(bsz, 1, dims.nx, dims.ny, dims.nz);
      std::vector<double> te(static_cast<std::size_t>(bsz));
      double b0 = dataset[0].b0_tesla;
      for (int b = 0; b < bsz; ++b) {
        const TrainingSample& s = dataset[static_cast<std::size_t>(order[start + static_cast<std::size_t>(b)])];
        te[static_cast<std::size_t>(b)] = s.te_s;
        b0 = s.b0_tesla;

        const ScalarVolume* phase_src = &s.phase_w;
        ScalarVolume noisy_phase;
        if (cfg.noisy_fraction > 0.0 && rng.bernoulli(cfg.noisy_fraction)) {
          const double snr = rng.uniform(cfg.noise_snr_range[0], cfg.noise_snr_range[1]);
          Mask all(dims, true);
          auto [mag_n, phase_n] =
              add_complex_noise(s.magnitude, s.phase_w, NoiseSpec{snr, rng.next_u64()}, all);
          noisy_phase = std::move(phase_n);
          phase_src = &noisy_phase;
        }
        const ScalarVolume& lab = target == Target::iqfm ? s.local_field : s.chi;
        T* pp = phase.slice(b, 0);
        T* pl = label.slice(b, 0);
        for (std::int64_t i = 0; i < phase.spatial(); ++i) {
          pp[i] = static_cast<T>(phase_src->data[static_cast<std::size_t>(i)]);
          pl[i] = static_cast<T>(lab.data[static_cast<std::size_t>(i)]);
        }
      }

      opt.zero_grad();
      const Tensor5<T> pred = model.forward(phase, te, b0, /*train=*/true);
      Tensor5<T> grad;
      const double loss = mse_loss(pred, label, &grad);
      if (!std::isfinite(loss)) {
        throw ConvergenceError("train: loss diverged (non-finite) at epoch " +
                                   std::to_string(epoch),
                               loss);
      }
      model.backward(grad);
      opt.step(lr);
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    result.epoch_loss.push_back(epoch_loss);
    result.epochs_run = epoch;
    if (epoch == 1) first_epoch_loss = epoch_loss;
    if (cfg.stop_loss_ratio > 0.0 && epoch_loss <= cfg.stop_loss_ratio * first_epoch_loss) {
      break;
    }
  }

  result.checkpoint = snapshot(model, target, result.epochs_run, config_hash, result.epoch_loss);
  return result;
}

struct InferStats {
  double seconds = 0.0;
  Dims3 padded_dims;
};

// Runs the trained network on each echo (noise blocks are a training-time
// construct and do not exist here), rescales outputs per the echo-fit
// contract Y_i = out_i * TE_i and magnitude-weight-fits across echoes.
// Spatial dims are zero-padded up to the next multiple of 2^depth and the
// result is cropped back. Single-echo input skips the fit (the weighted
// fit reduces to out_1 in that case anyway).
template <class T>
ScalarVolume infer(const EchoSeries& series, LotUnet<T>& model, Target target,
                   InferStats* stats = nullptr) {
  series.validate();
  if (series.phases.empty()) throw DomainError("infer: no echoes");
  const auto t0 = std::chrono::steady_clock::now();

  const Dims3 dims = series.phases[0].dims;
  const int div = 1 << model.config().unet.depth;
  auto pad_up = [div](int v) { return ((v + div - 1) / div) * div; };
  const Dims3 padded{pad_up(dims.nx), pad_up(dims.ny), pad_up(dims.nz)};

  std::vector<ScalarVolume> te_scaled;
  te_scaled.reserve(series.phases.size());
  for (std::size_t e = 0; e < series.phases.size(); ++e) {
    Tensor5<T> x(1, 1, padded.nx, padded.ny, padded.nz);
    for (int z = 0; z < dims.nz; ++z) {
      for (int y = 0; y < dims.ny; ++y) {
        for (int xx = 0; xx < dims.nx; ++xx) {
          x.at(0, 0, xx, y, z) = static_cast<T>(series.phases[e].at(xx, y, z));
        }
      }
    }
    const double te = series.params.te_s[e];
    const Tensor5<T> out = model.forward(x, {te}, series.params.b0_tesla, /*train=*/false);

    ScalarVolume vol(dims, Unit::ppm, 0.0, series.phases[e].spacing);
    for (int z = 0; z < dims.nz; ++z) {
      for (int y = 0; y < dims.ny; ++y) {
        for (int xx = 0; xx < dims.nx; ++xx) {
          vol.at(xx, y, z) = static_cast<double>(out.at(0, 0, xx, y, z)) * te;
        }
      }
    }
    te_scaled.push_back(std::move(vol));
  }

  ScalarVolume result = echo_fit(te_scaled, series.magnitudes, series.params.te_s).value;
  result.unit = Unit::ppm;
  if (stats) {
    stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stats->padded_dims = padded;
  }
  return result;
}

}  // namespace qsmlot::nn
