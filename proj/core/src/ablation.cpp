#include "qsmlot/ablation.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "qsmlot/datagen.hpp"
#include "qsmlot/fft.hpp"
#include "qsmlot/metrics.hpp"
#include "qsmlot/nn/checkpoint.hpp"
#include "qsmlot/nn/train.hpp"
#include "qsmlot/phase.hpp"
#include "qsmlot/rng.hpp"
#include "qsmlot/io/nifti.hpp"

namespace qsmlot {

namespace {

// Projects chi onto the spectral subspace where |D| >= threshold. Keeps the
// lesion-free control reconstructible by every entry point.
ScalarVolume project_passband(const ScalarVolume& chi, const DipoleKernel& d, double threshold) {
  std::vector<std::complex<double>> buf(chi.data.begin(), chi.data.end());
  auto hat = fft::forward(chi.dims, buf);
  for (std::size_t i = 0; i < hat.size(); ++i) {
    if (std::abs(d.spectrum[i]) < threshold) hat[i] = 0.0;
  }
  const auto back = fft::inverse(chi.dims, hat);
  ScalarVolume out(chi.dims, Unit::ppm, 0.0, chi.spacing);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = back[i].real();
  return out;
}

void paint_sphere(ScalarVolume& vol, Mask& mask, double cx, double cy, double cz, double r,
                  double value) {
  const Dims3 d = vol.dims;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const double dx = x - cx, dy = y - cy, dz = z - cz;
        if (dx * dx + dy * dy + dz * dz <= r * r) {
          vol.at(x, y, z) += value;
          mask.set(x, y, z, true);
        }
      }
}

// Lesion-free control susceptibility: band-passed noise in a k shell where
// the dipole kernel is well above the TKD threshold and the SMV window sees
// the resulting field, spatially confined to the mask centre, at a low
// amplitude so the evolved phase stays smooth. Every pipeline entry is then
// limited only by its own discretization floor.
ScalarVolume make_control_chi(Dims3 dims, const DipoleKernel& kernel, double threshold,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(dims.count()));
  for (auto& v : buf) v = rng.normal();
  auto hat = fft::forward(dims, buf);
  const double k_lo = dims.nx / 8.0, k_hi = dims.nx / 4.0;
  std::size_t i = 0;
  for (int kz = 0; kz < dims.nz; ++kz)
    for (int ky = 0; ky < dims.ny; ++ky)
      for (int kx = 0; kx < dims.nx; ++kx, ++i) {
        const double fx = static_cast<double>(fft::freq_index(kx, dims.nx));
        const double fy = static_cast<double>(fft::freq_index(ky, dims.ny));
        const double fz = static_cast<double>(fft::freq_index(kz, dims.nz));
        const double km = std::sqrt(fx * fx + fy * fy + fz * fz);
        if (km < k_lo || km > k_hi || std::abs(kernel.spectrum[i]) < threshold) hat[i] = 0.0;
      }
  const auto band = fft::inverse(dims, hat);

  ScalarVolume chi(dims, Unit::ppm, 0.0);
  const double c = (dims.nx - 1) / 2.0;
  const double window_r = 0.26 * dims.nx;
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const double dx = x - c, dy = y - c, dz = z - c;
        const double r = std::sqrt(dx * dx + dy * dy + dz * dz) / window_r;
        const double w = r >= 1.0 ? 0.0 : (1.0 - r * r) * (1.0 - r * r);
        chi.at(x, y, z) = band[static_cast<std::size_t>(chi.index(x, y, z))].real() * w;
      }
  chi = project_passband(chi, kernel, threshold);

  double ss = 0.0;
  for (double v : chi.data) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(chi.size()));
  const double target = 0.01;  // ppm; keeps the phase far from wrapping
  if (rms > 0.0) {
    for (auto& v : chi.data) v *= target / rms;
  }
  return chi;
}

}  // namespace

AblationPhantom make_ablation_phantom(const AblationConfig& cfg) {
  if (cfg.size < 32) throw DomainError("ablation: phantom size must be >= 32");
  const Dims3 dims{cfg.size, cfg.size, cfg.size};
  const DipoleKernel kernel = DipoleKernel::make(dims);
  Rng rng(Rng::derive(cfg.seed, 0x0b1a7e));

  const double cx = (dims.nx - 1) / 2.0, cy = (dims.ny - 1) / 2.0, cz = (dims.nz - 1) / 2.0;
  AblationPhantom ph;
  Mask lesion(dims, false);
  if (cfg.lesion_ppm != 0.0) {
    // Compact healthy cluster: smooth field and a few blobs, apodized to
    // the central third so its dipole tails have decayed before the mask
    // edge, then projected onto the TKD passband.
    ScalarVolume healthy = make_healthy_phantom(dims, rng.next_u64());
    const double r_cluster = 0.30 * cfg.size;
    for (int z = 0; z < dims.nz; ++z)
      for (int y = 0; y < dims.ny; ++y)
        for (int x = 0; x < dims.nx; ++x) {
          const double r =
              std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz));
          const double t = r / r_cluster;
          const double w = t >= 1.0 ? 0.0 : (1.0 - t * t) * (1.0 - t * t);
          healthy.at(x, y, z) *= w;
        }
    ph.chi = project_passband(healthy, kernel, cfg.tkd_threshold);
    const double r_lesion = cfg.size / 8.0;
    paint_sphere(ph.chi, lesion, cx + cfg.size * 0.05, cy, cz, r_lesion, cfg.lesion_ppm);
    ph.roi = erode(lesion, 1);
  } else {
    ph.chi = make_control_chi(dims, kernel, cfg.tkd_threshold, rng.next_u64());
    // score the same central region the lesion would occupy
    Mask roi(dims, false);
    ScalarVolume dummy(dims, Unit::ppm, 0.0);
    paint_sphere(dummy, roi, cx, cy, cz, cfg.size / 8.0 - 1.0, 0.0);
    ph.roi = roi;
  }

  ph.brain_mask = make_brain_mask(dims, 0.12);
  const ScalarVolume bg = background_from_exterior_sources(
      dims, ph.brain_mask, Rng::derive(cfg.seed, 0xba0c), cfg.bg_rms_ppm);

  ph.local_field = forward_field(ph.chi, kernel);
  ph.total_field = ph.local_field;
  for (std::size_t i = 0; i < ph.total_field.data.size(); ++i) {
    ph.total_field.data[i] += bg.data[i];
  }

  AcquisitionParams params;
  params.b0_tesla = cfg.b0_tesla;
  params.gamma_bar_mhz_per_t = cfg.gamma_bar_mhz_per_t;
  params.te_s = {cfg.te_s};
  ph.phase_w = phase_evolve(ph.total_field, params, 0);
  ph.roi_truth_mean = roi_stats(ph.chi, ph.roi).mean;
  return ph;
}

const AblationEntry& AblationReport::entry(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw Error("ablation report: no entry named " + name);
}

std::string AblationReport::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["te_s"] = te_s;
  j["lesion_ppm"] = lesion_ppm;
  j["roi_truth_mean_ppm"] = roi_truth_mean_ppm;
  auto arr = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"name", e.name},
                   {"roi_mean_ppm", e.roi_mean_ppm},
                   {"roi_mean_error_rel", e.roi_mean_error_rel},
                   {"mask_nrmse_percent", e.mask_nrmse_percent}});
  }
  j["entries"] = arr;
  return j.dump(2);
}

AblationReport run_ablation(const AblationConfig& cfg,
                            const std::optional<std::filesystem::path>& out_dir) {
  const AblationPhantom ph = make_ablation_phantom(cfg);
  const Dims3 dims = ph.chi.dims;
  const DipoleKernel kernel = DipoleKernel::make(dims);
  const Mask analysis_mask = erode(ph.brain_mask, cfg.resharp.smv_radius);

  AblationReport rep;
  rep.seed = cfg.seed;
  rep.te_s = cfg.te_s;
  rep.lesion_ppm = cfg.lesion_ppm;
  rep.roi_truth_mean_ppm = ph.roi_truth_mean;

  auto score = [&](const std::string& name, const ScalarVolume& chi_rec) {
    AblationEntry e;
    e.name = name;
    e.roi_mean_ppm = roi_stats(chi_rec, ph.roi).mean;
    e.roi_mean_error_rel = std::abs(ph.roi_truth_mean) > 1e-9
                               ? std::abs(e.roi_mean_ppm - ph.roi_truth_mean) / std::abs(ph.roi_truth_mean)
                               : std::numeric_limits<double>::quiet_NaN();
    e.mask_nrmse_percent = nrmse_percent(chi_rec, ph.chi, analysis_mask);
    rep.entries.push_back(e);
    return chi_rec;
  };

  // (a) dipole inversion alone, from the true local field.
  const ScalarVolume chi_a = score("local_field_tkd", tkd_invert(ph.local_field, kernel, cfg.tkd_threshold));

  // (b) background removal + inversion, from the true total field.
  const ResharpResult rb = resharp(ph.total_field, ph.brain_mask, cfg.resharp);
  const ScalarVolume chi_b = score("resharp_tkd", tkd_invert(rb.local_field, kernel, cfg.tkd_threshold));

  // (c) the full chain from the raw wrapped phase.
  const ScalarVolume unwrapped = laplacian_unwrap(ph.phase_w);
  const double phase_per_ppm = 2.0 * 3.14159265358979323846 * cfg.gamma_bar_mhz_per_t *
                               cfg.b0_tesla * cfg.te_s;  // rad per ppm (1e6 factors cancel)
  ScalarVolume total_rec(dims, Unit::ppm, 0.0);
  for (std::size_t i = 0; i < total_rec.data.size(); ++i) {
    total_rec.data[i] = unwrapped.data[i] / phase_per_ppm;
  }
  const ResharpResult rc = resharp(total_rec, ph.brain_mask, cfg.resharp);
  const ScalarVolume chi_c = score("unwrap_resharp_tkd", tkd_invert(rc.local_field, kernel, cfg.tkd_threshold));

  // Optional single-step network path.
  ScalarVolume chi_net;
  if (cfg.checkpoint) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(*cfg.checkpoint);
    nn::LotUnet<float> model(ckpt.config);
    nn::restore(ckpt, model);
    EchoSeries series;
    series.params.b0_tesla = cfg.b0_tesla;
    series.params.gamma_bar_mhz_per_t = cfg.gamma_bar_mhz_per_t;
    series.params.te_s = {cfg.te_s};
    series.phases = {ph.phase_w};
    series.magnitudes = {ScalarVolume(dims, Unit::dimensionless, 1.0)};
    chi_net = score("lot_unet", nn::infer(series, model, ckpt.target));
  }

  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (ec) throw IoError("ablation: cannot create " + out_dir->string() + ": " + ec.message());
    io::nifti_write(ph.chi, *out_dir / "chi_truth.nii");
    io::nifti_write(ph.local_field, *out_dir / "local_field.nii");
    io::nifti_write(ph.total_field, *out_dir / "total_field.nii");
    io::nifti_write(ph.phase_w, *out_dir / "phase_wrapped.nii");
    io::nifti_write_mask(ph.roi, *out_dir / "roi.nii");
    io::nifti_write_mask(ph.brain_mask, *out_dir / "brain_mask.nii");
    auto write_pair = [&](const std::string& tag, const ScalarVolume& rec) {
      io::nifti_write(rec, *out_dir / ("chi_" + tag + ".nii"));
      ScalarVolume diff = rec;
      for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= ph.chi.data[i];
      io::nifti_write(diff, *out_dir / ("diff_" + tag + ".nii"));
    };
    write_pair("local_field_tkd", chi_a);
    write_pair("resharp_tkd", chi_b);
    write_pair("unwrap_resharp_tkd", chi_c);
    if (cfg.checkpoint) write_pair("lot_unet", chi_net);
    std::ofstream rf(*out_dir / "report.json", std::ios::trunc);
    rf << rep.to_json() << "\n";
    if (!rf) throw IoError("ablation: cannot write report in " + out_dir->string());
  }
  return rep;
}

}  // namespace qsmlot
