// qsmlot command-line tool: composes the library into the full pipelines
// (simulate, reconstruct, train, infer, evaluate, ablate, render).
//
// Exit codes: 0 success, 1 validation (bad flags/config/inputs),
// 2 runtime/IO, 3 solver non-convergence.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "qsmlot/ablation.hpp"
#include "qsmlot/background.hpp"
#include "qsmlot/config.hpp"
#include "qsmlot/datagen.hpp"
#include "qsmlot/dipole.hpp"
#include "qsmlot/io/nifti.hpp"
#include "qsmlot/io/png.hpp"
#include "qsmlot/metrics.hpp"
#include "qsmlot/nn/checkpoint.hpp"
#include "qsmlot/nn/train.hpp"
#include "qsmlot/phase.hpp"

using namespace qsmlot;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

PipelineConfig load_config(const CommonOpts& opts) {
  PipelineConfig cfg = opts.config_path.empty() ? PipelineConfig::from_json_text("{}")
                                                : PipelineConfig::load(opts.config_path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.train.seed = *opts.seed;
  }
  std::cerr << "config hash: " << cfg.hash() << "\n";
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Pipeline configuration file (JSON)");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
}

EchoSeries load_echo_series(const std::vector<std::string>& phase_paths,
                            const std::vector<std::string>& mag_paths,
                            const std::vector<double>& te_s, double b0, double gamma_bar) {
  if (phase_paths.empty()) throw DomainError("no phase volumes given");
  if (te_s.size() != phase_paths.size()) {
    throw DomainError("need exactly one --te per phase volume");
  }
  if (!mag_paths.empty() && mag_paths.size() != phase_paths.size()) {
    throw DomainError("need either no magnitudes or one per phase volume");
  }
  EchoSeries series;
  series.params.b0_tesla = b0;
  series.params.gamma_bar_mhz_per_t = gamma_bar;
  series.params.te_s = te_s;
  for (std::size_t i = 0; i < phase_paths.size(); ++i) {
    series.phases.push_back(io::nifti_read_volume(phase_paths[i], Unit::radians));
    if (mag_paths.empty()) {
      series.magnitudes.emplace_back(series.phases.back().dims, Unit::dimensionless, 1.0,
                                     series.phases.back().spacing);
    } else {
      series.magnitudes.push_back(io::nifti_read_volume(mag_paths[i]));
    }
  }
  series.validate();
  return series;
}

int run(CLI::App& app, int argc, char** argv);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsmlot - single-step (LoT-Unet) and classical QSM pipelines on synthetic phantoms"};
  app.require_subcommand(1);
  try {
    return run(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConvergenceError& e) {
    std::cerr << "error (convergence): " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return 1;
  } catch (const StructuralError& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

namespace {

int run(CLI::App& app, int argc, char** argv) {
  // ---- simulate ----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic training dataset");
  CommonOpts sim_common;
  add_common(sim, sim_common);
  int sim_n = -1;
  std::string sim_out;
  std::vector<std::string> sim_healthy;
  sim->add_option("--n", sim_n, "Number of samples (overrides config dataset.n)");
  sim->add_option("--healthy", sim_healthy,
                  "Healthy susceptibility patch volumes (.nii, patch-sized); procedural phantoms when omitted");
  sim->add_option("--out", sim_out, "Output directory")->required();

  // ---- lot ---------------------------------------------------------------
  auto* lot_cmd = app.add_subcommand("lot", "Raw wrapped phase -> LoT map");
  CommonOpts lot_common;
  add_common(lot_cmd, lot_common);
  std::string lot_phase, lot_out;
  double lot_te = 0.02;
  double lot_b0 = -1.0;
  lot_cmd->add_option("--phase", lot_phase, "Wrapped phase volume (.nii)")->required();
  lot_cmd->add_option("--te", lot_te, "Echo time in seconds")->required();
  lot_cmd->add_option("--b0", lot_b0, "Field strength in tesla (default from config)");
  lot_cmd->add_option("--out", lot_out, "Output volume")->required();

  // ---- unwrap ------------------------------------------------------------
  auto* unwrap_cmd = app.add_subcommand("unwrap", "Laplacian phase unwrapping");
  CommonOpts unwrap_common;
  add_common(unwrap_cmd, unwrap_common);
  std::string unwrap_phase, unwrap_out;
  unwrap_cmd->add_option("--phase", unwrap_phase, "Wrapped phase volume (.nii)")->required();
  unwrap_cmd->add_option("--out", unwrap_out, "Output volume")->required();

  // ---- bgremove ----------------------------------------------------------
  auto* bg_cmd = app.add_subcommand("bgremove", "RESHARP background field removal");
  CommonOpts bg_common;
  add_common(bg_cmd, bg_common);
  std::string bg_field, bg_mask, bg_out, bg_mask_out;
  std::optional<int> bg_radius;
  std::optional<double> bg_lambda;
  bg_cmd->add_option("--field", bg_field, "Total field volume, ppm (.nii)")->required();
  bg_cmd->add_option("--mask", bg_mask, "Brain mask (.nii)")->required();
  bg_cmd->add_option("--out", bg_out, "Local field output")->required();
  bg_cmd->add_option("--mask-out", bg_mask_out, "Write the eroded mask here");
  bg_cmd->add_option("--radius", bg_radius, "SMV radius in voxels");
  bg_cmd->add_option("--lambda", bg_lambda, "Tikhonov regularization weight");

  // ---- invert-tkd --------------------------------------------------------
  auto* tkd_cmd = app.add_subcommand("invert-tkd", "Truncated k-space dipole inversion");
  CommonOpts tkd_common;
  add_common(tkd_cmd, tkd_common);
  std::string tkd_field, tkd_out, tkd_mask;
  std::optional<double> tkd_threshold;
  tkd_cmd->add_option("--field", tkd_field, "Local field volume, ppm (.nii)")->required();
  tkd_cmd->add_option("--out", tkd_out, "Susceptibility output")->required();
  tkd_cmd->add_option("--mask", tkd_mask, "Optional mask applied to the output");
  tkd_cmd->add_option("--threshold", tkd_threshold, "TKD threshold in (0, 1/3]");

  // ---- echofit -----------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("echofit", "Magnitude-weighted least-squares echo fitting");
  CommonOpts fit_common;
  add_common(fit_cmd, fit_common);
  std::vector<std::string> fit_inputs, fit_mags;
  std::vector<double> fit_tes;
  std::string fit_out;
  fit_cmd->add_option("--input", fit_inputs, "Per-echo TE-scaled volumes")->required();
  fit_cmd->add_option("--mag", fit_mags, "Per-echo magnitude volumes (default all-ones)");
  fit_cmd->add_option("--te", fit_tes, "Echo times in seconds")->required();
  fit_cmd->add_option("--out", fit_out, "Fitted output volume")->required();

  // ---- train -------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train an iQFM or iQSM network");
  CommonOpts train_common;
  add_common(train_cmd, train_common);
  std::string train_data, train_target = "iqsm", train_out;
  std::optional<int> train_epochs, train_batch;
  train_cmd->add_option("--data", train_data, "Dataset manifest (manifest.json) or its directory")
      ->required();
  train_cmd->add_option("--target", train_target, "iqfm or iqsm")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint output path")->required();
  train_cmd->add_option("--epochs", train_epochs, "Override config train.epochs");
  train_cmd->add_option("--batch", train_batch, "Override config train.batch");

  // ---- infer -------------------------------------------------------------
  auto* infer_cmd = app.add_subcommand("infer", "Run a trained network on wrapped phase echoes");
  CommonOpts infer_common;
  add_common(infer_cmd, infer_common);
  std::string infer_ckpt, infer_out, infer_target;
  std::vector<std::string> infer_phases, infer_mags;
  std::vector<double> infer_tes;
  double infer_b0 = -1.0;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "Trained checkpoint")->required();
  infer_cmd->add_option("--phase", infer_phases, "Wrapped phase volume(s), one per echo")->required();
  infer_cmd->add_option("--mag", infer_mags, "Magnitude volume(s), one per echo");
  infer_cmd->add_option("--te", infer_tes, "Echo time(s) in seconds")->required();
  infer_cmd->add_option("--target", infer_target, "iqfm or iqsm; must match the checkpoint");
  infer_cmd->add_option("--b0", infer_b0, "Field strength in tesla (default from config)");
  infer_cmd->add_option("--out", infer_out, "Output volume")->required();

  // ---- metrics -----------------------------------------------------------
  auto* met_cmd = app.add_subcommand("metrics", "PSNR / SSIM / NRMSE report");
  CommonOpts met_common;
  add_common(met_cmd, met_common);
  std::string met_recon, met_truth, met_mask, met_out;
  std::vector<std::string> met_rois;
  std::vector<double> met_profile_start, met_profile_end;
  int met_profile_samples = 100;
  met_cmd->add_option("--recon", met_recon, "Reconstruction (.nii)")->required();
  met_cmd->add_option("--truth", met_truth, "Ground truth (.nii)")->required();
  met_cmd->add_option("--mask", met_mask, "Evaluation mask (.nii)")->required();
  met_cmd->add_option("--roi", met_rois, "ROI masks as label=path");
  met_cmd->add_option("--profile-start", met_profile_start, "Line profile start voxel x y z")
      ->expected(3);
  met_cmd->add_option("--profile-end", met_profile_end, "Line profile end voxel x y z")
      ->expected(3);
  met_cmd->add_option("--profile-samples", met_profile_samples, "Line profile sample count");
  met_cmd->add_option("--out", met_out, "Write the JSON report here (also printed)");

  // ---- ablate ------------------------------------------------------------
  auto* abl_cmd = app.add_subcommand("ablate", "Step-wise error decomposition on a hemorrhage phantom");
  CommonOpts abl_common;
  add_common(abl_cmd, abl_common);
  std::string abl_out, abl_ckpt;
  abl_cmd->add_option("--out", abl_out, "Output directory")->required();
  abl_cmd->add_option("--checkpoint", abl_ckpt, "Optional trained checkpoint for the network path");

  // ---- render ------------------------------------------------------------
  auto* ren_cmd = app.add_subcommand("render", "Render grayscale PNG slices");
  CommonOpts ren_common;
  add_common(ren_cmd, ren_common);
  std::string ren_in, ren_axis = "z", ren_prefix;
  std::vector<int> ren_indices;
  double ren_lo = -0.1, ren_hi = 0.1;
  ren_cmd->add_option("--in", ren_in, "Input volume (.nii)")->required();
  ren_cmd->add_option("--axis", ren_axis, "Slice axis: x, y or z");
  ren_cmd->add_option("--index", ren_indices, "Slice indices")->required();
  ren_cmd->add_option("--lo", ren_lo, "Window low");
  ren_cmd->add_option("--hi", ren_hi, "Window high");
  ren_cmd->add_option("--out-prefix", ren_prefix, "Output path prefix")->required();

  app.parse(argc, argv);

  if (sim->parsed()) {
    PipelineConfig cfg = load_config(sim_common);
    DatasetBuildConfig build;
    build.n_samples = sim_n > 0 ? sim_n : cfg.dataset_n;
    build.healthy_fraction = cfg.healthy_fraction;
    build.patch_dims = cfg.patch_dims;
    build.pathology = cfg.pathology;
    build.te = cfg.te;
    build.b0_tesla = cfg.b0_tesla;
    build.bg_rms_ppm = cfg.bg_rms_ppm;
    if (cfg.noise_enabled) build.noise_snr = cfg.noise_snr;
    build.master_seed = cfg.seed;
    for (const auto& h : sim_healthy) build.healthy_sources.emplace_back(h);
    const auto man = build_dataset(build, sim_out);
    std::cout << "wrote " << man.n_samples << " samples (" << man.healthy_count << " healthy, "
              << man.pathological_count << " pathological) to " << sim_out << "\n";
    return 0;
  }

  if (lot_cmd->parsed()) {
    PipelineConfig cfg = load_config(lot_common);
    const double b0 = lot_b0 > 0 ? lot_b0 : cfg.b0_tesla;
    const auto phase = io::nifti_read_volume(lot_phase, Unit::radians);
    io::nifti_write(lot(phase, b0, lot_te), lot_out);
    std::cout << "wrote " << lot_out << "\n";
    return 0;
  }

  if (unwrap_cmd->parsed()) {
    load_config(unwrap_common);
    const auto phase = io::nifti_read_volume(unwrap_phase, Unit::radians);
    io::nifti_write(laplacian_unwrap(phase), unwrap_out);
    std::cout << "wrote " << unwrap_out << "\n";
    return 0;
  }

  if (bg_cmd->parsed()) {
    PipelineConfig cfg = load_config(bg_common);
    ResharpConfig rcfg = cfg.resharp;
    if (bg_radius) rcfg.smv_radius = *bg_radius;
    if (bg_lambda) rcfg.tikhonov_lambda = *bg_lambda;
    const auto field = io::nifti_read_volume(bg_field, Unit::ppm);
    const auto mask = io::nifti_read_mask(bg_mask);
    const auto res = resharp(field, mask, rcfg);
    io::nifti_write(res.local_field, bg_out);
    if (!bg_mask_out.empty()) io::nifti_write_mask(res.eroded_mask, bg_mask_out);
    std::cout << "wrote " << bg_out << " (CG iterations: " << res.iterations
              << ", relative residual: " << res.relative_residual << ")\n";
    return 0;
  }

  if (tkd_cmd->parsed()) {
    PipelineConfig cfg = load_config(tkd_common);
    const double threshold = tkd_threshold.value_or(cfg.tkd_threshold);
    const auto field = io::nifti_read_volume(tkd_field, Unit::ppm);
    const auto kernel = DipoleKernel::make(field.dims, field.spacing);
    auto chi = tkd_invert(field, kernel, threshold);
    if (!tkd_mask.empty()) {
      const auto mask = io::nifti_read_mask(tkd_mask);
      detail::require_same_dims(chi.dims, mask.dims, "invert-tkd mask");
      for (std::size_t i = 0; i < chi.data.size(); ++i) {
        if (!mask.data[i]) chi.data[i] = 0.0;
      }
    }
    io::nifti_write(chi, tkd_out);
    std::cout << "wrote " << tkd_out << "\n";
    return 0;
  }

  if (fit_cmd->parsed()) {
    load_config(fit_common);
    std::vector<ScalarVolume> values, mags;
    for (const auto& p : fit_inputs) values.push_back(io::nifti_read_volume(p, Unit::ppm));
    if (fit_mags.empty()) {
      for (const auto& v : values) {
        mags.emplace_back(v.dims, Unit::dimensionless, 1.0, v.spacing);
      }
    } else {
      for (const auto& p : fit_mags) mags.push_back(io::nifti_read_volume(p));
    }
    const auto fit = echo_fit(values, mags, fit_tes);
    io::nifti_write(fit.value, fit_out);
    std::cout << "wrote " << fit_out << " (" << fit.zero_weight.count_true()
              << " zero-weight voxels)\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    PipelineConfig cfg = load_config(train_common);
    nn::TrainConfig tcfg = cfg.train;
    if (train_epochs) tcfg.epochs = *train_epochs;
    if (train_batch) tcfg.batch = *train_batch;
    std::filesystem::path manifest(train_data);
    if (std::filesystem::is_directory(manifest)) manifest /= "manifest.json";
    const auto dataset = load_dataset(manifest);
    const auto target = nn::target_from_name(train_target);
    const auto result = nn::train<float>(dataset, target, cfg.model, tcfg, cfg.hash());
    nn::save_checkpoint(result.checkpoint, train_out);
    std::cout << "trained " << train_target << " for " << result.epochs_run
              << " epochs; first/last loss " << result.epoch_loss.front() << " / "
              << result.epoch_loss.back() << "; wrote " << train_out << "\n";
    return 0;
  }

  if (infer_cmd->parsed()) {
    PipelineConfig cfg = load_config(infer_common);
    const auto ckpt = nn::load_checkpoint(infer_ckpt);
    if (!infer_target.empty() && nn::target_from_name(infer_target) != ckpt.target) {
      throw DomainError("checkpoint was trained for " + std::string(nn::target_name(ckpt.target)) +
                        ", not " + infer_target);
    }
    nn::LotUnet<float> model(ckpt.config);
    nn::restore(ckpt, model);
    const double b0 = infer_b0 > 0 ? infer_b0 : cfg.b0_tesla;
    const auto series =
        load_echo_series(infer_phases, infer_mags, infer_tes, b0, cfg.gamma_bar_mhz_per_t);
    nn::InferStats stats;
    const auto out = nn::infer(series, model, ckpt.target, &stats);
    io::nifti_write(out, infer_out);
    std::cout << "wrote " << infer_out << " (" << stats.seconds << " s on "
              << stats.padded_dims.nx << "x" << stats.padded_dims.ny << "x" << stats.padded_dims.nz
              << ")\n";
    return 0;
  }

  if (met_cmd->parsed()) {
    PipelineConfig cfg = load_config(met_common);
    const auto recon = io::nifti_read_volume(met_recon, Unit::ppm);
    const auto truth = io::nifti_read_volume(met_truth, Unit::ppm);
    const auto mask = io::nifti_read_mask(met_mask);
    std::vector<std::pair<std::string, Mask>> rois;
    for (const auto& spec : met_rois) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw DomainError("--roi expects label=path: " + spec);
      rois.emplace_back(spec.substr(0, eq), io::nifti_read_mask(spec.substr(eq + 1)));
    }
    auto report = evaluate(recon, truth, mask, cfg.ssim, rois);
    if (!met_profile_start.empty() && !met_profile_end.empty()) {
      report.profile = line_profile(recon,
                                    {met_profile_start[0], met_profile_start[1], met_profile_start[2]},
                                    {met_profile_end[0], met_profile_end[1], met_profile_end[2]},
                                    met_profile_samples);
    }
    const std::string json = report.to_json();
    std::cout << json << "\n";
    if (!met_out.empty()) {
      std::ofstream f(met_out, std::ios::trunc);
      if (!f) throw IoError("cannot write " + met_out);
      f << json << "\n";
    }
    return 0;
  }

  if (abl_cmd->parsed()) {
    PipelineConfig cfg = load_config(abl_common);
    AblationConfig acfg;
    acfg.size = cfg.ablate_size;
    acfg.seed = cfg.seed;
    acfg.lesion_ppm = cfg.ablate_lesion_ppm;
    acfg.te_s = cfg.ablate_te_s;
    acfg.b0_tesla = cfg.b0_tesla;
    acfg.gamma_bar_mhz_per_t = cfg.gamma_bar_mhz_per_t;
    acfg.tkd_threshold = cfg.tkd_threshold;
    acfg.resharp = cfg.resharp;
    if (!abl_ckpt.empty()) acfg.checkpoint = abl_ckpt;
    const auto report = run_ablation(acfg, std::filesystem::path(abl_out));
    std::cout << report.to_json() << "\n";
    return 0;
  }

  if (ren_cmd->parsed()) {
    load_config(ren_common);
    const auto vol = io::nifti_read_volume(ren_in);
    io::SliceAxis axis;
    if (ren_axis == "x") {
      axis = io::SliceAxis::x;
    } else if (ren_axis == "y") {
      axis = io::SliceAxis::y;
    } else if (ren_axis == "z") {
      axis = io::SliceAxis::z;
    } else {
      throw DomainError("axis must be x, y or z");
    }
    std::vector<std::filesystem::path> paths;
    for (int idx : ren_indices) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s%03d.png", ren_axis.c_str(), idx);
      paths.emplace_back(ren_prefix + buf);
    }
    io::render_slices(vol, axis, ren_indices, ren_lo, ren_hi, paths);
    for (const auto& p : paths) std::cout << "wrote " << p.string() << "\n";
    return 0;
  }

  return 0;
}

}  // namespace
