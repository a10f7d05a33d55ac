#include "qsmlot/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "qsmlot/io/hash.hpp"

namespace qsmlot {

namespace {

using nlohmann::json;

// Collects every key not present in the allowed set, recursively, so a
// single error reports all offending keys at once.
void check_keys(const json& j, const std::map<std::string, std::set<std::string>>& schema,
                const std::string& section, std::vector<std::string>& offending) {
  if (!j.is_object()) return;
  const auto it = schema.find(section);
  if (it == schema.end()) return;
  for (const auto& [key, value] : j.items()) {
    if (!it->second.contains(key)) {
      offending.push_back(section.empty() ? key : section + "." + key);
      continue;
    }
    const std::string child = section.empty() ? key : section + "." + key;
    if (schema.contains(child)) check_keys(value, schema, child, offending);
  }
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"", {"seed", "b0_tesla", "gamma_bar_mhz_per_t", "stencil", "tkd", "resharp", "pathology",
            "crop", "te", "noise", "model", "train", "metrics", "dataset", "ablate"}},
      {"tkd", {"threshold"}},
      {"resharp", {"smv_radius", "lambda", "cg_tol", "cg_max_iter"}},
      {"pathology",
       {"n_spheres", "n_rects", "n_cubes", "shape_frac", "base_dims", "resize_range",
        "hemorrhage_ppm", "calcification_ppm", "hemorrhage_prob"}},
      {"crop", {"window", "stride"}},
      {"te", {"mean_s", "std_s", "min_s", "max_s"}},
      {"noise", {"enabled", "snr"}},
      {"model", {"lot_mode", "lot_kernels", "depth", "base_channels"}},
      {"train",
       {"epochs", "batch", "lr_stages", "lr_boundaries", "init_std", "noisy_fraction",
        "noise_snr_range", "stop_loss_ratio"}},
      {"metrics", {"ssim_window", "ssim_sigma", "k1", "k2", "dynamic_range"}},
      {"dataset", {"n", "healthy_fraction", "patch_dims", "bg_rms_ppm"}},
      {"ablate", {"size", "lesion_ppm", "te_s", "seeds"}},
  };
  return s;
}

template <typename T>
void read_range(const json& j, const char* key, Range<T>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  out.lo = a.at(0).get<T>();
  out.hi = a.at(1).get<T>();
}

void read_dims(const json& j, const char* key, Dims3& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  out = Dims3{a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>()};
}

}  // namespace

void PipelineConfig::validate() const {
  if (stencil != "canonical27") {
    throw DomainError("config: unknown stencil '" + stencil + "' (only canonical27 is provided)");
  }
  if (!(b0_tesla > 0.0)) throw DomainError("config: b0_tesla must be positive");
  if (!(gamma_bar_mhz_per_t > 0.0)) throw DomainError("config: gamma_bar must be positive");
  if (!(tkd_threshold > 0.0) || tkd_threshold > 1.0 / 3.0 + 1e-15) {
    throw DomainError("config: tkd.threshold must be in (0, 1/3]");
  }
  resharp.validate();
  pathology.validate();
  crop.validate();
  te.validate();
  if (!(noise_snr > 0.0)) throw DomainError("config: noise.snr must be positive");
  model.validate();
  train.validate();
  if (dataset_n < 1) throw DomainError("config: dataset.n must be >= 1");
  if (healthy_fraction < 0.0 || healthy_fraction > 1.0) {
    throw DomainError("config: dataset.healthy_fraction must be in [0, 1]");
  }
  if (ablate_size < 16) throw DomainError("config: ablate.size must be >= 16");
  if (ablate_seeds < 1) throw DomainError("config: ablate.seeds must be >= 1");
}

std::string PipelineConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["b0_tesla"] = b0_tesla;
  j["gamma_bar_mhz_per_t"] = gamma_bar_mhz_per_t;
  j["stencil"] = stencil;
  j["tkd"] = {{"threshold", tkd_threshold}};
  j["resharp"] = {{"smv_radius", resharp.smv_radius},
                  {"lambda", resharp.tikhonov_lambda},
                  {"cg_tol", resharp.cg_tol},
                  {"cg_max_iter", resharp.cg_max_iter}};
  j["pathology"] = {{"n_spheres", {pathology.n_spheres.lo, pathology.n_spheres.hi}},
                    {"n_rects", {pathology.n_rects.lo, pathology.n_rects.hi}},
                    {"n_cubes", {pathology.n_cubes.lo, pathology.n_cubes.hi}},
                    {"shape_frac", {pathology.shape_frac.lo, pathology.shape_frac.hi}},
                    {"base_dims", {pathology.base_dims.nx, pathology.base_dims.ny, pathology.base_dims.nz}},
                    {"resize_range", {pathology.resize_range.lo, pathology.resize_range.hi}},
                    {"hemorrhage_ppm", {pathology.hemorrhage_ppm.lo, pathology.hemorrhage_ppm.hi}},
                    {"calcification_ppm", {pathology.calcification_ppm.lo, pathology.calcification_ppm.hi}},
                    {"hemorrhage_prob", pathology.hemorrhage_prob}};
  j["crop"] = {{"window", {crop.window.nx, crop.window.ny, crop.window.nz}},
               {"stride", {crop.stride.nx, crop.stride.ny, crop.stride.nz}}};
  j["te"] = {{"mean_s", te.mean_s}, {"std_s", te.std_s}, {"min_s", te.min_s}, {"max_s", te.max_s}};
  j["noise"] = {{"enabled", noise_enabled}, {"snr", noise_snr}};
  j["model"] = {{"lot_mode", model.lot_mode == nn::LotMode::fixed ? "fixed" : "learnable"},
                {"lot_kernels", model.lot_kernels},
                {"depth", model.unet.depth},
                {"base_channels", model.unet.base_channels}};
  j["train"] = {{"epochs", train.epochs},
                {"batch", train.batch},
                {"lr_stages", train.lr_stages},
                {"lr_boundaries", train.lr_boundaries},
                {"init_std", train.init_std},
                {"noisy_fraction", train.noisy_fraction},
                {"noise_snr_range", train.noise_snr_range},
                {"stop_loss_ratio", train.stop_loss_ratio}};
  j["metrics"] = {{"ssim_window", ssim.window},
                  {"ssim_sigma", ssim.sigma},
                  {"k1", ssim.k1},
                  {"k2", ssim.k2}};
  if (ssim.dynamic_range) j["metrics"]["dynamic_range"] = *ssim.dynamic_range;
  j["dataset"] = {{"n", dataset_n},
                  {"healthy_fraction", healthy_fraction},
                  {"patch_dims", {patch_dims.nx, patch_dims.ny, patch_dims.nz}},
                  {"bg_rms_ppm", bg_rms_ppm}};
  j["ablate"] = {{"size", ablate_size},
                 {"lesion_ppm", ablate_lesion_ppm},
                 {"te_s", ablate_te_s},
                 {"seeds", ablate_seeds}};
  return j.dump(2);
}

std::string PipelineConfig::hash() const {
  const std::string dump = to_json();
  return io::hex64(io::fnv1a64(dump.data(), dump.size()));
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what(), {});
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object", {});

  std::vector<std::string> offending;
  check_keys(j, schema(), "", offending);
  if (!offending.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : offending) msg += " " + k;
    throw ConfigError(msg, offending);
  }

  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.b0_tesla = j.value("b0_tesla", c.b0_tesla);
    c.gamma_bar_mhz_per_t = j.value("gamma_bar_mhz_per_t", c.gamma_bar_mhz_per_t);
    c.stencil = j.value("stencil", c.stencil);
    if (j.contains("tkd")) c.tkd_threshold = j["tkd"].value("threshold", c.tkd_threshold);
    if (j.contains("resharp")) {
      const auto& r = j["resharp"];
      c.resharp.smv_radius = r.value("smv_radius", c.resharp.smv_radius);
      c.resharp.tikhonov_lambda = r.value("lambda", c.resharp.tikhonov_lambda);
      c.resharp.cg_tol = r.value("cg_tol", c.resharp.cg_tol);
      c.resharp.cg_max_iter = r.value("cg_max_iter", c.resharp.cg_max_iter);
    }
    if (j.contains("pathology")) {
      const auto& p = j["pathology"];
      read_range(p, "n_spheres", c.pathology.n_spheres);
      read_range(p, "n_rects", c.pathology.n_rects);
      read_range(p, "n_cubes", c.pathology.n_cubes);
      read_range(p, "shape_frac", c.pathology.shape_frac);
      read_dims(p, "base_dims", c.pathology.base_dims);
      read_range(p, "resize_range", c.pathology.resize_range);
      read_range(p, "hemorrhage_ppm", c.pathology.hemorrhage_ppm);
      read_range(p, "calcification_ppm", c.pathology.calcification_ppm);
      c.pathology.hemorrhage_prob = p.value("hemorrhage_prob", c.pathology.hemorrhage_prob);
    }
    if (j.contains("crop")) {
      read_dims(j["crop"], "window", c.crop.window);
      read_dims(j["crop"], "stride", c.crop.stride);
    }
    if (j.contains("te")) {
      const auto& t = j["te"];
      c.te.mean_s = t.value("mean_s", c.te.mean_s);
      c.te.std_s = t.value("std_s", c.te.std_s);
      c.te.min_s = t.value("min_s", c.te.min_s);
      c.te.max_s = t.value("max_s", c.te.max_s);
    }
    if (j.contains("noise")) {
      c.noise_enabled = j["noise"].value("enabled", c.noise_enabled);
      c.noise_snr = j["noise"].value("snr", c.noise_snr);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      const std::string mode = m.value("lot_mode", "fixed");
      if (mode != "fixed" && mode != "learnable") {
        throw DomainError("config: model.lot_mode must be fixed or learnable");
      }
      c.model.lot_mode = mode == "fixed" ? nn::LotMode::fixed : nn::LotMode::learnable;
      c.model.lot_kernels = m.value("lot_kernels", c.model.lot_kernels);
      c.model.unet.depth = m.value("depth", c.model.unet.depth);
      c.model.unet.base_channels = m.value("base_channels", c.model.unet.base_channels);
      c.model.unet.in_channels = c.model.lot_out_channels();
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch = t.value("batch", c.train.batch);
      if (t.contains("lr_stages")) {
        for (int i = 0; i < 3; ++i) c.train.lr_stages[static_cast<std::size_t>(i)] = t["lr_stages"].at(i).get<double>();
      }
      if (t.contains("lr_boundaries")) {
        for (int i = 0; i < 2; ++i) c.train.lr_boundaries[static_cast<std::size_t>(i)] = t["lr_boundaries"].at(i).get<int>();
      }
      c.train.init_std = t.value("init_std", c.train.init_std);
      c.train.noisy_fraction = t.value("noisy_fraction", c.train.noisy_fraction);
      if (t.contains("noise_snr_range")) {
        for (int i = 0; i < 2; ++i) c.train.noise_snr_range[static_cast<std::size_t>(i)] = t["noise_snr_range"].at(i).get<double>();
      }
      c.train.stop_loss_ratio = t.value("stop_loss_ratio", c.train.stop_loss_ratio);
    }
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      c.ssim.window = m.value("ssim_window", c.ssim.window);
      c.ssim.sigma = m.value("ssim_sigma", c.ssim.sigma);
      c.ssim.k1 = m.value("k1", c.ssim.k1);
      c.ssim.k2 = m.value("k2", c.ssim.k2);
      if (m.contains("dynamic_range")) c.ssim.dynamic_range = m["dynamic_range"].get<double>();
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      c.dataset_n = d.value("n", c.dataset_n);
      c.healthy_fraction = d.value("healthy_fraction", c.healthy_fraction);
      read_dims(d, "patch_dims", c.patch_dims);
      c.bg_rms_ppm = d.value("bg_rms_ppm", c.bg_rms_ppm);
    }
    if (j.contains("ablate")) {
      const auto& a = j["ablate"];
      c.ablate_size = a.value("size", c.ablate_size);
      c.ablate_lesion_ppm = a.value("lesion_ppm", c.ablate_lesion_ppm);
      c.ablate_te_s = a.value("te_s", c.ablate_te_s);
      c.ablate_seeds = a.value("seeds", c.ablate_seeds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed value: ") + e.what(), {});
  }

  c.train.seed = c.seed;
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

}  // namespace qsmlot
