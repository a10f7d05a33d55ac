#include "qsmlot/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "qsmlot/dipole.hpp"
#include "qsmlot/fft.hpp"
#include "qsmlot/io/hash.hpp"
#include "qsmlot/io/nifti.hpp"

namespace qsmlot {

void PathologyConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("PathologyConfig: ") + what);
  };
  check(n_spheres.ordered() && n_spheres.lo >= 0, "n_spheres range must be ordered and >= 0");
  check(n_rects.ordered() && n_rects.lo >= 0, "n_rects range must be ordered and >= 0");
  check(n_cubes.ordered() && n_cubes.lo >= 0, "n_cubes range must be ordered and >= 0");
  check(shape_frac.ordered() && shape_frac.lo > 0, "shape_frac range must be ordered and positive");
  check(resize_range.ordered() && resize_range.lo >= 1, "resize_range must be ordered and >= 1");
  check(hemorrhage_ppm.ordered(), "hemorrhage range must be ordered");
  check(calcification_ppm.ordered(), "calcification range must be ordered");
  check(hemorrhage_prob >= 0.0 && hemorrhage_prob <= 1.0, "hemorrhage_prob must be in [0,1]");
  check(base_dims.nx > 0 && base_dims.ny > 0 && base_dims.nz > 0, "base_dims must be positive");
}

namespace {

void paint_ellipsoid(Mask& m, double cx, double cy, double cz, double rx, double ry, double rz) {
  const Dims3 d = m.dims;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
  const int x1 = std::min(d.nx - 1, static_cast<int>(std::ceil(cx + rx)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
  const int y1 = std::min(d.ny - 1, static_cast<int>(std::ceil(cy + ry)));
  const int z0 = std::max(0, static_cast<int>(std::floor(cz - rz)));
  const int z1 = std::min(d.nz - 1, static_cast<int>(std::ceil(cz + rz)));
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double u = (x - cx) / rx, v = (y - cy) / ry, w = (z - cz) / rz;
        if (u * u + v * v + w * w <= 1.0) m.set(x, y, z, true);
      }
}

void paint_box(Mask& m, double cx, double cy, double cz, double ex, double ey, double ez) {
  const Dims3 d = m.dims;
  const int x0 = std::max(0, static_cast<int>(std::lround(cx - ex / 2)));
  const int x1 = std::min(d.nx - 1, static_cast<int>(std::lround(cx + ex / 2)));
  const int y0 = std::max(0, static_cast<int>(std::lround(cy - ey / 2)));
  const int y1 = std::min(d.ny - 1, static_cast<int>(std::lround(cy + ey / 2)));
  const int z0 = std::max(0, static_cast<int>(std::lround(cz - ez / 2)));
  const int z1 = std::min(d.nz - 1, static_cast<int>(std::lround(cz + ez / 2)));
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) m.set(x, y, z, true);
}

}  // namespace

ScalarVolume gen_pathology(const PathologyConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return gen_pathology(cfg, rng);
}

ScalarVolume gen_pathology(const PathologyConfig& cfg, Rng& rng) {
  cfg.validate();
  const Dims3 base = cfg.base_dims;
  const double size = static_cast<double>(std::max({base.nx, base.ny, base.nz}));

  Mask shape(base, false);
  auto rand_center = [&](double& cx, double& cy, double& cz) {
    cx = rng.uniform(0.0, base.nx - 1.0);
    cy = rng.uniform(0.0, base.ny - 1.0);
    cz = rng.uniform(0.0, base.nz - 1.0);
  };
  auto rand_size = [&]() { return rng.uniform(cfg.shape_frac.lo, cfg.shape_frac.hi) * size; };

  const int n_sph = static_cast<int>(rng.uniform_int(cfg.n_spheres.lo, cfg.n_spheres.hi));
  const int n_rect = static_cast<int>(rng.uniform_int(cfg.n_rects.lo, cfg.n_rects.hi));
  const int n_cube = static_cast<int>(rng.uniform_int(cfg.n_cubes.lo, cfg.n_cubes.hi));

  double cx, cy, cz;
  for (int s = 0; s < n_sph; ++s) {
    rand_center(cx, cy, cz);
    const double r = rand_size() / 2.0;
    paint_ellipsoid(shape, cx, cy, cz, r, r, r);
  }
  for (int s = 0; s < n_rect; ++s) {
    rand_center(cx, cy, cz);
    // Boxes get independent edges, cubes a single one.
    paint_box(shape, cx, cy, cz, rand_size(), rand_size(), rand_size());
  }
  for (int s = 0; s < n_cube; ++s) {
    rand_center(cx, cy, cz);
    const double e = rand_size();
    paint_box(shape, cx, cy, cz, e, e, e);
  }

  ScalarVolume binary(base, Unit::ppm, 0.0);
  for (std::size_t i = 0; i < shape.data.size(); ++i) binary.data[i] = shape.data[i] ? 1.0 : 0.0;

  const Dims3 target{static_cast<int>(rng.uniform_int(cfg.resize_range.lo, cfg.resize_range.hi)),
                     static_cast<int>(rng.uniform_int(cfg.resize_range.lo, cfg.resize_range.hi)),
                     static_cast<int>(rng.uniform_int(cfg.resize_range.lo, cfg.resize_range.hi))};
  ScalarVolume resized = resample_nearest(binary, target);
  resized.spacing = Spacing{};  // lesions are placed on the patch grid

  const bool hemorrhage = rng.bernoulli(cfg.hemorrhage_prob);
  const double value = hemorrhage ? rng.uniform(cfg.hemorrhage_ppm.lo, cfg.hemorrhage_ppm.hi)
                                  : rng.uniform(cfg.calcification_ppm.lo, cfg.calcification_ppm.hi);
  for (auto& v : resized.data) v *= value;
  return resized;
}

ScalarVolume superpose(const ScalarVolume& healthy_patch, const ScalarVolume& lesion,
                       std::array<int, 3> position) {
  const Dims3 p = healthy_patch.dims, l = lesion.dims;
  if (position[0] < 0 || position[1] < 0 || position[2] < 0 ||
      position[0] + l.nx > p.nx || position[1] + l.ny > p.ny || position[2] + l.nz > p.nz) {
    throw StructuralError("superpose: lesion does not fit inside the patch at this position");
  }
  ScalarVolume out = healthy_patch;
  for (int z = 0; z < l.nz; ++z)
    for (int y = 0; y < l.ny; ++y)
      for (int x = 0; x < l.nx; ++x) {
        out.at(position[0] + x, position[1] + y, position[2] + z) += lesion.at(x, y, z);
      }
  return out;
}

void CropSpec::validate() const {
  if (window.nx <= 0 || window.ny <= 0 || window.nz <= 0) {
    throw DomainError("CropSpec: window must be positive");
  }
  if (stride.nx <= 0 || stride.ny <= 0 || stride.nz <= 0) {
    throw DomainError("CropSpec: stride must be positive");
  }
}

std::vector<std::array<int, 3>> crop_offsets(Dims3 dims, const CropSpec& spec) {
  spec.validate();
  if (spec.window.nx > dims.nx || spec.window.ny > dims.ny || spec.window.nz > dims.nz) {
    throw StructuralError("crop: window larger than volume");
  }
  auto axis_offsets = [](int dim, int window, int stride) {
    std::vector<int> offs;
    for (int o = 0; o + window <= dim; o += stride) offs.push_back(o);
    return offs;
  };
  const auto xs = axis_offsets(dims.nx, spec.window.nx, spec.stride.nx);
  const auto ys = axis_offsets(dims.ny, spec.window.ny, spec.stride.ny);
  const auto zs = axis_offsets(dims.nz, spec.window.nz, spec.stride.nz);
  std::vector<std::array<int, 3>> out;
  out.reserve(xs.size() * ys.size() * zs.size());
  for (int z : zs)
    for (int y : ys)
      for (int x : xs) out.push_back({x, y, z});
  return out;
}

std::vector<Patch> crop_patches(const ScalarVolume& vol, const CropSpec& spec) {
  const auto offsets = crop_offsets(vol.dims, spec);
  std::vector<Patch> out;
  out.reserve(offsets.size());
  for (const auto& o : offsets) {
    ScalarVolume p(spec.window, vol.unit, 0.0, vol.spacing);
    for (int z = 0; z < spec.window.nz; ++z)
      for (int y = 0; y < spec.window.ny; ++y)
        for (int x = 0; x < spec.window.nx; ++x) {
          p.at(x, y, z) = vol.at(o[0] + x, o[1] + y, o[2] + z);
        }
    out.push_back({o, std::move(p)});
  }
  return out;
}

void TeSampler::validate() const {
  if (!(std_s >= 0.0) || !(mean_s > 0.0)) throw DomainError("TeSampler: bad mean/std");
  if (!(min_s >= 0.0) || !(min_s < max_s)) throw DomainError("TeSampler: bad range");
}

double TeSampler::draw(Rng& rng) const {
  validate();
  for (;;) {
    const double te = rng.normal(mean_s, std_s);
    if (te > min_s && te <= max_s) return te;
  }
}

TrainingSample simulate_sample(const ScalarVolume& chi_patch, const ScalarVolume& bg_field,
                               const TeSampler& te_sampler, double b0_tesla, Rng& rng,
                               const std::optional<NoiseSpec>& noise, bool is_pathological) {
  detail::require_same_dims(chi_patch.dims, bg_field.dims, "simulate_sample");
  if (!(b0_tesla > 0.0)) throw DomainError("simulate_sample: B0 must be positive");

  const DipoleKernel d = DipoleKernel::make(chi_patch.dims, chi_patch.spacing);
  TrainingSample s;
  s.chi = chi_patch;
  s.chi.unit = Unit::ppm;
  s.local_field = forward_field(s.chi, d);
  s.te_s = te_sampler.draw(rng);
  s.b0_tesla = b0_tesla;
  s.is_pathological = is_pathological;

  ScalarVolume total = s.local_field;
  for (std::size_t i = 0; i < total.data.size(); ++i) total.data[i] += bg_field.data[i];

  AcquisitionParams params;
  params.b0_tesla = b0_tesla;
  params.te_s = {s.te_s};
  s.phase_w = phase_evolve(total, params, 0);
  s.magnitude = ScalarVolume(chi_patch.dims, Unit::dimensionless, 1.0, chi_patch.spacing);

  if (noise) {
    Mask all(chi_patch.dims, true);
    NoiseSpec spec = *noise;
    spec.rng_seed = rng.next_u64();
    auto [mag_n, phase_n] = add_complex_noise(s.magnitude, s.phase_w, spec, all);
    s.magnitude = std::move(mag_n);
    s.phase_w = std::move(phase_n);
  }
  return s;
}

ScalarVolume make_healthy_phantom(Dims3 dims, std::uint64_t seed) {
  Rng rng(seed);
  const std::int64_t n = dims.count();

  // Smooth random field: white noise low-passed with a Gaussian in k-space.
  std::vector<std::complex<double>> noise(static_cast<std::size_t>(n));
  for (auto& v : noise) v = rng.normal();
  auto hat = fft::forward(dims, noise);
  const double k_cut = 0.12;  // cycles/voxel
  std::size_t idx = 0;
  for (int kz = 0; kz < dims.nz; ++kz) {
    const double fz = static_cast<double>(fft::freq_index(kz, dims.nz)) / dims.nz;
    for (int ky = 0; ky < dims.ny; ++ky) {
      const double fy = static_cast<double>(fft::freq_index(ky, dims.ny)) / dims.ny;
      for (int kx = 0; kx < dims.nx; ++kx, ++idx) {
        const double fx = static_cast<double>(fft::freq_index(kx, dims.nx)) / dims.nx;
        const double k2 = fx * fx + fy * fy + fz * fz;
        hat[idx] *= std::exp(-k2 / (2.0 * k_cut * k_cut));
      }
    }
  }
  const auto smooth = fft::inverse(dims, hat);

  ScalarVolume chi(dims, Unit::ppm, 0.0);
  double rms = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    chi.data[static_cast<std::size_t>(i)] = smooth[static_cast<std::size_t>(i)].real();
    rms += chi.data[static_cast<std::size_t>(i)] * chi.data[static_cast<std::size_t>(i)];
  }
  rms = std::sqrt(rms / static_cast<double>(n));
  const double target_rms = 0.02;  // ppm, white-matter-scale variation
  if (rms > 0.0) {
    for (auto& v : chi.data) v *= target_rms / rms;
  }

  // Ellipsoidal deep-grey-like structures, paramagnetic values in the
  // 0.05-0.20 ppm range typical of iron-rich nuclei.
  const int n_blobs = static_cast<int>(rng.uniform_int(3, 6));
  for (int b = 0; b < n_blobs; ++b) {
    Mask blob(dims, false);
    const double rx = rng.uniform(0.06, 0.14) * dims.nx;
    const double ry = rng.uniform(0.06, 0.14) * dims.ny;
    const double rz = rng.uniform(0.06, 0.14) * dims.nz;
    const double cx = rng.uniform(0.25, 0.75) * (dims.nx - 1);
    const double cy = rng.uniform(0.25, 0.75) * (dims.ny - 1);
    const double cz = rng.uniform(0.25, 0.75) * (dims.nz - 1);
    paint_ellipsoid(blob, cx, cy, cz, rx, ry, rz);
    const double value = rng.uniform(0.05, 0.20);
    for (std::size_t i = 0; i < blob.data.size(); ++i) {
      if (blob.data[i]) chi.data[i] += value;
    }
  }
  return chi;
}

Mask make_brain_mask(Dims3 dims, double margin_frac) {
  Mask m(dims, false);
  const double rx = (0.5 - margin_frac) * dims.nx;
  const double ry = (0.5 - margin_frac) * dims.ny;
  const double rz = (0.5 - margin_frac) * dims.nz;
  paint_ellipsoid(m, (dims.nx - 1) / 2.0, (dims.ny - 1) / 2.0, (dims.nz - 1) / 2.0, rx, ry, rz);
  return m;
}

namespace {

ScalarVolume scale_to_rms(ScalarVolume field, const Mask& region, double rms_target) {
  double ss = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < field.data.size(); ++i) {
    if (region.data[i]) {
      ss += field.data[i] * field.data[i];
      ++n;
    }
  }
  const double rms = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
  if (rms > 0.0) {
    const double s = rms_target / rms;
    for (auto& v : field.data) v *= s;
  }
  return field;
}

}  // namespace

ScalarVolume background_from_padded_sources(Dims3 dims, std::uint64_t seed, double rms_ppm) {
  Rng rng(seed);
  const Dims3 big{2 * dims.nx, 2 * dims.ny, 2 * dims.nz};
  ScalarVolume chi(big, Unit::ppm, 0.0);

  // Sources confined to the padding shell around the centred patch region.
  const int x0 = dims.nx / 2, y0 = dims.ny / 2, z0 = dims.nz / 2;
  const int n_sources = static_cast<int>(rng.uniform_int(6, 12));
  for (int s = 0; s < n_sources; ++s) {
    int x, y, z;
    do {
      x = static_cast<int>(rng.uniform_int(0, big.nx - 1));
      y = static_cast<int>(rng.uniform_int(0, big.ny - 1));
      z = static_cast<int>(rng.uniform_int(0, big.nz - 1));
    } while (x >= x0 - 4 && x < x0 + dims.nx + 4 &&
             y >= y0 - 4 && y < y0 + dims.ny + 4 &&
             z >= z0 - 4 && z < z0 + dims.nz + 4);
    const double value = rng.uniform(5.0, 20.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    const int r = static_cast<int>(rng.uniform_int(1, 3));
    Mask blob(big, false);
    paint_ellipsoid(blob, x, y, z, r, r, r);
    for (std::size_t i = 0; i < blob.data.size(); ++i) {
      if (blob.data[i]) chi.data[i] += value;
    }
  }

  const DipoleKernel d = DipoleKernel::make(big);
  const ScalarVolume field_big = forward_field(chi, d);

  ScalarVolume field(dims, Unit::ppm, 0.0);
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        field.at(x, y, z) = field_big.at(x0 + x, y0 + y, z0 + z);
      }
  Mask all(dims, true);
  return scale_to_rms(std::move(field), all, rms_ppm);
}

ScalarVolume background_from_exterior_sources(Dims3 dims, const Mask& mask, std::uint64_t seed,
                                              double rms_ppm, int margin) {
  detail::require_same_dims(dims, mask.dims, "background_from_exterior_sources");
  Rng rng(seed);

  // A source is admissible when no mask voxel lies within `margin` voxels of
  // it. The margin keeps the steep near-field (where the discrete SMV and
  // Laplacian identities degrade) away from the mask.
  std::vector<std::array<int, 3>> ball;
  for (int dz = -margin; dz <= margin; ++dz)
    for (int dy = -margin; dy <= margin; ++dy)
      for (int dx = -margin; dx <= margin; ++dx)
        if (dx * dx + dy * dy + dz * dz <= margin * margin) ball.push_back({dx, dy, dz});
  auto admissible = [&](int x, int y, int z) {
    for (const auto& o : ball) {
      const int ix = x + o[0], iy = y + o[1], iz = z + o[2];
      if (ix < 0 || iy < 0 || iz < 0 || ix >= dims.nx || iy >= dims.ny || iz >= dims.nz) continue;
      if (mask.at(ix, iy, iz)) return false;
    }
    return true;
  };

  ScalarVolume chi(dims, Unit::ppm, 0.0);
  const int n_sources = static_cast<int>(rng.uniform_int(6, 12));
  for (int s = 0; s < n_sources; ++s) {
    int x, y, z;
    int guard = 0;
    do {
      x = static_cast<int>(rng.uniform_int(0, dims.nx - 1));
      y = static_cast<int>(rng.uniform_int(0, dims.ny - 1));
      z = static_cast<int>(rng.uniform_int(0, dims.nz - 1));
      if (++guard > 20000) throw DomainError("background: no room for exterior sources");
    } while (!admissible(x, y, z));
    const double value = rng.uniform(5.0, 20.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    // small spherical sources rather than single voxels: less high-k content
    const int r = static_cast<int>(rng.uniform_int(1, 2));
    Mask blob(dims, false);
    paint_ellipsoid(blob, x, y, z, r, r, r);
    for (std::size_t i = 0; i < blob.data.size(); ++i) {
      if (blob.data[i]) chi.data[i] += value;
    }
  }

  const DipoleKernel d = DipoleKernel::make(dims);
  ScalarVolume field = forward_field(chi, d);
  return scale_to_rms(std::move(field), mask, rms_ppm);
}

void DatasetBuildConfig::validate() const {
  if (n_samples < 1) throw DomainError("DatasetBuildConfig: n_samples must be >= 1");
  if (healthy_fraction < 0.0 || healthy_fraction > 1.0) {
    throw DomainError("DatasetBuildConfig: fractions must be in [0,1] and sum to 1");
  }
  if (!(b0_tesla > 0.0)) throw DomainError("DatasetBuildConfig: B0 must be positive");
  if (!(bg_rms_ppm >= 0.0)) throw DomainError("DatasetBuildConfig: bg_rms_ppm must be >= 0");
  pathology.validate();
  te.validate();
}

namespace {

nlohmann::json dataset_config_json(const DatasetBuildConfig& cfg) {
  return nlohmann::json{
      {"n_samples", cfg.n_samples},
      {"healthy_fraction", cfg.healthy_fraction},
      {"patch_dims", {cfg.patch_dims.nx, cfg.patch_dims.ny, cfg.patch_dims.nz}},
      {"b0_tesla", cfg.b0_tesla},
      {"bg_rms_ppm", cfg.bg_rms_ppm},
      {"noise_snr", cfg.noise_snr ? nlohmann::json(*cfg.noise_snr) : nlohmann::json(nullptr)},
      {"master_seed", cfg.master_seed},
      {"healthy_sources",
       [&] {
         auto arr = nlohmann::json::array();
         for (const auto& p : cfg.healthy_sources) arr.push_back(p.string());
         return arr;
       }()},
      {"te", {{"mean_s", cfg.te.mean_s}, {"std_s", cfg.te.std_s}, {"min_s", cfg.te.min_s}, {"max_s", cfg.te.max_s}}},
      {"pathology",
       {{"n_spheres", {cfg.pathology.n_spheres.lo, cfg.pathology.n_spheres.hi}},
        {"n_rects", {cfg.pathology.n_rects.lo, cfg.pathology.n_rects.hi}},
        {"n_cubes", {cfg.pathology.n_cubes.lo, cfg.pathology.n_cubes.hi}},
        {"shape_frac", {cfg.pathology.shape_frac.lo, cfg.pathology.shape_frac.hi}},
        {"base_dims", {cfg.pathology.base_dims.nx, cfg.pathology.base_dims.ny, cfg.pathology.base_dims.nz}},
        {"resize_range", {cfg.pathology.resize_range.lo, cfg.pathology.resize_range.hi}},
        {"hemorrhage_ppm", {cfg.pathology.hemorrhage_ppm.lo, cfg.pathology.hemorrhage_ppm.hi}},
        {"calcification_ppm", {cfg.pathology.calcification_ppm.lo, cfg.pathology.calcification_ppm.hi}},
        {"hemorrhage_prob", cfg.pathology.hemorrhage_prob}}}};
}

}  // namespace

std::string DatasetManifest::to_json(const DatasetBuildConfig& cfg) const {
  nlohmann::json j;
  j["format"] = "qsmlot-dataset";
  j["version"] = 1;
  j["n_samples"] = n_samples;
  j["healthy_count"] = healthy_count;
  j["pathological_count"] = pathological_count;
  j["master_seed"] = master_seed;
  j["b0_tesla"] = b0_tesla;
  j["patch_dims"] = {patch_dims.nx, patch_dims.ny, patch_dims.nz};
  j["config"] = dataset_config_json(cfg);
  j["config_hash"] = config_hash;
  auto arr = nlohmann::json::array();
  for (const auto& s : samples) {
    arr.push_back({{"index", s.index},
                   {"seed", s.seed},
                   {"te_s", s.te_s},
                   {"pathological", s.is_pathological},
                   {"files",
                    {{"phase", s.phase_file},
                     {"local", s.local_file},
                     {"chi", s.chi_file},
                     {"magnitude", s.magnitude_file}}},
                   {"hashes",
                    {{"phase", s.phase_hash},
                     {"local", s.local_hash},
                     {"chi", s.chi_hash},
                     {"magnitude", s.magnitude_hash}}}});
  }
  j["samples"] = arr;
  return j.dump(2);
}

DatasetManifest build_dataset(const DatasetBuildConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("build_dataset: cannot create " + out_dir.string() + ": " + ec.message());

  const int n_healthy = static_cast<int>(std::lround(cfg.healthy_fraction * cfg.n_samples));

  // Deterministic shuffled assignment of the pathological flag.
  std::vector<int> order(static_cast<std::size_t>(cfg.n_samples));
  for (int i = 0; i < cfg.n_samples; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng shuffle_rng(Rng::derive(cfg.master_seed, 0xa55a));
  for (int i = cfg.n_samples - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
  }
  std::vector<bool> pathological(static_cast<std::size_t>(cfg.n_samples), false);
  for (int r = n_healthy; r < cfg.n_samples; ++r) {
    pathological[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = true;
  }

  DatasetManifest man;
  man.n_samples = cfg.n_samples;
  man.healthy_count = n_healthy;
  man.pathological_count = cfg.n_samples - n_healthy;
  man.master_seed = cfg.master_seed;
  man.b0_tesla = cfg.b0_tesla;
  man.patch_dims = cfg.patch_dims;
  {
    const std::string cfg_dump = dataset_config_json(cfg).dump();
    man.config_hash = io::hex64(io::fnv1a64(cfg_dump.data(), cfg_dump.size()));
  }

  // Preload external healthy patch sources once, if given.
  std::vector<ScalarVolume> source_pool;
  for (const auto& path : cfg.healthy_sources) {
    ScalarVolume v = io::nifti_read_volume(path, Unit::ppm);
    detail::require_same_dims(v.dims, cfg.patch_dims, "build_dataset healthy source");
    source_pool.push_back(std::move(v));
  }

  for (int i = 0; i < cfg.n_samples; ++i) {
    const std::uint64_t seed = Rng::derive(cfg.master_seed, static_cast<std::uint64_t>(i) + 1);
    Rng rng(seed);

    ScalarVolume chi =
        source_pool.empty()
            ? make_healthy_phantom(cfg.patch_dims, rng.next_u64())
            : source_pool[static_cast<std::size_t>(
                  rng.uniform_int(0, static_cast<std::int64_t>(source_pool.size()) - 1))];
    if (!source_pool.empty()) rng.next_u64();  // keep the stream layout fixed
    const bool is_path = pathological[static_cast<std::size_t>(i)];
    if (is_path) {
      PathologyConfig pcfg = cfg.pathology;
      pcfg.rng_seed = rng.next_u64();
      const ScalarVolume lesion = gen_pathology(pcfg);
      if (lesion.dims.nx > cfg.patch_dims.nx || lesion.dims.ny > cfg.patch_dims.ny ||
          lesion.dims.nz > cfg.patch_dims.nz) {
        throw StructuralError("build_dataset: pathology resize_range exceeds the patch size");
      }
      const std::array<int, 3> pos{
          static_cast<int>(rng.uniform_int(0, cfg.patch_dims.nx - lesion.dims.nx)),
          static_cast<int>(rng.uniform_int(0, cfg.patch_dims.ny - lesion.dims.ny)),
          static_cast<int>(rng.uniform_int(0, cfg.patch_dims.nz - lesion.dims.nz))};
      chi = superpose(chi, lesion, pos);
    }

    const ScalarVolume bg =
        cfg.bg_rms_ppm > 0.0
            ? background_from_padded_sources(cfg.patch_dims, rng.next_u64(), cfg.bg_rms_ppm)
            : ScalarVolume(cfg.patch_dims, Unit::ppm, 0.0);

    std::optional<NoiseSpec> noise;
    if (cfg.noise_snr) noise = NoiseSpec{*cfg.noise_snr, 0};
    const TrainingSample sample =
        simulate_sample(chi, bg, cfg.te, cfg.b0_tesla, rng, noise, is_path);

    char base[32];
    std::snprintf(base, sizeof(base), "sample%04d", i);
    DatasetSampleEntry e;
    e.index = i;
    e.seed = seed;
    e.te_s = sample.te_s;
    e.is_pathological = is_path;
    e.phase_file = std::string(base) + "_phase.nii";
    e.local_file = std::string(base) + "_local.nii";
    e.chi_file = std::string(base) + "_chi.nii";
    e.magnitude_file = std::string(base) + "_mag.nii";
    io::nifti_write(sample.phase_w, out_dir / e.phase_file);
    io::nifti_write(sample.local_field, out_dir / e.local_file);
    io::nifti_write(sample.chi, out_dir / e.chi_file);
    io::nifti_write(sample.magnitude, out_dir / e.magnitude_file);
    e.phase_hash = io::hex64(io::fnv1a64_file(out_dir / e.phase_file));
    e.local_hash = io::hex64(io::fnv1a64_file(out_dir / e.local_file));
    e.chi_hash = io::hex64(io::fnv1a64_file(out_dir / e.chi_file));
    e.magnitude_hash = io::hex64(io::fnv1a64_file(out_dir / e.magnitude_file));
    man.samples.push_back(std::move(e));
  }

  std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
  if (!mf) throw IoError("build_dataset: cannot write manifest in " + out_dir.string());
  mf << man.to_json(cfg) << "\n";
  return man;
}

std::vector<TrainingSample> load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw IoError("load_dataset: cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw IoError("load_dataset: bad manifest " + manifest_path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "qsmlot-dataset") {
    throw IoError("load_dataset: not a dataset manifest: " + manifest_path.string());
  }
  const auto dir = manifest_path.parent_path();
  const double b0 = j.at("b0_tesla").get<double>();

  std::vector<TrainingSample> out;
  for (const auto& s : j.at("samples")) {
    TrainingSample t;
    t.b0_tesla = b0;
    t.te_s = s.at("te_s").get<double>();
    t.is_pathological = s.at("pathological").get<bool>();
    const auto& files = s.at("files");
    t.phase_w = io::nifti_read_volume(dir / files.at("phase").get<std::string>(), Unit::radians);
    t.local_field = io::nifti_read_volume(dir / files.at("local").get<std::string>(), Unit::ppm);
    t.chi = io::nifti_read_volume(dir / files.at("chi").get<std::string>(), Unit::ppm);
    t.magnitude = io::nifti_read_volume(dir / files.at("magnitude").get<std::string>());
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace qsmlot
