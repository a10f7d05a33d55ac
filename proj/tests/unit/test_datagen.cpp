#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <tuple>

#include "qsmlot/background.hpp"
#include "qsmlot/datagen.hpp"
#include "qsmlot/dipole.hpp"
#include "qsmlot/io/hash.hpp"
#include "qsmlot/io/nifti.hpp"
#include "qsmlot/phase.hpp"

using namespace qsmlot;

namespace {
std::filesystem::path temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("qsmlot_test_") + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("gen_pathology: deterministic for a fixed seed") {
  PathologyConfig cfg;
  cfg.rng_seed = 42;
  const auto a = gen_pathology(cfg);
  const auto b = gen_pathology(cfg);
  CHECK(a.dims == b.dims);
  CHECK(a.data == b.data);
}

TEST_CASE("gen_pathology: values confined to the lesion ranges, dims within the resize range") {
  PathologyConfig cfg;
  int hem = 0, cal = 0;
  for (int seed = 0; seed < 300; ++seed) {
    cfg.rng_seed = static_cast<std::uint64_t>(seed);
    const auto lesion = gen_pathology(cfg);
    CHECK(lesion.dims.nx >= 12);
    CHECK(lesion.dims.nx <= 24);
    CHECK(lesion.dims.ny >= 12);
    CHECK(lesion.dims.ny <= 24);
    CHECK(lesion.dims.nz >= 12);
    CHECK(lesion.dims.nz <= 24);

    std::set<double> nonzero;
    for (double v : lesion.data) {
      if (v != 0.0) nonzero.insert(v);
    }
    REQUIRE(nonzero.size() == 1);  // one constant per lesion
    const double v = *nonzero.begin();
    if (v > 0.0) {
      ++hem;
      CHECK(v >= 0.4);
      CHECK(v <= 1.2);
    } else {
      ++cal;
      CHECK(v >= -0.3);
      CHECK(v <= -0.1);
    }
  }
  // hemorrhage_prob 0.5: both classes show up, counts within 3 sigma of the
  // binomial expectation (sigma = sqrt(300*0.25) ~ 8.7)
  CHECK(std::abs(hem - 150) < 3 * 9);
  CHECK(hem + cal == 300);
}

TEST_CASE("superpose: zero lesion, placement, additivity") {
  ScalarVolume patch(Dims3{32, 32, 32}, Unit::ppm, 0.1);
  ScalarVolume lesion(Dims3{8, 8, 8}, Unit::ppm, 1.0);

  ScalarVolume zero_lesion(Dims3{8, 8, 8}, Unit::ppm, 0.0);
  const auto same = superpose(patch, zero_lesion, {4, 4, 4});
  CHECK(same.data == patch.data);

  const auto out = superpose(patch, lesion, {10, 12, 14});
  double sum_patch = 0, sum_lesion = 0, sum_out = 0;
  for (double v : patch.data) sum_patch += v;
  for (double v : lesion.data) sum_lesion += v;
  for (double v : out.data) sum_out += v;
  CHECK(sum_out == doctest::Approx(sum_patch + sum_lesion).epsilon(1e-12));
  CHECK(out.at(10, 12, 14) == doctest::Approx(1.1));
  CHECK(out.at(9, 12, 14) == doctest::Approx(0.1));

  CHECK_THROWS_AS(superpose(patch, lesion, {28, 0, 0}), StructuralError);
  CHECK_THROWS_AS(superpose(patch, lesion, {-1, 0, 0}), StructuralError);
}

TEST_CASE("superpose onto zero patch reproduces the lesion at its placement") {
  ScalarVolume patch(Dims3{16, 16, 16}, Unit::ppm, 0.0);
  ScalarVolume lesion(Dims3{4, 4, 4}, Unit::ppm, 1.0);
  const auto out = superpose(patch, lesion, {6, 6, 6});
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const bool inside = x >= 6 && x < 10 && y >= 6 && y < 10 && z >= 6 && z < 10;
        CHECK(out.at(x, y, z) == (inside ? 1.0 : 0.0));
      }
}

TEST_CASE("crop arithmetic: 144x196x128 volumes yield 144 windows each") {
  // 64^3 window, 16x26x21 stride: 6*6*4 = 144 placements per volume;
  // a 96-volume corpus yields 13824 patches.
  CropSpec spec;
  const auto offsets = crop_offsets(Dims3{144, 196, 128}, spec);
  CHECK(offsets.size() == 144);
  CHECK(static_cast<int>(offsets.size()) * 96 == 13824);
}

TEST_CASE("crop_offsets: degenerate and simple cases") {
  CropSpec spec;
  spec.window = {64, 64, 64};
  spec.stride = {16, 26, 21};
  CHECK(crop_offsets(Dims3{64, 64, 64}, spec).size() == 1);
  CHECK(crop_offsets(Dims3{64, 64, 64}, spec)[0] == std::array<int, 3>{0, 0, 0});

  CropSpec s2;
  s2.window = {64, 1, 1};
  s2.stride = {16, 1, 1};
  CHECK(crop_offsets(Dims3{80, 1, 1}, s2).size() == 2);

  CHECK_THROWS_AS(crop_offsets(Dims3{32, 64, 64}, spec), StructuralError);
}

TEST_CASE("crop_patches: offsets unique/sorted and patches reassemble the source") {
  const Dims3 dims{20, 18, 16};
  ScalarVolume v(dims, Unit::ppm, 0.0);
  for (std::int64_t i = 0; i < v.size(); ++i) v.data[static_cast<std::size_t>(i)] = static_cast<double>(i);
  CropSpec spec;
  spec.window = {8, 8, 8};
  spec.stride = {6, 5, 4};
  const auto patches = crop_patches(v, spec);

  std::set<std::array<int, 3>> seen;
  for (const auto& p : patches) {
    CHECK(!seen.contains(p.offset));
    seen.insert(p.offset);
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          CHECK(p.data.at(x, y, z) == v.at(p.offset[0] + x, p.offset[1] + y, p.offset[2] + z));
        }
  }
  CHECK(std::is_sorted(patches.begin(), patches.end(), [](const Patch& a, const Patch& b) {
    return std::tie(a.offset[2], a.offset[1], a.offset[0]) <
           std::tie(b.offset[2], b.offset[1], b.offset[0]);
  }));
}

TEST_CASE("TE sampler: truncated draws stay in range") {
  TeSampler s;
  Rng rng(77);
  for (int i = 0; i < 2000; ++i) {
    const double te = s.draw(rng);
    CHECK(te > s.min_s);
    CHECK(te <= s.max_s);
  }
}

TEST_CASE("simulate_sample: zero inputs give zero outputs") {
  const Dims3 dims{16, 16, 16};
  ScalarVolume chi(dims, Unit::ppm, 0.0);
  ScalarVolume bg(dims, Unit::ppm, 0.0);
  TeSampler te;
  Rng rng(5);
  const auto s = simulate_sample(chi, bg, te, 3.0, rng);
  for (double v : s.phase_w.data) CHECK(v == 0.0);
  for (double v : s.local_field.data) CHECK(v == 0.0);
  for (double v : s.chi.data) CHECK(v == 0.0);
  for (double v : s.magnitude.data) CHECK(v == 1.0);
}

TEST_CASE("simulate_sample: emitted phase is exactly the wrapped scaled total field") {
  const Dims3 dims{64, 64, 64};
  // 1 ppm sphere, no background, fixed TE 20 ms at 3 T
  ScalarVolume chi(dims, Unit::ppm, 0.0);
  const double c = 31.5, radius = 8.0;
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const double dx = x - c, dy = y - c, dz = z - c;
        if (dx * dx + dy * dy + dz * dz <= radius * radius) chi.at(x, y, z) = 1.0;
      }
  ScalarVolume bg(dims, Unit::ppm, 0.0);
  TeSampler te;
  te.mean_s = 0.020;
  te.std_s = 0.0;  // degenerate draw: exactly 20 ms
  Rng rng(9);
  const auto s = simulate_sample(chi, bg, te, 3.0, rng);
  CHECK(s.te_s == doctest::Approx(0.020));

  const double scale = 2.0 * 3.14159265358979323846 * 42.5764 * 3.0 * s.te_s;
  for (std::int64_t i = 0; i < s.phase_w.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    CHECK(s.phase_w.data[ii] == doctest::Approx(wrap_scalar(scale * s.local_field.data[ii])).epsilon(1e-12));
  }
}

TEST_CASE("simulate_sample: unwrap round trip recovers a recoverable field within 2%") {
  // The wrapped phase must be sub-aliasing for Laplacian unwrapping to see
  // it (a 1 ppm lesion at 20 ms wraps faster than the grid resolves; the
  // ablation study covers that failure mode deliberately). Here: a smooth
  // susceptibility field plus a periodic low-order background drive genuine
  // wrap seams at everywhere-mild gradients.
  const int n = 64;
  const Dims3 dims{n, n, n};
  const double tp = 2.0 * 3.14159265358979323846;

  ScalarVolume chi(dims, Unit::ppm, 0.0);
  Rng waves(11);
  for (int m = 0; m < 4; ++m) {
    const double ax = waves.uniform(0.0, tp), ay = waves.uniform(0.0, tp);
    const double amp = 0.015 * (1.0 + waves.uniform());
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          chi.at(x, y, z) += amp * std::sin(tp * (m + 1) * x / n + ax) *
                             std::cos(tp * std::max(1, m) * y / n + ay);
        }
  }
  ScalarVolume bg(dims, Unit::ppm, 0.0);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        bg.at(x, y, z) = 0.20 * (std::sin(tp * x / n) + 0.6 * std::sin(tp * y / n));
      }

  TeSampler te;
  te.std_s = 0.0;
  Rng rng(9);
  const auto s = simulate_sample(chi, bg, te, 3.0, rng);
  ScalarVolume total = s.local_field;
  for (std::size_t i = 0; i < total.data.size(); ++i) total.data[i] += bg.data[i];

  // genuine wrap seams present
  std::int64_t seams = 0;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 1; x < n; ++x) {
        if (std::abs(s.phase_w.at(x, y, z) - s.phase_w.at(x - 1, y, z)) > 3.14159) ++seams;
      }
  CHECK(seams > 1000);

  const double scale = tp * 42.5764 * 3.0 * s.te_s;
  const auto unwrapped = laplacian_unwrap(s.phase_w);
  double mr = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < total.data.size(); ++i) {
    mr += unwrapped.data[i] / scale;
    mt += total.data[i];
  }
  mr /= static_cast<double>(total.size());
  mt /= static_cast<double>(total.size());
  double e2 = 0.0, t2 = 0.0;
  for (std::size_t i = 0; i < total.data.size(); ++i) {
    const double e = (unwrapped.data[i] / scale - mr) - (total.data[i] - mt);
    e2 += e * e;
    t2 += (total.data[i] - mt) * (total.data[i] - mt);
  }
  CHECK(std::sqrt(e2 / t2) < 0.02);
}

TEST_CASE("simulate_sample: stored local field is bitwise the forward field of the stored chi") {
  const Dims3 dims{16, 16, 16};
  const auto chi = make_healthy_phantom(dims, 3);
  const auto bg = background_from_padded_sources(dims, 4, 1.0);
  TeSampler te;
  Rng rng(6);
  const auto s = simulate_sample(chi, bg, te, 3.0, rng);
  const auto d = DipoleKernel::make(dims);
  const auto expected = forward_field(s.chi, d);
  CHECK(s.local_field.data == expected.data);
}

TEST_CASE("background_from_exterior_sources is SMV-harmonic inside the mask") {
  // The property RESHARP exploits: the spherical-mean high-pass of an
  // exterior-source field vanishes inside the eroded mask, up to the
  // discretization of the voxelized ball.
  const Dims3 dims{48, 48, 48};
  const Mask mask = make_brain_mask(dims);
  const auto bg = background_from_exterior_sources(dims, mask, 17, 2.0);
  const auto smv = SmvKernel::make(dims, bg.spacing, 3);
  const auto hp = smv_highpass(bg, smv);
  const Mask inner = erode(mask, 4);
  double hp2 = 0.0, bg2 = 0.0;
  std::int64_t n_in = 0, n_mask = 0;
  for (std::size_t i = 0; i < bg.data.size(); ++i) {
    if (inner.data[i]) {
      hp2 += hp.data[i] * hp.data[i];
      ++n_in;
    }
    if (mask.data[i]) {
      bg2 += bg.data[i] * bg.data[i];
      ++n_mask;
    }
  }
  const double ratio = std::sqrt(hp2 / static_cast<double>(n_in)) /
                       std::sqrt(bg2 / static_cast<double>(n_mask));
  CHECK(ratio < 0.05);
}

TEST_CASE("build_dataset: exact 60/40 mix, determinism, reload") {
  DatasetBuildConfig cfg;
  cfg.n_samples = 20;
  cfg.healthy_fraction = 0.6;
  cfg.patch_dims = {16, 16, 16};
  cfg.pathology.base_dims = {8, 8, 8};
  cfg.pathology.resize_range = {6, 10};
  cfg.master_seed = 91;
  cfg.bg_rms_ppm = 0.5;

  const auto dir1 = temp_dir("ds1");
  const auto man1 = build_dataset(cfg, dir1);
  CHECK(man1.healthy_count == 12);
  CHECK(man1.pathological_count == 8);
  int flagged = 0;
  for (const auto& s : man1.samples) flagged += s.is_pathological ? 1 : 0;
  CHECK(flagged == 8);

  // byte-identical rebuild
  const auto dir2 = temp_dir("ds2");
  const auto man2 = build_dataset(cfg, dir2);
  CHECK(man1.config_hash == man2.config_hash);
  for (std::size_t i = 0; i < man1.samples.size(); ++i) {
    CHECK(man1.samples[i].phase_hash == man2.samples[i].phase_hash);
    CHECK(man1.samples[i].chi_hash == man2.samples[i].chi_hash);
    CHECK(man1.samples[i].local_hash == man2.samples[i].local_hash);
  }
  CHECK(io::fnv1a64_file(dir1 / "manifest.json") == io::fnv1a64_file(dir2 / "manifest.json"));

  // reload
  const auto samples = load_dataset(dir1 / "manifest.json");
  REQUIRE(samples.size() == 20);
  for (const auto& s : samples) {
    CHECK(s.phase_w.dims == cfg.patch_dims);
    CHECK(s.b0_tesla == doctest::Approx(3.0));
    for (double v : s.phase_w.data) {
      CHECK(v > -3.14159265358979323846 - 1e-6);
      CHECK(v <= 3.14159265358979323846 + 1e-6);
    }
  }
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("build_dataset: pure healthy mix flags nothing") {
  DatasetBuildConfig cfg;
  cfg.n_samples = 5;
  cfg.healthy_fraction = 1.0;
  cfg.patch_dims = {12, 12, 12};
  cfg.master_seed = 3;
  cfg.bg_rms_ppm = 0.0;
  const auto dir = temp_dir("ds3");
  const auto man = build_dataset(cfg, dir);
  CHECK(man.pathological_count == 0);
  for (const auto& s : man.samples) CHECK(!s.is_pathological);
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_dataset: external healthy patch sources are consumed") {
  const auto dir = temp_dir("ds_src");
  const Dims3 patch{12, 12, 12};
  std::vector<std::filesystem::path> sources;
  for (int i = 0; i < 2; ++i) {
    ScalarVolume v(patch, Unit::ppm, 0.01 * (i + 1));
    const auto path = dir / ("healthy" + std::to_string(i) + ".nii");
    io::nifti_write(v, path);
    sources.push_back(path);
  }
  DatasetBuildConfig cfg;
  cfg.n_samples = 6;
  cfg.healthy_fraction = 1.0;
  cfg.patch_dims = patch;
  cfg.master_seed = 21;
  cfg.bg_rms_ppm = 0.0;
  cfg.healthy_sources = sources;
  build_dataset(cfg, dir / "out");
  const auto samples = load_dataset(dir / "out" / "manifest.json");
  for (const auto& s : samples) {
    // every chi is one of the two constant source patches
    const double v = s.chi.data[0];
    CHECK((std::abs(v - 0.01) < 1e-7 || std::abs(v - 0.02) < 1e-7));
    for (double x : s.chi.data) CHECK(x == doctest::Approx(v));
  }
  // mismatched dims rejected
  ScalarVolume bad(Dims3{8, 8, 8}, Unit::ppm, 0.0);
  io::nifti_write(bad, dir / "bad.nii");
  cfg.healthy_sources = {dir / "bad.nii"};
  CHECK_THROWS_AS(build_dataset(cfg, dir / "out2"), StructuralError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("every emitted phase satisfies the wrap range invariant") {
  DatasetBuildConfig cfg;
  cfg.n_samples = 6;
  cfg.healthy_fraction = 0.5;
  cfg.patch_dims = {16, 16, 16};
  cfg.pathology.base_dims = {8, 8, 8};
  cfg.pathology.resize_range = {6, 10};
  cfg.master_seed = 17;
  cfg.noise_snr = 25.0;
  const auto dir = temp_dir("ds4");
  build_dataset(cfg, dir);
  const auto samples = load_dataset(dir / "manifest.json");
  for (const auto& s : samples) {
    for (double v : s.phase_w.data) {
      CHECK(v > -3.14159265358979323846 - 1e-6);  // float32 storage rounding
      CHECK(v <= 3.14159265358979323846 + 1e-6);
    }
  }
  std::filesystem::remove_all(dir);
}
