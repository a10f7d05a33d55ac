// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exit code = number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "qsmlot/ablation.hpp"
#include "qsmlot/background.hpp"
#include "qsmlot/datagen.hpp"
#include "qsmlot/dipole.hpp"
#include "qsmlot/fft.hpp"
#include "qsmlot/io/hash.hpp"
#include "qsmlot/io/nifti.hpp"
#include "qsmlot/metrics.hpp"
#include "qsmlot/nn/gradcheck.hpp"
#include "qsmlot/nn/train.hpp"
#include "qsmlot/phase.hpp"
#include "support/oracles.hpp"
#include "support/phantoms.hpp"

using namespace qsmlot;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw Failure(msg);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(QSMLOT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

// ---- criterion 1: stencil identities --------------------------------------

void criterion_stencil() {
  const auto k = LaplacianStencil::canonical27();
  require(k.weight_sum() == 0.0, "stencil weights do not sum to exactly 0");

  const Dims3 d{16, 16, 16};
  ScalarVolume v(d, Unit::radians, 0.0);
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) v.at(x, y, z) = static_cast<double>(x) * x;
  const auto lap = stencil_apply(v, k);
  for (int z = 1; z < 15; ++z)
    for (int y = 1; y < 15; ++y)
      for (int x = 1; x < 15; ++x) {
        require(std::abs(lap.at(x, y, z) - 2.0) <= 1e-12,
                "stencil_apply(x^2) deviates from 2 by more than 1e-12 at interior voxel");
      }
}

// ---- criterion 2: LoT correctness ------------------------------------------

void criterion_lot() {
  // Band-limited smooth phase, peak 12 rad. The wrapping is genuine (the
  // offset folds the whole volume several times); gradients stay low so the
  // O(|grad|^2) truncation of the trig route can meet 1e-6.
  const Dims3 d{64, 64, 64};
  ScalarVolume phi(d, Unit::radians, 0.0);
  for (int z = 0; z < 64; ++z)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        phi.at(x, y, z) = 11.98 + 0.01 * (std::sin(kTwoPi * x / 64) +
                                          0.5 * std::sin(kTwoPi * 2 * y / 64) +
                                          0.5 * std::cos(kTwoPi * z / 64));
      }
  double peak = 0.0;
  for (double v : phi.data) peak = std::max(peak, std::abs(v));
  require(peak >= 11.9 && peak <= 12.0 + 1e-9, "phantom peak is not ~12 rad");

  const auto w = wrap(phi);
  require(std::abs(w.data[0] - phi.data[0]) > 1.0, "phantom did not actually wrap");

  const auto k = LaplacianStencil::canonical27();
  const auto num = lot_numerator(w, k);
  const auto lap = stencil_apply(phi, k);
  double max_dev = 0.0, max_lap = 0.0;
  for (int z = 1; z < 63; ++z)
    for (int y = 1; y < 63; ++y)
      for (int x = 1; x < 63; ++x) {
        max_dev = std::max(max_dev, std::abs(num.at(x, y, z) - lap.at(x, y, z)));
        max_lap = std::max(max_lap, std::abs(lap.at(x, y, z)));
      }
  require(max_dev < 1e-6 * max_lap,
          "LoT numerator deviates from the stencil Laplacian: " + fmt(max_dev / max_lap) +
              " of max");

  // bitwise wrap shifts: quantize so that +2*pi*k is exact
  Rng rng(2);
  ScalarVolume a(d, Unit::radians, 0.0);
  ScalarVolume b(d, Unit::radians, 0.0);
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double p = std::ldexp(std::round(std::ldexp(rng.uniform(-3.0, 3.0), 40)), -40);
    const auto kshift = static_cast<double>(rng.uniform_int(-3, 3));
    a.data[static_cast<std::size_t>(i)] = p;
    b.data[static_cast<std::size_t>(i)] = p + kTwoPi * kshift;
  }
  const auto la = lot(wrap(a), 3.0, 0.02);
  const auto lb = lot(wrap(b), 3.0, 0.02);
  require(la.data == lb.data, "lot(phi) and lot(phi + 2*pi*k) are not bitwise equal");
}

// ---- criterion 3: Laplacian unwrapping -------------------------------------

void criterion_unwrap() {
  {
    const int n = 64;
    ScalarVolume phi(Dims3{n, n, n}, Unit::radians, 0.0);
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) phi.at(x, y, z) = 4.0 * std::sin(kTwoPi * x / n);
    const auto rec = laplacian_unwrap(wrap(phi));
    double mr = 0.0, mt = 0.0;
    for (double v : rec.data) mr += v;
    for (double v : phi.data) mt += v;
    mr /= static_cast<double>(rec.size());
    mt /= static_cast<double>(phi.size());
    double e2 = 0.0, t2 = 0.0;
    for (std::int64_t i = 0; i < rec.size(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double e = (rec.data[ii] - mr) - (phi.data[ii] - mt);
      e2 += e * e;
      t2 += (phi.data[ii] - mt) * (phi.data[ii] - mt);
    }
    const double rel = std::sqrt(e2 / t2);
    require(rel < 0.02, "periodic sinusoid rel err " + fmt(rel) + " >= 2%");
  }
  {
    const int n = 64;
    const double c = (n - 1) / 2.0, R = 0.45 * n;
    ScalarVolume phi(Dims3{n, n, n}, Unit::radians, 0.0);
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const double r =
              std::sqrt((x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c)) / R;
          if (r < 1.0) phi.at(x, y, z) = 10.0 * (1.0 - r * r);
        }
    const auto rec = laplacian_unwrap(wrap(phi));
    auto interior = [&](int x, int y, int z) {
      const double r = std::sqrt((x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c)) / R;
      return r < 0.8;
    };
    double mr = 0.0, mt = 0.0;
    std::int64_t cnt = 0;
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          if (!interior(x, y, z)) continue;
          mr += rec.at(x, y, z);
          mt += phi.at(x, y, z);
          ++cnt;
        }
    mr /= static_cast<double>(cnt);
    mt /= static_cast<double>(cnt);
    double e2 = 0.0, t2 = 0.0;
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          if (!interior(x, y, z)) continue;
          const double e = (rec.at(x, y, z) - mr) - (phi.at(x, y, z) - mt);
          e2 += e * e;
          t2 += (phi.at(x, y, z) - mt) * (phi.at(x, y, z) - mt);
        }
    const double rel = std::sqrt(e2 / t2);
    require(rel < 0.05, "dense-wrap quadratic phantom rel err " + fmt(rel) + " >= 5%");
  }
}

// ---- criterion 4: dipole physics -------------------------------------------

void criterion_dipole() {
  {
    const Dims3 d{16, 16, 16};
    const auto kernel = DipoleKernel::make(d);
    const auto chi = phantoms::random_volume(d, 31, 0.5);
    const auto fast = forward_field(chi, kernel);
    const auto slow = oracles::dipole_field_direct_dft(chi);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < fast.data.size(); ++i) {
      num += (fast.data[i] - slow.data[i]) * (fast.data[i] - slow.data[i]);
      den += slow.data[i] * slow.data[i];
    }
    const double rel = std::sqrt(num / den);
    require(rel < 1e-9, "forward_field vs direct DFT rel err " + fmt(rel) + " >= 1e-9");
  }
  {
    const Dims3 d{64, 64, 64};
    const auto kernel = DipoleKernel::make(d);
    const auto chi = phantoms::sphere(d, 8.0, 1.0);
    const auto f = forward_field(chi, kernel);
    const Mask interior = phantoms::sphere_mask(d, 6.0, 31.5, 31.5, 31.5);
    const RoiStats s = roi_stats(f, interior);
    require(std::abs(s.mean) < 0.05,
            "sphere interior mean field " + fmt(s.mean) + " ppm not within +-0.05");
  }
  {
    const Dims3 d{16, 16, 16};
    const auto kernel = DipoleKernel::make(d);
    const double threshold = 0.2;
    const auto chi = phantoms::random_volume(d, 77, 1.0);
    const auto rec = tkd_invert(forward_field(chi, kernel), kernel, threshold);
    std::vector<std::complex<double>> cv(chi.data.begin(), chi.data.end());
    std::vector<std::complex<double>> rv(rec.data.begin(), rec.data.end());
    const auto chat = fft::forward(d, cv);
    const auto rhat = fft::forward(d, rv);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < chat.size(); ++i) {
      if (std::abs(kernel.spectrum[i]) < threshold) continue;
      num += std::norm(rhat[i] - chat[i]);
      den += std::norm(chat[i]);
    }
    const double rel = std::sqrt(num / den);
    require(rel < 1e-9, "tkd(forward(chi)) passband rel err " + fmt(rel) + " >= 1e-9");
  }
}

// ---- criterion 5: RESHARP ---------------------------------------------------

void criterion_resharp() {
  const Dims3 d{64, 64, 64};
  const Mask mask = make_brain_mask(d);
  ResharpConfig cfg;  // radius 3, lambda 1e-3, tol 1e-6, max 200

  {
    const auto bg = background_from_exterior_sources(d, mask, 11, 2.0);
    const auto res = resharp(bg, mask, cfg);
    double in2 = 0.0, out2 = 0.0;
    std::int64_t nin = 0, nout = 0;
    for (std::size_t i = 0; i < bg.data.size(); ++i) {
      if (mask.data[i]) {
        in2 += bg.data[i] * bg.data[i];
        ++nin;
      }
      if (res.eroded_mask.data[i]) {
        out2 += res.local_field.data[i] * res.local_field.data[i];
        ++nout;
      }
    }
    const double ratio = std::sqrt(out2 / nout) / std::sqrt(in2 / nin);
    require(ratio < 0.05, "background suppression ratio " + fmt(ratio) + " >= 5%");
    require(res.iterations <= 200, "CG exceeded 200 iterations");
    require(res.relative_residual <= 1e-6, "CG residual above 1e-6");
  }
  {
    const auto kernel = DipoleKernel::make(d);
    const double radius = 6.0;
    const auto chi = phantoms::sphere(d, radius, 1.0);
    const auto local = forward_field(chi, kernel);
    const auto bg = background_from_exterior_sources(d, mask, 13, 2.0);
    ScalarVolume total = local;
    for (std::size_t i = 0; i < total.data.size(); ++i) total.data[i] += bg.data[i];
    // The preservation phantom pins lambda = 1e-4: the harmonic tail of an
    // interior source is only weakly constrained by the SMV data term and
    // its survival scales directly with the Tikhonov weight.
    ResharpConfig pres_cfg = cfg;
    pres_cfg.tikhonov_lambda = 1e-4;
    const auto res = resharp(total, mask, pres_cfg);

    // Evaluate where the sphere field is significant (within 2 radii,
    // away from the +-2 voxel surface shell); farther out the truth decays
    // below the bounded background-suppression residual.
    double num = 0.0, den = 0.0;
    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const auto i = static_cast<std::size_t>(total.index(x, y, z));
          if (!res.eroded_mask.data[i]) continue;
          const double dx = x - 31.5, dy = y - 31.5, dz = z - 31.5;
          const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
          if (r > 2.0 * radius) continue;
          if (r > radius - 2.0 && r < radius + 2.0) continue;
          const double e = res.local_field.data[i] - local.data[i];
          num += e * e;
          den += local.data[i] * local.data[i];
        }
    const double rel = std::sqrt(num / den);
    require(rel < 0.10, "interior sphere field error " + fmt(rel) + " >= 10%");
  }
}

// ---- criterion 6: echo fitting ----------------------------------------------

void criterion_echofit() {
  const Dims3 d{8, 7, 6};
  const std::vector<double> te{0.004, 0.009, 0.013, 0.021, 0.033};
  Rng rng(2024);
  std::vector<ScalarVolume> values, mags;
  for (std::size_t e = 0; e < te.size(); ++e) {
    values.push_back(phantoms::random_volume(d, 100 + e, 1.0));
    ScalarVolume m(d, Unit::dimensionless, 0.0);
    for (auto& v : m.data) v = std::abs(rng.normal()) + 0.05;
    mags.push_back(std::move(m));
  }
  const auto fit = echo_fit(values, mags, te);

  // independent dense weighted-LS route: assemble and solve the normal
  // equations per voxel in long double with reversed accumulation order
  for (std::int64_t i = 0; i < d.count(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    long double a = 0.0L, b = 0.0L;
    for (std::size_t e = te.size(); e-- > 0;) {
      a += static_cast<long double>(mags[e].data[ii]) * te[e] * te[e];
      b += static_cast<long double>(mags[e].data[ii]) * te[e] * values[e].data[ii];
    }
    const double expected = static_cast<double>(b / a);
    require(std::abs(fit.value.data[ii] - expected) <= 1e-10 * std::max(1.0, std::abs(expected)),
            "echo_fit deviates from the weighted-LS oracle at a voxel");
  }

  // zero-weight echoes provably ignored
  ScalarVolume y1(d, Unit::ppm, 0.01 * 3.0), y2(d, Unit::ppm, 0.02 * 3.0);
  y2.at(1, 1, 1) = 1e9;
  ScalarVolume m1(d, Unit::dimensionless, 1.0), m2(d, Unit::dimensionless, 1.0);
  m2.at(1, 1, 1) = 0.0;
  const auto fit2 = echo_fit({y1, y2}, {m1, m2}, {0.01, 0.02});
  require(std::abs(fit2.value.at(1, 1, 1) - 3.0) < 1e-12,
          "zero-weight echo still influenced the fit");
}

// ---- criterion 7: data generation --------------------------------------------

void criterion_datagen() {
  const auto offsets = crop_offsets(Dims3{144, 196, 128}, CropSpec{});
  require(offsets.size() == 144, "crop count is " + std::to_string(offsets.size()) + ", not 144");
  require(static_cast<int>(offsets.size()) * 96 == 13824, "96-volume total is not 13824");

  PathologyConfig pcfg;
  for (int seed = 0; seed < 1000; ++seed) {
    pcfg.rng_seed = static_cast<std::uint64_t>(seed);
    const auto lesion = gen_pathology(pcfg);
    double value = 0.0;
    for (double v : lesion.data) {
      if (v != 0.0) {
        value = v;
        break;
      }
    }
    const bool hem = value >= 0.4 && value <= 1.2;
    const bool cal = value >= -0.3 && value <= -0.1;
    require(hem || cal, "pathology value " + fmt(value) + " outside both lesion ranges");
  }

  DatasetBuildConfig cfg;
  cfg.n_samples = 100;
  cfg.healthy_fraction = 0.6;
  cfg.patch_dims = {16, 16, 16};
  cfg.pathology.base_dims = {8, 8, 8};
  cfg.pathology.resize_range = {6, 10};
  cfg.master_seed = 5;
  cfg.bg_rms_ppm = 0.5;
  const auto dir = fs::temp_directory_path() / "qsmlot_acc_ds";
  fs::remove_all(dir);
  const auto man = build_dataset(cfg, dir);
  require(man.healthy_count == 60 && man.pathological_count == 40,
          "mix is not exactly 60/40 for n=100");
  int flagged = 0;
  for (const auto& s : man.samples) flagged += s.is_pathological ? 1 : 0;
  require(flagged == 40, "manifest pathological flags disagree with the counts");
  fs::remove_all(dir);
}

// ---- criterion 8: network correctness ----------------------------------------

void criterion_network() {
  using namespace qsmlot::nn;
  auto rt = [](int n, int c, int nx, int ny, int nz, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Tensor5<double> t(n, c, nx, ny, nz);
    for (auto& v : t.data) v = scale * rng.normal();
    return t;
  };

  // gradient checks, double precision, every layer type
  double worst = 0.0;
  {
    Conv3d<double> conv("c", 2, 3, 3);
    Rng r(1);
    conv.init(r, 0.2);
    auto x = rt(2, 2, 5, 4, 4, 2);
    const auto target = rt(2, 3, 5, 4, 4, 3);
    conv.weight().zero_grad();
    conv.bias().zero_grad();
    Tensor5<double> grad;
    mse_loss(conv.forward(x), target, &grad);
    auto gin = conv.backward(grad);
    GradChecker ck([&]() { return mse_loss(conv.forward(x), target, nullptr); });
    GradCheckResult res;
    ck.check_param(conv.weight(), res);
    ck.check_param(conv.bias(), res);
    ck.check_input(x, gin, res);
    worst = std::max(worst, res.max_rel_err);
  }
  {
    ConvTranspose3d<double> up("u", 3, 2);
    Rng r(7);
    up.init(r, 0.3);
    auto x = rt(2, 3, 3, 3, 3, 8);
    const auto target = rt(2, 2, 6, 6, 6, 9);
    std::vector<Param<double>*> ps;
    up.collect(ps);
    for (auto* p : ps) p->zero_grad();
    Tensor5<double> grad;
    mse_loss(up.forward(x), target, &grad);
    auto gin = up.backward(grad);
    GradChecker ck([&]() { return mse_loss(up.forward(x), target, nullptr); });
    GradCheckResult res;
    for (auto* p : ps) ck.check_param(*p, res);
    ck.check_input(x, gin, res);
    worst = std::max(worst, res.max_rel_err);
  }
  {
    MaxPool3d<double> pool;
    auto x = rt(2, 2, 4, 4, 4, 11);
    const auto target = rt(2, 2, 2, 2, 2, 12);
    Tensor5<double> grad;
    mse_loss(pool.forward(x), target, &grad);
    auto gin = pool.backward(grad);
    GradChecker ck([&]() { return mse_loss(pool.forward(x), target, nullptr); });
    GradCheckResult res;
    ck.check_input(x, gin, res, 200, 1e-5);
    worst = std::max(worst, res.max_rel_err);
  }
  {
    BatchNorm3d<double> bn("b", 3);
    auto x = rt(2, 3, 4, 4, 3, 13);
    const auto target = rt(2, 3, 4, 4, 3, 14);
    std::vector<Param<double>*> ps;
    bn.collect(ps);
    for (auto* p : ps) p->zero_grad();
    Tensor5<double> grad;
    mse_loss(bn.forward(x, true), target, &grad);
    auto gin = bn.backward(grad);
    GradChecker ck([&]() { return mse_loss(bn.forward(x, true), target, nullptr); });
    GradCheckResult res;
    for (auto* p : ps) ck.check_param(*p, res);
    ck.check_input(x, gin, res);
    worst = std::max(worst, res.max_rel_err);
  }
  {
    Relu<double> relu;
    auto x = rt(2, 2, 4, 4, 4, 16);
    for (auto& v : x.data) {
      if (std::abs(v) < 1e-2) v = v < 0 ? v - 1e-2 : v + 1e-2;
    }
    const auto target = rt(2, 2, 4, 4, 4, 17);
    Tensor5<double> grad;
    mse_loss(relu.forward(x), target, &grad);
    auto gin = relu.backward(grad);
    GradChecker ck([&]() { return mse_loss(relu.forward(x), target, nullptr); });
    GradCheckResult res;
    ck.check_input(x, gin, res, 200, 1e-4);
    worst = std::max(worst, res.max_rel_err);
  }
  {
    // concat + residual + every layer jointly through a small learnable
    // LotUnet, evaluated at a kink-free point (positive BN shift keeps
    // activations away from the relu/pool non-differentiabilities where
    // central differences are undefined)
    LotUnetConfig cfg{LotMode::learnable, 2, UnetConfig{1, 2, 2, 1}};
    LotUnet<double> model(cfg);
    Rng r(11);
    model.init(r, 0.05);
    for (auto* bn : model.unet().batchnorms()) {
      for (auto& b : bn->beta().value) b = 1.0;
    }
    const auto phase = rt(2, 1, 4, 4, 4, 12, 2.0);
    const auto target = rt(2, 1, 4, 4, 4, 13, 0.1);
    const std::vector<double> te{0.02, 0.025};
    auto ps = model.params();
    for (auto* p : ps) p->zero_grad();
    Tensor5<double> grad;
    mse_loss(model.forward(phase, te, 3.0, true), target, &grad);
    model.backward(grad);
    GradChecker ck([&]() { return mse_loss(model.forward(phase, te, 3.0, true), target, nullptr); });
    GradCheckResult res;
    for (auto* p : ps) {
      if (!p->trainable) continue;
      ck.check_param(*p, res, 40, p->name == "lot.kernels" ? 1e-4 : 1e-5);
    }
    require(res.params_checked >= 100, "fewer than 100 parameters probed");
    worst = std::max(worst, res.max_rel_err);
  }
  require(worst < 1e-4, "gradient check max rel err " + fmt(worst) + " >= 1e-4");

  // fixed-mode LoT layer vs phase::lot within 1e-12
  {
    LotLayer<double> layer(LotMode::fixed, 1);
    const Dims3 dims{10, 9, 8};
    Rng r(7);
    ScalarVolume phase(dims, Unit::radians, 0.0);
    for (auto& v : phase.data) v = r.uniform(-3.0, 3.0);
    Tensor5<double> batch(1, 1, dims.nx, dims.ny, dims.nz);
    for (std::int64_t i = 0; i < dims.count(); ++i) {
      batch.data[static_cast<std::size_t>(i)] = phase.data[static_cast<std::size_t>(i)];
    }
    const auto out = layer.forward(batch, {0.02}, 3.0);
    const auto expected = lot(phase, 3.0, 0.02);
    double max_dev = 0.0;
    for (std::int64_t i = 0; i < dims.count(); ++i) {
      max_dev = std::max(max_dev, std::abs(out.data[static_cast<std::size_t>(i)] -
                                           expected.data[static_cast<std::size_t>(i)]));
    }
    require(max_dev < 1e-12, "fixed LoT layer deviates from phase lot() by " + fmt(max_dev));
  }

  // bitwise end-to-end wrap invariance
  {
    LotUnetConfig cfg{LotMode::fixed, 1, UnetConfig{1, 2, 1, 1}};
    LotUnet<double> model(cfg);
    Rng r(14);
    model.init(r, 0.05);
    const int n = 8;
    Tensor5<double> a(1, 1, n, n, n), b(1, 1, n, n, n);
    for (std::int64_t i = 0; i < a.size(); ++i) {
      const double p = std::ldexp(std::round(std::ldexp(r.uniform(-3.0, 3.0), 40)), -40);
      const auto kk = static_cast<double>(r.uniform_int(-3, 3));
      a.data[static_cast<std::size_t>(i)] = p;
      b.data[static_cast<std::size_t>(i)] = wrap_scalar(p + kTwoPi * kk);
    }
    require(a.data == b.data, "wrap did not restore the exact phase bits");
    const auto ya = model.forward(a, {0.02}, 3.0, false);
    const auto yb = model.forward(b, {0.02}, 3.0, false);
    require(ya.data == yb.data, "inference is not bitwise wrap-invariant");
  }
}

// ---- criterion 9: desk-scale trainability -------------------------------------

void criterion_training() {
  std::vector<TrainingSample> data;
  const Dims3 dims{16, 16, 16};
  for (int i = 0; i < 4; ++i) {
    const auto chi = make_healthy_phantom(dims, Rng::derive(42, static_cast<std::uint64_t>(i)));
    ScalarVolume bg(dims, Unit::ppm, 0.0);
    TeSampler te;
    te.std_s = 0.0;
    Rng rng(Rng::derive(42, 100 + static_cast<std::uint64_t>(i)));
    data.push_back(simulate_sample(chi, bg, te, 3.0, rng));
  }
  nn::LotUnetConfig model_cfg{nn::LotMode::fixed, 1, nn::UnetConfig{2, 8, 1, 1}};
  nn::TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch = 1;  // 4 optimizer steps per epoch: the desk-scale budget
  cfg.lr_stages = {3e-3, 1e-3, 3e-4};
  cfg.lr_boundaries = {350, 450};
  cfg.noisy_fraction = 0.0;
  cfg.seed = 7;
  cfg.stop_loss_ratio = 0.01;
  const auto result = nn::train<float>(data, nn::Target::iqsm, model_cfg, cfg);
  const double ratio = result.epoch_loss.back() / result.epoch_loss.front();
  require(ratio <= 0.01, "overfit reached only " + fmt(100.0 * ratio) + "% of the initial MSE in " +
                             std::to_string(result.epochs_run) + " epochs");
}

// ---- criterion 10: step-wise error ordering ---------------------------------

void criterion_ablation_trend() {
  int ordered = 0, gap2x = 0;
  const int n_seeds = 5;
  for (int seed = 0; seed < n_seeds; ++seed) {
    AblationConfig cfg;
    cfg.size = 64;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto rep = run_ablation(cfg);
    const double a = rep.entry("local_field_tkd").roi_mean_error_rel;
    const double b = rep.entry("resharp_tkd").roi_mean_error_rel;
    const double c = rep.entry("unwrap_resharp_tkd").roi_mean_error_rel;
    std::cerr << "    seed " << seed << ": error(a)=" << fmt(a) << " error(b)=" << fmt(b)
              << " error(c)=" << fmt(c) << "\n";
    if (a < b && b < c) ++ordered;
    if (c >= 2.0 * a) ++gap2x;
  }
  require(ordered >= 4, "error ordering held on only " + std::to_string(ordered) + "/5 seeds");
  require(gap2x >= 4, "2x unwrap-vs-inversion gap held on only " + std::to_string(gap2x) + "/5 seeds");
}

// ---- criterion 11: metrics -------------------------------------------------------

void criterion_metrics() {
  const Dims3 d{16, 16, 16};
  const auto truth = phantoms::sphere(d, 5.0, 1.0);
  Mask all(d, true);

  require(nrmse_percent(truth, truth, all) == 0.0, "identity NRMSE is not exactly 0");
  require(!psnr_db(truth, truth, all).has_value(), "identity PSNR did not return the sentinel");
  require(std::abs(ssim(truth, truth, all) - 1.0) < 1e-12, "identity SSIM is not 1");

  ScalarVolume scaled = truth;
  for (auto& v : scaled.data) v *= 1.1;
  const double nr = nrmse_percent(scaled, truth, all);
  require(std::abs(nr - 10.0) < 1e-10, "1.1x scaling NRMSE " + fmt(nr) + " != 10");

  ScalarVolume off(d, Unit::ppm, 0.0);
  off.at(0, 0, 0) = 1.0;
  ScalarVolume rec = off;
  for (auto& v : rec.data) v += 0.1;
  const auto p = psnr_db(rec, off, all, 1.0);
  require(p.has_value() && std::abs(*p - 20.0) < 1e-12, "peak-1 MSE-0.01 PSNR is not 20 dB");

  // SSIM vs direct per-window oracle
  auto noisy = truth;
  Rng rng(7);
  for (auto& v : noisy.data) v += rng.normal(0.0, 0.05);
  SsimConfig cfg;
  cfg.window = 7;
  const double lib = ssim(noisy, truth, all, cfg);
  double lo = 1e300, hi = -1e300;
  for (double v : truth.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double oracle = oracles::ssim_direct(noisy, truth, all, 7, 1.5, 0.01, 0.03, hi - lo);
  require(std::abs(lib - oracle) < 1e-10,
          "SSIM deviates from the direct oracle by " + fmt(std::abs(lib - oracle)));
}

// ---- criterion 12: I/O and CLI composition ----------------------------------------

void criterion_io_cli() {
  // bitwise float32 NIfTI round trip
  {
    auto v = phantoms::random_volume(Dims3{12, 10, 8}, 55, 1.0);
    for (auto& x : v.data) x = static_cast<double>(static_cast<float>(x));
    const auto path = fs::temp_directory_path() / "qsmlot_acc_rt.nii";
    io::nifti_write(v, path, io::NiftiDatatype::float32);
    const auto r = io::nifti_read_volume(path);
    require(r.data == v.data, "float32 NIfTI round trip is not bitwise");
    fs::remove(path);
  }

  // manifest regeneration is bitwise reproducible
  {
    DatasetBuildConfig cfg;
    cfg.n_samples = 6;
    cfg.healthy_fraction = 0.5;
    cfg.patch_dims = {16, 16, 16};
    cfg.pathology.base_dims = {8, 8, 8};
    cfg.pathology.resize_range = {6, 10};
    cfg.master_seed = 9;
    cfg.bg_rms_ppm = 0.5;
    const auto d1 = fs::temp_directory_path() / "qsmlot_acc_m1";
    const auto d2 = fs::temp_directory_path() / "qsmlot_acc_m2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    build_dataset(cfg, d1);
    build_dataset(cfg, d2);
    require(io::fnv1a64_file(d1 / "manifest.json") == io::fnv1a64_file(d2 / "manifest.json"),
            "manifest regeneration is not bitwise");
    for (const auto& e : fs::directory_iterator(d1)) {
      const auto name = e.path().filename();
      require(io::fnv1a64_file(e.path()) == io::fnv1a64_file(d2 / name),
              "dataset file " + name.string() + " differs across rebuilds");
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
  }

  // CLI composition with exit code 0 throughout
  {
    const auto dir = fs::temp_directory_path() / "qsmlot_acc_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
      std::ofstream f(dir / "cfg.json");
      f << R"({
        "seed": 3,
        "dataset": {"n": 4, "healthy_fraction": 0.5, "patch_dims": [16,16,16], "bg_rms_ppm": 0.5},
        "pathology": {"base_dims": [8,8,8], "resize_range": [6, 10]},
        "model": {"depth": 2, "base_channels": 4},
        "train": {"epochs": 3, "batch": 2, "lr_boundaries": [2, 3]},
        "ablate": {"size": 48}
      })";
    }
    const std::string cfg = " --config " + (dir / "cfg.json").string();
    require(cli("simulate" + cfg + " --out " + (dir / "data").string()) == 0, "simulate failed");
    require(cli("train" + cfg + " --data " + (dir / "data").string() + " --target iqsm --out " +
                (dir / "m.ckpt").string()) == 0,
            "train failed");
    require(cli("infer" + cfg + " --checkpoint " + (dir / "m.ckpt").string() + " --phase " +
                (dir / "data" / "sample0000_phase.nii").string() + " --te 0.02 --target iqsm" +
                " --out " + (dir / "chi.nii").string()) == 0,
            "infer failed");
    require(cli("metrics" + cfg + " --recon " + (dir / "chi.nii").string() + " --truth " +
                (dir / "data" / "sample0000_chi.nii").string() + " --mask " +
                (dir / "data" / "sample0000_mag.nii").string()) == 0,
            "metrics failed");
    require(cli("ablate" + cfg + " --out " + (dir / "abl").string()) == 0, "ablate failed");
    require(fs::exists(dir / "abl" / "report.json"), "ablate report missing");
    fs::remove_all(dir);
  }
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "stencil identities", 1.0, criterion_stencil},
      {2, "LoT correctness", 5.0, criterion_lot},
      {3, "Laplacian unwrapping", 10.0, criterion_unwrap},
      {4, "dipole physics", 30.0, criterion_dipole},
      {5, "RESHARP background removal", 60.0, criterion_resharp},
      {6, "echo fitting", 5.0, criterion_echofit},
      {7, "data generation", 60.0, criterion_datagen},
      {8, "network correctness", 300.0, criterion_network},
      {9, "desk-scale trainability", 600.0, criterion_training},
      {10, "step-wise error ordering", 600.0, criterion_ablation_trend},
      {11, "metrics fixtures", 10.0, criterion_metrics},
      {12, "I/O and CLI composition", 900.0, criterion_io_cli},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.fn();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (error.empty() && secs > c.budget_s) {
      error = "runtime " + fmt(secs) + " s exceeded the " + fmt(c.budget_s) + " s budget";
    }
    if (error.empty()) {
      std::printf("PASS  criterion %2d: %-32s (%.2f s)\n", c.id, c.name, secs);
    } else {
      std::printf("FAIL  criterion %2d: %-32s (%.2f s)  %s\n", c.id, c.name, secs, error.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
