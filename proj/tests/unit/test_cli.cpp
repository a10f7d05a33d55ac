#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "qsmlot/io/nifti.hpp"
#include "qsmlot/phase.hpp"
#include "support/phantoms.hpp"

using namespace qsmlot;
namespace fs = std::filesystem;

namespace {

const char* cli = QSMLOT_CLI_PATH;

fs::path work_dir() {
  const auto p = fs::temp_directory_path() / "qsmlot_cli_test";
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli: missing subcommand / bad flags exit with validation code 1") {
  CHECK(run("") == 1);
  CHECK(run("lot --nonsense 1") == 1);
  CHECK(run("frobnicate") == 1);
}

TEST_CASE("cli: lot and unwrap round trip files") {
  const auto dir = work_dir();
  const auto phase = wrap(phantoms::radial_bump(Dims3{24, 24, 24}, 9.0, 0.4));
  io::nifti_write(phase, dir / "phase.nii");

  CHECK(run("lot --phase " + (dir / "phase.nii").string() + " --te 0.02 --b0 3 --out " +
            (dir / "lot.nii").string()) == 0);
  CHECK(fs::exists(dir / "lot.nii"));
  const auto lotmap = io::nifti_read_volume(dir / "lot.nii");
  CHECK(lotmap.dims == phase.dims);

  CHECK(run("unwrap --phase " + (dir / "phase.nii").string() + " --out " +
            (dir / "unwrapped.nii").string()) == 0);
  CHECK(fs::exists(dir / "unwrapped.nii"));
  fs::remove_all(dir);
}

TEST_CASE("cli: missing input file is a runtime error (exit 2)") {
  const auto dir = work_dir();
  CHECK(run("unwrap --phase " + (dir / "nope.nii").string() + " --out " +
            (dir / "o.nii").string()) == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli: config validation failure lists keys and exits 1") {
  const auto dir = work_dir();
  {
    std::ofstream f(dir / "bad.json");
    f << R"({"tkd": {"thresold": 0.1}})";
  }
  const std::string cmd = std::string(cli) + " unwrap --config " + (dir / "bad.json").string() +
                          " --phase x.nii --out y.nii 2> " + (dir / "err.txt").string();
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  std::ifstream err(dir / "err.txt");
  std::string text((std::istreambuf_iterator<char>(err)), std::istreambuf_iterator<char>());
  CHECK(text.find("tkd.thresold") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli: bgremove non-convergence exits 3") {
  const auto dir = work_dir();
  const Dims3 dims{32, 32, 32};
  const auto mask = phantoms::sphere_mask(dims, 12.0, 15.5, 15.5, 15.5);
  const auto field = phantoms::random_volume(dims, 3, 1.0);
  io::nifti_write(field, dir / "field.nii");
  {
    ScalarVolume m(dims, Unit::dimensionless, 0.0);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = mask.data[i] ? 1.0 : 0.0;
    io::nifti_write(m, dir / "mask.nii");
  }
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"resharp": {"cg_max_iter": 1, "cg_tol": 1e-14}})";
  }
  CHECK(run("bgremove --config " + (dir / "cfg.json").string() + " --field " +
            (dir / "field.nii").string() + " --mask " + (dir / "mask.nii").string() + " --out " +
            (dir / "local.nii").string()) == 3);
  fs::remove_all(dir);
}

TEST_CASE("cli: simulate -> train -> infer -> metrics compose end to end") {
  const auto dir = work_dir();
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({
      "seed": 7,
      "dataset": {"n": 3, "healthy_fraction": 0.67, "patch_dims": [16,16,16], "bg_rms_ppm": 0.5},
      "pathology": {"base_dims": [8,8,8], "resize_range": [6, 10]},
      "model": {"depth": 2, "base_channels": 4},
      "train": {"epochs": 2, "batch": 2, "lr_boundaries": [1, 2], "noisy_fraction": 0.5}
    })";
  }
  const std::string cfg = " --config " + (dir / "cfg.json").string();

  CHECK(run("simulate" + cfg + " --n 3 --out " + (dir / "data").string()) == 0);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(fs::exists(dir / "data" / "sample0000_phase.nii"));

  CHECK(run("train" + cfg + " --data " + (dir / "data").string() + " --target iqsm --out " +
            (dir / "model.ckpt").string()) == 0);
  CHECK(fs::exists(dir / "model.ckpt"));

  CHECK(run("infer" + cfg + " --checkpoint " + (dir / "model.ckpt").string() + " --phase " +
            (dir / "data" / "sample0000_phase.nii").string() +
            " --te 0.02 --target iqsm --out " + (dir / "chi.nii").string()) == 0);
  CHECK(fs::exists(dir / "chi.nii"));

  // wrong target vs checkpoint -> validation error
  CHECK(run("infer" + cfg + " --checkpoint " + (dir / "model.ckpt").string() + " --phase " +
            (dir / "data" / "sample0000_phase.nii").string() +
            " --te 0.02 --target iqfm --out " + (dir / "x.nii").string()) == 1);

  CHECK(run("metrics" + cfg + " --recon " + (dir / "chi.nii").string() + " --truth " +
            (dir / "data" / "sample0000_chi.nii").string() + " --mask " +
            (dir / "data" / "sample0000_mag.nii").string() + " --out " +
            (dir / "report.json").string()) == 0);
  CHECK(fs::exists(dir / "report.json"));
  {
    std::ifstream f(dir / "report.json");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(text.find("psnr_db") != std::string::npos);
    CHECK(text.find("ssim") != std::string::npos);
    CHECK(text.find("nrmse_percent") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("cli: render writes PNG slices") {
  const auto dir = work_dir();
  const auto v = phantoms::sphere(Dims3{16, 16, 16}, 5.0, 1.0);
  io::nifti_write(v, dir / "v.nii");
  CHECK(run("render --in " + (dir / "v.nii").string() + " --axis z --index 8 --lo 0 --hi 1" +
            " --out-prefix " + (dir / "slice_").string()) == 0);
  CHECK(fs::exists(dir / "slice_z008.png"));
  fs::remove_all(dir);
}

TEST_CASE("cli: ablate runs on a small control phantom") {
  const auto dir = work_dir();
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"seed": 4, "ablate": {"size": 48, "lesion_ppm": 1.0, "te_s": 0.02}})";
  }
  CHECK(run("ablate --config " + (dir / "cfg.json").string() + " --out " +
            (dir / "abl").string()) == 0);
  CHECK(fs::exists(dir / "abl" / "report.json"));
  CHECK(fs::exists(dir / "abl" / "chi_unwrap_resharp_tkd.nii"));
  fs::remove_all(dir);
}
