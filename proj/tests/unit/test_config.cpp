#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "qsmlot/config.hpp"

using namespace qsmlot;

TEST_CASE("config: defaults match the standard protocol") {
  const auto c = PipelineConfig::from_json_text("{}");
  CHECK(c.b0_tesla == 3.0);
  CHECK(c.gamma_bar_mhz_per_t == doctest::Approx(42.5764));
  CHECK(c.tkd_threshold == doctest::Approx(0.2));
  CHECK(c.resharp.smv_radius == 3);
  CHECK(c.te.mean_s == doctest::Approx(0.020));
  CHECK(c.te.std_s == doctest::Approx(0.010));
  CHECK(c.pathology.n_spheres.lo == 5);
  CHECK(c.pathology.n_spheres.hi == 10);
  CHECK(c.pathology.hemorrhage_ppm.lo == doctest::Approx(0.4));
  CHECK(c.pathology.hemorrhage_ppm.hi == doctest::Approx(1.2));
  CHECK(c.pathology.calcification_ppm.lo == doctest::Approx(-0.3));
  CHECK(c.pathology.calcification_ppm.hi == doctest::Approx(-0.1));
  CHECK(c.crop.window == Dims3{64, 64, 64});
  CHECK(c.crop.stride == Dims3{16, 26, 21});
  CHECK(c.train.epochs == 100);
  CHECK(c.train.lr_stages == std::array<double, 3>{1e-3, 1e-4, 1e-5});
  CHECK(c.train.lr_boundaries == std::array<int, 2>{50, 80});
  CHECK(c.train.noisy_fraction == doctest::Approx(0.20));
  CHECK(c.train.init_std == doctest::Approx(0.01));
  CHECK(c.healthy_fraction == doctest::Approx(0.6));
}

TEST_CASE("config: unknown keys rejected with every offending key listed") {
  const std::string text = R"({
    "seed": 1,
    "tkd": {"threshold": 0.2, "thresold": 0.3},
    "resharp": {"lambda": 1e-3, "lamda": 2e-3},
    "bogus_top": true
  })";
  try {
    PipelineConfig::from_json_text(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto& keys = e.offending_keys();
    CHECK(keys.size() == 3);
    CHECK(std::find(keys.begin(), keys.end(), "tkd.thresold") != keys.end());
    CHECK(std::find(keys.begin(), keys.end(), "resharp.lamda") != keys.end());
    CHECK(std::find(keys.begin(), keys.end(), "bogus_top") != keys.end());
  }
}

TEST_CASE("config: values round-trip and override defaults") {
  const std::string text = R"({
    "seed": 7,
    "b0_tesla": 7.0,
    "tkd": {"threshold": 0.15},
    "model": {"lot_mode": "learnable", "lot_kernels": 16, "depth": 2, "base_channels": 8},
    "train": {"epochs": 10, "batch": 2, "lr_boundaries": [4, 8]}
  })";
  const auto c = PipelineConfig::from_json_text(text);
  CHECK(c.seed == 7);
  CHECK(c.b0_tesla == 7.0);
  CHECK(c.tkd_threshold == doctest::Approx(0.15));
  CHECK(c.model.lot_mode == nn::LotMode::learnable);
  CHECK(c.model.unet.in_channels == 16);
  CHECK(c.train.epochs == 10);
  CHECK(c.train.seed == 7);
}

TEST_CASE("config: hash is stable and sensitive") {
  const auto a = PipelineConfig::from_json_text("{}");
  const auto b = PipelineConfig::from_json_text("{}");
  CHECK(a.hash() == b.hash());
  const auto c = PipelineConfig::from_json_text(R"({"seed": 5})");
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("config: validation failures are domain errors") {
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"tkd": {"threshold": 0.9}})"), DomainError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"b0_tesla": -1})"), DomainError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"stencil": "unknown"})"), DomainError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text("[1,2]"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json_text("{nope"), ConfigError);
}

TEST_CASE("config: json dump reparses to the same hash") {
  const auto a = PipelineConfig::from_json_text(R"({"seed": 11, "noise": {"enabled": true, "snr": 25}})");
  const auto b = PipelineConfig::from_json_text(a.to_json());
  CHECK(a.hash() == b.hash());
}
