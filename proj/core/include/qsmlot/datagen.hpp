#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qsmlot/phase.hpp"
#include "qsmlot/rng.hpp"
#include "qsmlot/volume.hpp"

namespace qsmlot {

template <typename T>
struct Range {
  T lo{};
  T hi{};
  bool ordered() const { return lo <= hi; }
};

// Geometric pathology source generator: spheres, boxes and cubes overlaid
// on a small base grid, binarized, randomly resized, then multiplied by one
// susceptibility constant (hemorrhage or calcification).
struct PathologyConfig {
  Range<int> n_spheres{5, 10};
  Range<int> n_rects{5, 10};
  Range<int> n_cubes{5, 10};
  Range<double> shape_frac{0.10, 0.40};  // of the base image size
  Dims3 base_dims{16, 16, 16};
  Range<int> resize_range{12, 24};  // per-axis target dims
  Range<double> hemorrhage_ppm{0.4, 1.2};
  Range<double> calcification_ppm{-0.3, -0.1};
  double hemorrhage_prob = 0.5;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

ScalarVolume gen_pathology(const PathologyConfig& cfg);
ScalarVolume gen_pathology(const PathologyConfig& cfg, Rng& rng);

// Adds the lesion voxel values onto the patch at the given corner offset.
// Throws StructuralError if the lesion does not fit.
ScalarVolume superpose(const ScalarVolume& healthy_patch, const ScalarVolume& lesion,
                       std::array<int, 3> position);

struct CropSpec {
  Dims3 window{64, 64, 64};
  Dims3 stride{16, 26, 21};

  void validate() const;
};

// Sliding-window offsets: 0, s, 2s, ... with offset+window <= dims;
// count per axis = floor((dim-window)/stride)+1.
std::vector<std::array<int, 3>> crop_offsets(Dims3 dims, const CropSpec& spec);

struct Patch {
  std::array<int, 3> offset;
  ScalarVolume data;
};

std::vector<Patch> crop_patches(const ScalarVolume& vol, const CropSpec& spec);

// Normal TE draw truncated by resampling into (min_s, max_s].
struct TeSampler {
  double mean_s = 0.020;
  double std_s = 0.010;
  double min_s = 0.001;
  double max_s = 0.060;

  void validate() const;
  double draw(Rng& rng) const;
};

struct TrainingSample {
  ScalarVolume phase_w;      // radians, wrapped
  ScalarVolume local_field;  // ppm (iQFM label)
  ScalarVolume chi;          // ppm (iQSM label)
  ScalarVolume magnitude;
  double te_s = 0.02;
  double b0_tesla = 3.0;
  bool is_pathological = false;
};

// One pass of the forward simulation: local field from chi, background
// added, phase evolved at a random TE and wrapped, optional complex noise.
// The magnitude defaults to all-ones.
TrainingSample simulate_sample(const ScalarVolume& chi_patch, const ScalarVolume& bg_field,
                               const TeSampler& te_sampler, double b0_tesla, Rng& rng,
                               const std::optional<NoiseSpec>& noise = {},
                               bool is_pathological = false);

// Procedural stand-ins for the in-vivo inputs (synthetic, clearly labeled):
// a smooth random susceptibility field plus ellipsoidal deep-grey-like
// structures at literature-typical ppm values.
ScalarVolume make_healthy_phantom(Dims3 dims, std::uint64_t seed);

// Ellipsoidal brain-like mask with the given fractional margin per axis.
Mask make_brain_mask(Dims3 dims, double margin_frac = 0.12);

// Background field from dipole sources outside the patch: the sources live
// in the padding shell of a grid twice the size, so the cropped centre
// region sees a field that is harmonic everywhere inside it. Scaled to the
// requested RMS over the patch.
ScalarVolume background_from_padded_sources(Dims3 dims, std::uint64_t seed, double rms_ppm);

// Background field from small spherical sources placed inside the grid but
// at least `margin` voxels away from the mask; harmonic inside the mask (to
// discretization accuracy). Scaled to the requested RMS over the mask.
ScalarVolume background_from_exterior_sources(Dims3 dims, const Mask& mask, std::uint64_t seed,
                                              double rms_ppm, int margin = 8);

struct DatasetBuildConfig {
  int n_samples = 100;
  double healthy_fraction = 0.6;  // pathological fraction is the complement
  Dims3 patch_dims{64, 64, 64};
  PathologyConfig pathology;
  TeSampler te;
  double b0_tesla = 3.0;
  double bg_rms_ppm = 1.0;
  std::optional<double> noise_snr;  // complex-noise SNR if set
  std::uint64_t master_seed = 0;
  // Healthy susceptibility patch sources (.nii volumes of patch_dims size,
  // e.g. produced by crop_patches from full-size reconstructions), drawn
  // per sample; the procedural phantom generator is used when empty.
  std::vector<std::filesystem::path> healthy_sources;

  void validate() const;
};

struct DatasetSampleEntry {
  int index = 0;
  std::uint64_t seed = 0;
  double te_s = 0.0;
  bool is_pathological = false;
  std::string phase_file, local_file, chi_file, magnitude_file;
  std::string phase_hash, local_hash, chi_hash, magnitude_hash;
};

struct DatasetManifest {
  int n_samples = 0;
  int healthy_count = 0;
  int pathological_count = 0;
  std::uint64_t master_seed = 0;
  double b0_tesla = 3.0;
  Dims3 patch_dims;
  std::string config_hash;
  std::vector<DatasetSampleEntry> samples;

  std::string to_json(const DatasetBuildConfig& cfg) const;
};

// Writes sample volumes (float32 NIfTI) plus manifest.json into out_dir.
// Fully deterministic: each sample's RNG stream is derived from
// (master_seed, sample index), so a rebuild reproduces byte-identical files.
DatasetManifest build_dataset(const DatasetBuildConfig& cfg, const std::filesystem::path& out_dir);

// Reloads the samples listed in a manifest written by build_dataset.
std::vector<TrainingSample> load_dataset(const std::filesystem::path& manifest_path);

}  // namespace qsmlot
