#pragma once

#include <filesystem>
#include <optional>

#include "qsmlot/volume.hpp"

namespace qsmlot::io {

enum class NiftiDatatype : short {
  uint8 = 2,
  int16 = 4,
  float32 = 16,
  float64 = 64,
};

struct NiftiMeta {
  NiftiDatatype datatype = NiftiDatatype::float32;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  bool byte_swapped = false;
};

// Reads a single-file NIfTI-1 image (.nii, magic "n+1"). Supported
// datatypes: uint8, int16, float32, float64. scl_slope/scl_inter are
// applied (slope 0 treated as 1 per the standard); byte order is detected
// from the dim[0] sentinel. Anything else (compressed files, other
// datatypes, extensions) raises UnsupportedError.
std::pair<ScalarVolume, NiftiMeta> nifti_read(const std::filesystem::path& path);

ScalarVolume nifti_read_volume(const std::filesystem::path& path,
                               Unit unit = Unit::dimensionless);

// Reads a volume and thresholds it at > 0.5 into a mask.
Mask nifti_read_mask(const std::filesystem::path& path);

// Writes a standard-conformant single-file NIfTI-1 image (348-byte header,
// 4-byte extension flag, vox_offset 352). Rejects non-finite voxels.
void nifti_write(const ScalarVolume& vol, const std::filesystem::path& path,
                 NiftiDatatype datatype = NiftiDatatype::float32);

void nifti_write_mask(const Mask& mask, const std::filesystem::path& path);

}  // namespace qsmlot::io
