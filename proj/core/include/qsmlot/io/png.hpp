#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qsmlot/volume.hpp"

namespace qsmlot::io {

// Minimal 8-bit grayscale PNG writer (zlib-compressed IDAT, filter 0).
void write_gray_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels);

enum class SliceAxis { x, y, z };

// Extracts a slice and applies linear windowing: values <= lo map to 0,
// values >= hi map to 255. Image rows follow the second remaining axis
// (e.g. axis z: width nx, height ny, row j = y index j).
std::vector<std::uint8_t> windowed_slice(const ScalarVolume& vol, SliceAxis axis, int index,
                                         double lo, double hi, int& width, int& height);

// One PNG per requested slice index; out_paths must match indices in length.
void render_slices(const ScalarVolume& vol, SliceAxis axis, const std::vector<int>& indices,
                   double lo, double hi, const std::vector<std::filesystem::path>& out_paths);

}  // namespace qsmlot::io
