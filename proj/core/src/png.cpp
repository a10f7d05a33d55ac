#include "qsmlot/io/png.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace qsmlot::io {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> buf;
  put_u32(buf, static_cast<std::uint32_t>(data.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), data.begin(), data.end());
  const auto crc = crc32(0L, buf.data() + 4, static_cast<uInt>(buf.size() - 4));
  put_u32(buf, static_cast<std::uint32_t>(crc));
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_gray_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
  if (width <= 0 || height <= 0 ||
      pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw StructuralError("write_gray_png: pixel buffer does not match dimensions");
  }

  // Raw scanlines, each prefixed with filter byte 0.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (static_cast<std::size_t>(width) + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    const auto* row = pixels.data() + static_cast<std::size_t>(y) * width;
    raw.insert(raw.end(), row, row + width);
  }

  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(comp_size);
  if (compress2(compressed.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw IoError("write_gray_png: zlib compression failed");
  }
  compressed.resize(comp_size);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write_gray_png: cannot open " + path.string() + " for writing");

  static const std::uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  f.write(reinterpret_cast<const char*>(signature), 8);

  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // color type: grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace
  write_chunk(f, "IHDR", ihdr);
  write_chunk(f, "IDAT", compressed);
  write_chunk(f, "IEND", {});
  if (!f) throw IoError("write_gray_png: write failed for " + path.string());
}

std::vector<std::uint8_t> windowed_slice(const ScalarVolume& vol, SliceAxis axis, int index,
                                         double lo, double hi, int& width, int& height) {
  if (!(lo < hi)) throw StructuralError("windowed_slice: window lo must be < hi");
  const Dims3 d = vol.dims;
  int limit = 0;
  switch (axis) {
    case SliceAxis::x: limit = d.nx; width = d.ny; height = d.nz; break;
    case SliceAxis::y: limit = d.ny; width = d.nx; height = d.nz; break;
    case SliceAxis::z: limit = d.nz; width = d.nx; height = d.ny; break;
  }
  if (index < 0 || index >= limit) throw StructuralError("windowed_slice: slice index out of range");

  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height);
  auto window = [lo, hi](double v) {
    const double t = (v - lo) / (hi - lo);
    const double c = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
  };
  std::size_t p = 0;
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col, ++p) {
      double v = 0.0;
      switch (axis) {
        case SliceAxis::x: v = vol.at(index, col, row); break;
        case SliceAxis::y: v = vol.at(col, index, row); break;
        case SliceAxis::z: v = vol.at(col, row, index); break;
      }
      px[p] = window(v);
    }
  }
  return px;
}

void render_slices(const ScalarVolume& vol, SliceAxis axis, const std::vector<int>& indices,
                   double lo, double hi, const std::vector<std::filesystem::path>& out_paths) {
  if (indices.size() != out_paths.size()) {
    throw StructuralError("render_slices: indices and output paths differ in length");
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    int w = 0, h = 0;
    const auto px = windowed_slice(vol, axis, indices[i], lo, hi, w, h);
    write_gray_png(out_paths[i], w, h, px);
  }
}

}  // namespace qsmlot::io
