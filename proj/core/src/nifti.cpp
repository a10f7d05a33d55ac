#include "qsmlot/io/nifti.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace qsmlot::io {

namespace {

// The fixed 348-byte NIfTI-1 header (fields we do not consume are kept as
// padding so offsets stay exact).
#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;    // must be 348
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

template <typename T>
void swap_bytes(T& v) {
  auto* p = reinterpret_cast<unsigned char*>(&v);
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

void swap_header(Nifti1Header& h) {
  swap_bytes(h.sizeof_hdr);
  for (auto& d : h.dim) swap_bytes(d);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  for (auto& p : h.pixdim) swap_bytes(p);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
}

template <typename T>
std::vector<double> decode(const std::vector<char>& raw, std::int64_t n, bool swapped) {
  if (raw.size() < static_cast<std::size_t>(n) * sizeof(T)) {
    throw IoError("nifti_read: truncated payload");
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  const T* p = reinterpret_cast<const T*>(raw.data());
  for (std::int64_t i = 0; i < n; ++i) {
    T v = p[i];
    if (swapped) swap_bytes(v);
    out[static_cast<std::size_t>(i)] = static_cast<double>(v);
  }
  return out;
}

}  // namespace

std::pair<ScalarVolume, NiftiMeta> nifti_read(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    throw UnsupportedError("nifti_read: compressed images are not supported; decompress first: " +
                           path.string());
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("nifti_read: cannot open " + path.string());

  Nifti1Header h{};
  f.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (!f) throw IoError("nifti_read: cannot read header of " + path.string());

  // Byte order: dim[0] must land in [1,7] in the file's native order.
  bool swapped = false;
  if (h.dim[0] < 1 || h.dim[0] > 7) {
    swap_header(h);
    swapped = true;
    if (h.dim[0] < 1 || h.dim[0] > 7) {
      throw IoError("nifti_read: corrupt header (dim[0] sentinel) in " + path.string());
    }
  }
  if (h.sizeof_hdr != 348) {
    throw IoError("nifti_read: header size field is not 348 in " + path.string());
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0) {
    throw UnsupportedError("nifti_read: only single-file images (magic \"n+1\") are supported: " +
                           path.string());
  }
  if (h.dim[0] > 3) {
    for (int i = 4; i <= h.dim[0]; ++i) {
      if (h.dim[i] > 1) {
        throw UnsupportedError("nifti_read: only 3D images are supported: " + path.string());
      }
    }
  }

  const Dims3 dims{h.dim[1], h.dim[0] >= 2 ? h.dim[2] : 1, h.dim[0] >= 3 ? h.dim[3] : 1};
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
    throw IoError("nifti_read: non-positive dims in " + path.string());
  }
  Spacing spacing{h.pixdim[1] > 0 ? h.pixdim[1] : 1.0,
                  h.pixdim[2] > 0 ? h.pixdim[2] : 1.0,
                  h.pixdim[3] > 0 ? h.pixdim[3] : 1.0};

  const auto offset = static_cast<std::streamoff>(h.vox_offset);
  f.seekg(offset, std::ios::beg);
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  std::vector<double> values;
  switch (h.datatype) {
    case static_cast<std::int16_t>(NiftiDatatype::uint8):
      values = decode<std::uint8_t>(raw, dims.count(), false);
      break;
    case static_cast<std::int16_t>(NiftiDatatype::int16):
      values = decode<std::int16_t>(raw, dims.count(), swapped);
      break;
    case static_cast<std::int16_t>(NiftiDatatype::float32):
      values = decode<float>(raw, dims.count(), swapped);
      break;
    case static_cast<std::int16_t>(NiftiDatatype::float64):
      values = decode<double>(raw, dims.count(), swapped);
      break;
    default:
      throw UnsupportedError("nifti_read: unsupported datatype " + std::to_string(h.datatype) +
                             " in " + path.string());
  }

  // Per the standard a zero slope means "no scaling".
  const double slope = h.scl_slope == 0.0f ? 1.0 : static_cast<double>(h.scl_slope);
  const double inter = h.scl_slope == 0.0f ? 0.0 : static_cast<double>(h.scl_inter);
  if (slope != 1.0 || inter != 0.0) {
    for (auto& v : values) v = v * slope + inter;
  }

  NiftiMeta meta{static_cast<NiftiDatatype>(h.datatype), h.scl_slope, h.scl_inter, swapped};
  return {ScalarVolume(dims, Unit::dimensionless, std::move(values), spacing), meta};
}

ScalarVolume nifti_read_volume(const std::filesystem::path& path, Unit unit) {
  auto [vol, meta] = nifti_read(path);
  vol.unit = unit;
  return vol;
}

Mask nifti_read_mask(const std::filesystem::path& path) {
  const auto vol = nifti_read_volume(path);
  Mask m(vol.dims, false);
  for (std::size_t i = 0; i < vol.data.size(); ++i) m.data[i] = vol.data[i] > 0.5 ? 1 : 0;
  return m;
}

void nifti_write(const ScalarVolume& vol, const std::filesystem::path& path,
                 NiftiDatatype datatype) {
  vol.require_finite("nifti_write");

  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(vol.dims.nx);
  h.dim[2] = static_cast<std::int16_t>(vol.dims.ny);
  h.dim[3] = static_cast<std::int16_t>(vol.dims.nz);
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = static_cast<float>(vol.spacing.dx);
  h.pixdim[2] = static_cast<float>(vol.spacing.dy);
  h.pixdim[3] = static_cast<float>(vol.spacing.dz);
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.datatype = static_cast<std::int16_t>(datatype);
  std::snprintf(h.descrip, sizeof(h.descrip), "qsmlot (%s)", unit_name(vol.unit));
  std::memcpy(h.magic, "n+1", 4);

  std::vector<char> payload;
  switch (datatype) {
    case NiftiDatatype::float32: {
      h.bitpix = 32;
      payload.resize(vol.data.size() * sizeof(float));
      auto* p = reinterpret_cast<float*>(payload.data());
      for (std::size_t i = 0; i < vol.data.size(); ++i) p[i] = static_cast<float>(vol.data[i]);
      break;
    }
    case NiftiDatatype::float64: {
      h.bitpix = 64;
      payload.resize(vol.data.size() * sizeof(double));
      std::memcpy(payload.data(), vol.data.data(), payload.size());
      break;
    }
    case NiftiDatatype::uint8: {
      h.bitpix = 8;
      payload.resize(vol.data.size());
      auto* p = reinterpret_cast<std::uint8_t*>(payload.data());
      for (std::size_t i = 0; i < vol.data.size(); ++i) {
        const double v = vol.data[i];
        p[i] = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v + 0.5));
      }
      break;
    }
    default:
      throw UnsupportedError("nifti_write: unsupported output datatype");
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("nifti_write: cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(&h), sizeof(h));
  const char ext_flag[4] = {0, 0, 0, 0};
  f.write(ext_flag, 4);
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) throw IoError("nifti_write: write failed for " + path.string());
}

void nifti_write_mask(const Mask& mask, const std::filesystem::path& path) {
  ScalarVolume v(mask.dims, Unit::dimensionless);
  for (std::size_t i = 0; i < mask.data.size(); ++i) v.data[i] = mask.data[i] ? 1.0 : 0.0;
  nifti_write(v, path, NiftiDatatype::uint8);
}

}  // namespace qsmlot::io
