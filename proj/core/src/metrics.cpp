#include "qsmlot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace qsmlot {

double nrmse_percent(const ScalarVolume& recon, const ScalarVolume& truth, const Mask& mask) {
  detail::require_same_dims(recon.dims, truth.dims, "nrmse");
  detail::require_same_dims(recon.dims, mask.dims, "nrmse");
  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t i = 0; i < recon.data.size(); ++i) {
    if (!mask.data[i]) continue;
    const double d = recon.data[i] - truth.data[i];
    err2 += d * d;
    ref2 += truth.data[i] * truth.data[i];
  }
  if (ref2 == 0.0) throw DomainError("nrmse: truth has zero norm inside the mask");
  return 100.0 * std::sqrt(err2 / ref2);
}

std::optional<double> psnr_db(const ScalarVolume& recon, const ScalarVolume& truth,
                              const Mask& mask, std::optional<double> peak) {
  detail::require_same_dims(recon.dims, truth.dims, "psnr");
  detail::require_same_dims(recon.dims, mask.dims, "psnr");
  double err2 = 0.0, max_abs = 0.0;
  std::int64_t n = 0;
  for (std::size_t i = 0; i < recon.data.size(); ++i) {
    if (!mask.data[i]) continue;
    const double d = recon.data[i] - truth.data[i];
    err2 += d * d;
    max_abs = std::max(max_abs, std::abs(truth.data[i]));
    ++n;
  }
  if (n == 0) throw DomainError("psnr: empty mask");
  const double mse = err2 / static_cast<double>(n);
  if (mse == 0.0) return std::nullopt;  // identical
  const double p = peak.value_or(max_abs);
  if (!(p > 0.0)) throw DomainError("psnr: peak must be positive");
  return 10.0 * std::log10(p * p / mse);
}

namespace {

std::vector<double> gaussian_taps(int window, double sigma) {
  const int r = window / 2;
  std::vector<double> g(static_cast<std::size_t>(window));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    g[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += g[static_cast<std::size_t>(i + r)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable weighted box filter; zero outside handled by only evaluating
// fully-interior centres later.
void filter_axis(const std::vector<double>& in, Dims3 d, int axis,
                 const std::vector<double>& taps, std::vector<double>& out) {
  const int r = static_cast<int>(taps.size()) / 2;
  out.assign(in.size(), 0.0);
  const std::int64_t sx = 1, sy = d.nx, sz = static_cast<std::int64_t>(d.nx) * d.ny;
  const std::int64_t stride = axis == 0 ? sx : (axis == 1 ? sy : sz);
  const int n_axis = axis == 0 ? d.nx : (axis == 1 ? d.ny : d.nz);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::int64_t idx = x * sx + y * sy + z * sz;
        const int pos = axis == 0 ? x : (axis == 1 ? y : z);
        double acc = 0.0;
        const int lo = std::max(-r, -pos), hi = std::min(r, n_axis - 1 - pos);
        for (int t = lo; t <= hi; ++t) {
          acc += taps[static_cast<std::size_t>(t + r)] * in[static_cast<std::size_t>(idx + t * stride)];
        }
        out[static_cast<std::size_t>(idx)] = acc;
      }
    }
  }
}

void gaussian_filter3(const std::vector<double>& in, Dims3 d, const std::vector<double>& taps,
                      std::vector<double>& out) {
  std::vector<double> tmp;
  filter_axis(in, d, 0, taps, out);
  filter_axis(out, d, 1, taps, tmp);
  filter_axis(tmp, d, 2, taps, out);
}

}  // namespace

double ssim(const ScalarVolume& recon, const ScalarVolume& truth, const Mask& mask,
            const SsimConfig& cfg) {
  detail::require_same_dims(recon.dims, truth.dims, "ssim");
  detail::require_same_dims(recon.dims, mask.dims, "ssim");
  if (cfg.window < 3 || cfg.window % 2 == 0) {
    throw DomainError("ssim: window must be odd and >= 3");
  }
  if (!(cfg.sigma > 0.0)) throw DomainError("ssim: sigma must be positive");

  const Dims3 d = recon.dims;
  const int r = cfg.window / 2;
  if (d.nx < cfg.window || d.ny < cfg.window || d.nz < cfg.window) {
    throw DomainError("ssim: volume smaller than the window");
  }

  double range = 0.0;
  if (cfg.dynamic_range) {
    range = *cfg.dynamic_range;
  } else {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
      if (!mask.data[i]) continue;
      lo = std::min(lo, truth.data[i]);
      hi = std::max(hi, truth.data[i]);
    }
    range = hi - lo;
  }
  if (!(range > 0.0)) throw DomainError("ssim: dynamic range must be positive");
  const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double c2 = (cfg.k2 * range) * (cfg.k2 * range);

  const auto taps = gaussian_taps(cfg.window, cfg.sigma);
  const std::size_t n = recon.data.size();
  std::vector<double> xy(n), xx(n), yy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xy[i] = recon.data[i] * truth.data[i];
    xx[i] = recon.data[i] * recon.data[i];
    yy[i] = truth.data[i] * truth.data[i];
  }
  std::vector<double> mu_x, mu_y, s_xy, s_xx, s_yy;
  gaussian_filter3(recon.data, d, taps, mu_x);
  gaussian_filter3(truth.data, d, taps, mu_y);
  gaussian_filter3(xy, d, taps, s_xy);
  gaussian_filter3(xx, d, taps, s_xx);
  gaussian_filter3(yy, d, taps, s_yy);

  // Valid centres: full window inside the grid and inside the mask.
  // The mask check uses an erosion-style box test.
  double sum = 0.0;
  std::int64_t count = 0;
  for (int z = r; z < d.nz - r; ++z) {
    for (int y = r; y < d.ny - r; ++y) {
      for (int x = r; x < d.nx - r; ++x) {
        const std::int64_t idx = recon.index(x, y, z);
        bool inside = true;
        for (int dz = -r; dz <= r && inside; ++dz)
          for (int dy = -r; dy <= r && inside; ++dy)
            for (int dx = -r; dx <= r; ++dx)
              if (!mask.data[static_cast<std::size_t>(recon.index(x + dx, y + dy, z + dz))]) {
                inside = false;
                break;
              }
        if (!inside) continue;
        const auto ii = static_cast<std::size_t>(idx);
        const double mx = mu_x[ii], my = mu_y[ii];
        const double vx = s_xx[ii] - mx * mx;
        const double vy = s_yy[ii] - my * my;
        const double cxy = s_xy[ii] - mx * my;
        const double val = ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                           ((mx * mx + my * my + c1) * (vx + vy + c2));
        sum += val;
        ++count;
      }
    }
  }
  if (count == 0) throw DomainError("ssim: no window fits fully inside the mask");
  return sum / static_cast<double>(count);
}

LineProfile line_profile(const ScalarVolume& vol, std::array<double, 3> start_voxel,
                         std::array<double, 3> end_voxel, int n_samples) {
  if (n_samples < 2) throw DomainError("line_profile: need at least 2 samples");
  const Dims3 d = vol.dims;
  for (const auto& p : {start_voxel, end_voxel}) {
    if (p[0] < 0 || p[1] < 0 || p[2] < 0 || p[0] > d.nx - 1 || p[1] > d.ny - 1 || p[2] > d.nz - 1) {
      throw StructuralError("line_profile: endpoint out of bounds");
    }
  }
  const double ex = (end_voxel[0] - start_voxel[0]) * vol.spacing.dx;
  const double ey = (end_voxel[1] - start_voxel[1]) * vol.spacing.dy;
  const double ez = (end_voxel[2] - start_voxel[2]) * vol.spacing.dz;
  const double length = std::sqrt(ex * ex + ey * ey + ez * ez);

  LineProfile prof;
  prof.positions_mm.reserve(static_cast<std::size_t>(n_samples));
  prof.values.reserve(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    const double t = static_cast<double>(s) / (n_samples - 1);
    const double px = start_voxel[0] + t * (end_voxel[0] - start_voxel[0]);
    const double py = start_voxel[1] + t * (end_voxel[1] - start_voxel[1]);
    const double pz = start_voxel[2] + t * (end_voxel[2] - start_voxel[2]);
    const int x0 = std::min(static_cast<int>(px), d.nx - 2 >= 0 ? d.nx - 2 : 0);
    const int y0 = std::min(static_cast<int>(py), d.ny - 2 >= 0 ? d.ny - 2 : 0);
    const int z0 = std::min(static_cast<int>(pz), d.nz - 2 >= 0 ? d.nz - 2 : 0);
    const double fx = px - x0, fy = py - y0, fz = pz - z0;
    auto v = [&](int a, int b, int c) {
      return vol.at(std::min(a, d.nx - 1), std::min(b, d.ny - 1), std::min(c, d.nz - 1));
    };
    const double c00 = v(x0, y0, z0) * (1 - fx) + v(x0 + 1, y0, z0) * fx;
    const double c10 = v(x0, y0 + 1, z0) * (1 - fx) + v(x0 + 1, y0 + 1, z0) * fx;
    const double c01 = v(x0, y0, z0 + 1) * (1 - fx) + v(x0 + 1, y0, z0 + 1) * fx;
    const double c11 = v(x0, y0 + 1, z0 + 1) * (1 - fx) + v(x0 + 1, y0 + 1, z0 + 1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    prof.positions_mm.push_back(t * length);
    prof.values.push_back(c0 * (1 - fz) + c1 * fz);
  }
  return prof;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  if (psnr) {
    j["psnr_db"] = *psnr;
  } else {
    j["psnr_db"] = "identical";
  }
  j["ssim"] = ssim_value;
  j["nrmse_percent"] = nrmse;
  j["ssim_config"] = {{"window", ssim_config.window},
                      {"sigma", ssim_config.sigma},
                      {"k1", ssim_config.k1},
                      {"k2", ssim_config.k2},
                      {"dynamic_range", ssim_dynamic_range_used}};
  if (psnr_peak_used) j["psnr_peak"] = *psnr_peak_used;
  auto rois_j = nlohmann::json::array();
  for (const auto& r : rois) {
    rois_j.push_back({{"label", r.label},
                      {"mean_ppb", r.mean_ppb},
                      {"std_ppb", r.std_ppb},
                      {"count", r.count}});
  }
  j["rois"] = rois_j;
  if (profile) {
    j["line_profile"] = {{"positions_mm", profile->positions_mm}, {"values", profile->values}};
  }
  return j.dump(2);
}

MetricsReport evaluate(const ScalarVolume& recon, const ScalarVolume& truth, const Mask& mask,
                       const SsimConfig& cfg,
                       const std::vector<std::pair<std::string, Mask>>& rois) {
  MetricsReport rep;
  rep.ssim_config = cfg;
  rep.nrmse = nrmse_percent(recon, truth, mask);
  double max_abs = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    if (!mask.data[i]) continue;
    max_abs = std::max(max_abs, std::abs(truth.data[i]));
    lo = std::min(lo, truth.data[i]);
    hi = std::max(hi, truth.data[i]);
  }
  rep.psnr = psnr_db(recon, truth, mask);
  rep.psnr_peak_used = max_abs;
  rep.ssim_dynamic_range_used = cfg.dynamic_range.value_or(hi - lo);
  rep.ssim_value = ssim(recon, truth, mask, cfg);
  for (const auto& [label, roi] : rois) {
    const RoiStats s = roi_stats(recon, roi);
    rep.rois.push_back({label, s.mean * 1000.0, s.stddev * 1000.0, s.count});
  }
  return rep;
}

}  // namespace qsmlot
