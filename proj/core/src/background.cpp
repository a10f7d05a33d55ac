#include "qsmlot/background.hpp"

#include <cmath>
#include <complex>

#include "qsmlot/fft.hpp"

namespace qsmlot {

void ResharpConfig::validate() const {
  if (smv_radius <= 0) throw DomainError("ResharpConfig: smv_radius must be positive");
  if (!(tikhonov_lambda > 0.0)) throw DomainError("ResharpConfig: lambda must be positive");
  if (!(cg_tol > 0.0)) throw DomainError("ResharpConfig: cg_tol must be positive");
  if (cg_max_iter <= 0) throw DomainError("ResharpConfig: cg_max_iter must be positive");
}

SmvKernel SmvKernel::make(Dims3 dims, Spacing spacing, int radius) {
  if (radius <= 0) throw DomainError("SmvKernel: radius must be positive");
  if (dims.nx < 2 * radius + 1 || dims.ny < 2 * radius + 1 || dims.nz < 2 * radius + 1) {
    throw StructuralError("SmvKernel: grid too small for the requested radius");
  }

  // Ball image with its centre at voxel (0,0,0), negative offsets wrapped.
  std::vector<std::complex<double>> ball(static_cast<std::size_t>(dims.count()), 0.0);
  std::int64_t n_ball = 0;
  const int r2 = radius * radius;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy + dz * dz <= r2) ++n_ball;
  const double w = 1.0 / static_cast<double>(n_ball);
  for (int dz = -radius; dz <= radius; ++dz) {
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy + dz * dz > r2) continue;
        const int x = (dx + dims.nx) % dims.nx;
        const int y = (dy + dims.ny) % dims.ny;
        const int z = (dz + dims.nz) % dims.nz;
        ball[static_cast<std::size_t>(x) +
             static_cast<std::size_t>(dims.nx) *
                 (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims.ny) * z)] = w;
      }
    }
  }

  SmvKernel s;
  s.radius = radius;
  s.dims = dims;
  s.spacing = spacing;
  s.spectrum.resize(static_cast<std::size_t>(dims.count()));
  const auto ball_hat = fft::forward(dims, ball);
  for (std::size_t i = 0; i < s.spectrum.size(); ++i) {
    s.spectrum[i] = 1.0 - ball_hat[i].real();  // delta - ball; imag part is rounding noise
  }
  return s;
}

ScalarVolume smv_highpass(const ScalarVolume& f, const SmvKernel& s) {
  detail::require_same_dims(f.dims, s.dims, "smv_highpass");
  std::vector<std::complex<double>> buf(f.data.begin(), f.data.end());
  auto hat = fft::forward(f.dims, buf);
  for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= s.spectrum[i];
  const auto out_c = fft::inverse(f.dims, hat);
  ScalarVolume out(f.dims, f.unit, 0.0, f.spacing);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = out_c[i].real();
  return out;
}

namespace {

// H f = S' M_e S f + lambda f, with S symmetric so S' = S.
void apply_normal_op(const SmvKernel& s, const Mask& me, double lambda,
                     const ScalarVolume& f, ScalarVolume& out) {
  ScalarVolume sf = smv_highpass(f, s);
  for (std::size_t i = 0; i < sf.data.size(); ++i) {
    if (!me.data[i]) sf.data[i] = 0.0;
  }
  out = smv_highpass(sf, s);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] += lambda * f.data[i];
  }
}

double dot(const ScalarVolume& a, const ScalarVolume& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

}  // namespace

ResharpResult resharp(const ScalarVolume& total_field, const Mask& mask, const ResharpConfig& cfg) {
  cfg.validate();
  detail::require_same_dims(total_field.dims, mask.dims, "resharp");

  const Mask me = erode(mask, cfg.smv_radius);
  if (me.count_true() == 0) {
    throw DomainError("resharp: mask is empty after erosion by the SMV radius");
  }
  const SmvKernel s = SmvKernel::make(total_field.dims, total_field.spacing, cfg.smv_radius);

  // rhs = S' M_e S t
  ScalarVolume st = smv_highpass(total_field, s);
  for (std::size_t i = 0; i < st.data.size(); ++i) {
    if (!me.data[i]) st.data[i] = 0.0;
  }
  ScalarVolume rhs = smv_highpass(st, s);

  // CG on (S' M_e S + lambda I) f = rhs, starting from zero.
  ScalarVolume f(total_field.dims, total_field.unit, 0.0, total_field.spacing);
  ScalarVolume r = rhs;
  ScalarVolume p = r;
  ScalarVolume hp(total_field.dims, total_field.unit, 0.0, total_field.spacing);

  const double rhs_norm = std::sqrt(dot(rhs, rhs));
  ResharpResult res{ScalarVolume(total_field.dims, total_field.unit, 0.0, total_field.spacing),
                    me, 0, 0.0, {}};
  if (rhs_norm == 0.0) {
    res.local_field = f;
    return res;
  }

  double rr = dot(r, r);
  double rel = std::sqrt(rr) / rhs_norm;
  int iter = 0;
  while (rel > cfg.cg_tol && iter < cfg.cg_max_iter) {
    apply_normal_op(s, me, cfg.tikhonov_lambda, p, hp);
    const double alpha = rr / dot(p, hp);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      f.data[i] += alpha * p.data[i];
      r.data[i] -= alpha * hp.data[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      p.data[i] = r.data[i] + beta * p.data[i];
    }
    rr = rr_new;
    rel = std::sqrt(rr) / rhs_norm;
    ++iter;
    // Objective 1/2 f'Hf - b'f = -1/2 f'(b + r), using Hf = b - r.
    res.objective_history.push_back(-0.5 * (dot(f, rhs) + dot(f, r)));
  }
  if (rel > cfg.cg_tol) {
    throw ConvergenceError("resharp: CG did not reach tolerance within max iterations", rel);
  }

  res.iterations = iter;
  res.relative_residual = rel;
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    res.local_field.data[i] = me.data[i] ? f.data[i] : 0.0;
  }
  return res;
}

}  // namespace qsmlot
