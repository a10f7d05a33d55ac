#include "qsmlot/dipole.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "qsmlot/fft.hpp"
#include "qsmlot/phase.hpp"

namespace qsmlot {

void AcquisitionParams::validate() const {
  if (!(b0_tesla > 0.0)) throw DomainError("AcquisitionParams: B0 must be positive");
  if (!(gamma_bar_mhz_per_t > 0.0)) throw DomainError("AcquisitionParams: gamma_bar must be positive");
  for (std::size_t i = 0; i < te_s.size(); ++i) {
    if (!(te_s[i] > 0.0)) throw DomainError("AcquisitionParams: echo times must be positive");
    if (i > 0 && !(te_s[i] > te_s[i - 1])) {
      throw DomainError("AcquisitionParams: echo times must be strictly increasing");
    }
  }
  const double norm = std::sqrt(b0_direction[0] * b0_direction[0] +
                                b0_direction[1] * b0_direction[1] +
                                b0_direction[2] * b0_direction[2]);
  if (std::abs(norm - 1.0) > 1e-12) {
    throw DomainError("AcquisitionParams: b0_direction must be a unit vector");
  }
}

void EchoSeries::validate() const {
  params.validate();
  if (phases.size() != params.te_s.size() || magnitudes.size() != params.te_s.size()) {
    throw StructuralError("EchoSeries: phases/magnitudes/TE list lengths differ");
  }
  for (std::size_t i = 0; i < phases.size(); ++i) {
    detail::require_same_dims(phases[i].dims, phases[0].dims, "EchoSeries");
    detail::require_same_dims(magnitudes[i].dims, phases[0].dims, "EchoSeries");
  }
}

DipoleKernel DipoleKernel::make(Dims3 dims, Spacing spacing, std::array<double, 3> b0_direction) {
  const double norm = std::sqrt(b0_direction[0] * b0_direction[0] +
                                b0_direction[1] * b0_direction[1] +
                                b0_direction[2] * b0_direction[2]);
  if (std::abs(norm - 1.0) > 1e-12) {
    throw DomainError("DipoleKernel: b0_direction must be a unit vector");
  }
  DipoleKernel d;
  d.dims = dims;
  d.spacing = spacing;
  d.b0_direction = b0_direction;
  d.spectrum.assign(static_cast<std::size_t>(dims.count()), 0.0);
  std::size_t idx = 0;
  for (int kz = 0; kz < dims.nz; ++kz) {
    const double fz = fft::freq_index(kz, dims.nz) / (dims.nz * spacing.dz);
    for (int ky = 0; ky < dims.ny; ++ky) {
      const double fy = fft::freq_index(ky, dims.ny) / (dims.ny * spacing.dy);
      for (int kx = 0; kx < dims.nx; ++kx, ++idx) {
        const double fx = fft::freq_index(kx, dims.nx) / (dims.nx * spacing.dx);
        const double k2 = fx * fx + fy * fy + fz * fz;
        if (k2 == 0.0) {
          d.spectrum[idx] = 0.0;  // DC convention: uniform chi maps to zero field
          continue;
        }
        const double k_par = fx * b0_direction[0] + fy * b0_direction[1] + fz * b0_direction[2];
        d.spectrum[idx] = 1.0 / 3.0 - (k_par * k_par) / k2;
      }
    }
  }
  return d;
}

namespace {

std::vector<std::complex<double>> to_complex(const ScalarVolume& v) {
  std::vector<std::complex<double>> out(v.data.size());
  for (std::size_t i = 0; i < v.data.size(); ++i) out[i] = v.data[i];
  return out;
}

}  // namespace

ScalarVolume forward_field(const ScalarVolume& chi_ppm, const DipoleKernel& d) {
  detail::require_same_dims(chi_ppm.dims, d.dims, "forward_field");
  auto spec = fft::forward(chi_ppm.dims, to_complex(chi_ppm));
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= d.spectrum[i];
  const auto field = fft::inverse(chi_ppm.dims, spec);
  ScalarVolume out(chi_ppm.dims, Unit::ppm, 0.0, chi_ppm.spacing);
  for (std::size_t i = 0; i < field.size(); ++i) out.data[i] = field[i].real();
  return out;
}

ScalarVolume phase_evolve(const ScalarVolume& field_ppm, const AcquisitionParams& params,
                          int te_index) {
  params.validate();
  if (te_index < 0 || static_cast<std::size_t>(te_index) >= params.te_s.size()) {
    throw StructuralError("phase_evolve: te_index out of range");
  }
  const double te = params.te_s[static_cast<std::size_t>(te_index)];
  // 2*pi * gamma_bar[Hz/T] * B0[T] * field[dimensionless] * TE[s]
  const double scale = 2.0 * 3.14159265358979323846 * params.gamma_bar_mhz_per_t * 1e6 *
                       params.b0_tesla * 1e-6 * te;
  ScalarVolume out(field_ppm.dims, Unit::radians, 0.0, field_ppm.spacing);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = wrap_scalar(scale * field_ppm.data[i]);
  }
  return out;
}

ScalarVolume tkd_invert(const ScalarVolume& field_ppm, const DipoleKernel& d, double threshold) {
  detail::require_same_dims(field_ppm.dims, d.dims, "tkd_invert");
  if (!(threshold > 0.0) || threshold > 1.0 / 3.0 + 1e-15) {
    throw DomainError("tkd_invert: threshold must be in (0, 1/3]");
  }
  auto spec = fft::forward(field_ppm.dims, to_complex(field_ppm));
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double dk = d.spectrum[i];
    if (dk == 0.0 && i == 0) {
      spec[i] = 0.0;  // DC
      continue;
    }
    const double clamped = std::copysign(std::max(std::abs(dk), threshold), dk == 0.0 ? 1.0 : dk);
    spec[i] /= clamped;
  }
  // k=0 always maps to zero susceptibility.
  spec[0] = 0.0;
  const auto chi = fft::inverse(field_ppm.dims, spec);
  ScalarVolume out(field_ppm.dims, Unit::ppm, 0.0, field_ppm.spacing);
  for (std::size_t i = 0; i < chi.size(); ++i) out.data[i] = chi[i].real();
  return out;
}

EchoFitResult echo_fit(const std::vector<ScalarVolume>& te_scaled_values,
                       const std::vector<ScalarVolume>& magnitudes,
                       const std::vector<double>& te_s) {
  if (te_scaled_values.empty() || te_scaled_values.size() != magnitudes.size() ||
      te_scaled_values.size() != te_s.size()) {
    throw StructuralError("echo_fit: value/magnitude/TE list lengths differ or are empty");
  }
  for (double te : te_s) {
    if (!(te > 0.0)) throw DomainError("echo_fit: echo times must be positive");
  }
  const Dims3 dims = te_scaled_values[0].dims;
  for (std::size_t e = 0; e < te_scaled_values.size(); ++e) {
    detail::require_same_dims(te_scaled_values[e].dims, dims, "echo_fit");
    detail::require_same_dims(magnitudes[e].dims, dims, "echo_fit");
  }

  EchoFitResult res{ScalarVolume(dims, te_scaled_values[0].unit, 0.0, te_scaled_values[0].spacing),
                    Mask(dims, false)};
  const std::int64_t n = dims.count();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < te_s.size(); ++e) {
      const double m = magnitudes[e].data[ii];
      num += m * te_s[e] * te_scaled_values[e].data[ii];
      den += m * te_s[e] * te_s[e];
    }
    if (den == 0.0) {
      res.value.data[ii] = 0.0;
      res.zero_weight.data[ii] = 1;
    } else {
      res.value.data[ii] = num / den;
    }
  }
  return res;
}

}  // namespace qsmlot
