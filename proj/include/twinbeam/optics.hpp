#ifndef TWINBEAM_OPTICS_HPP
#define TWINBEAM_OPTICS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "twinbeam/field.hpp"
#include "twinbeam/model.hpp"

namespace twinbeam {

enum class OpticsKind { none, far_field_f_f, near_field_2f2f, free_space };

inline std::string to_string(OpticsKind k) {
  switch (k) {
    case OpticsKind::none: return "none";
    case OpticsKind::far_field_f_f: return "far_field_f_f";
    case OpticsKind::near_field_2f2f: return "near_field_2f2f";
    default: return "free_space";
  }
}

/// Optical train between the crystal exit face and the detection plane(s).
/// delta_z images the plane z = l_c - delta_z inside the crystal (virtual
/// free-space back-propagation); delta_y is the signal-minus-idler detector
/// center offset along the walk-off axis.
struct OpticalPath {
  OpticsKind kind = OpticsKind::none;
  double f = 0;            // focal length (m)
  double delta_z = 0;      // imaged-plane depth (m)
  double delta_y = 0;      // relative transverse detector shift (m)
  double free_length = 0;  // free-space distance for kind == free_space (m)

  std::vector<std::string> violations(const CrystalParams& c) const {
    std::vector<std::string> v;
    if ((kind == OpticsKind::far_field_f_f || kind == OpticsKind::near_field_2f2f) && !(f > 0))
      v.push_back("optics: focal length must be > 0 for lens systems");
    if (std::abs(delta_z) > c.l_c)
      v.push_back("optics: |delta_z| must not exceed l_c (imaging a plane inside the crystal)");
    return v;
  }
};

namespace detail {

/// Apply a per-envelope Fourier-space multiplier over the transverse axes.
template <typename F>
void apply_transverse_multiplier(FieldState& s, int env, F&& mul_of_q) {
  const GridSpec& g = s.grid;
  const int ny = s.ny(), nt = s.nt();
  unsigned axes = axis_x | (g.has_y() ? axis_y : 0u);
  auto& fft = FftEngine::instance();
  cplx* a = s.envelopes[env].data();
  fft.transform(a, g.n_x, ny, nt, axes, FFTW_FORWARD);
  const double inv_n = 1.0 / (static_cast<double>(g.n_x) * ny);
  std::size_t n = 0;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < ny; ++j) {
      double qx = 0, qy = 0;
      if (g.has_y()) {
        qx = freq_at(i, g.n_x, g.l_x);
        qy = freq_at(j, ny, g.l_y);
      } else {
        qy = freq_at(i, g.n_x, g.l_x);  // 1-D transverse axis = walk-off axis
      }
      const cplx m = mul_of_q(qx, qy) * inv_n;
      for (int k = 0; k < nt; ++k, ++n) a[n] *= m;
    }
  fft.transform(a, g.n_x, ny, nt, axes, FFTW_BACKWARD);
}

inline void fftshift_transverse(FieldState& s) {
  const GridSpec& g = s.grid;
  const int nx = g.n_x, ny = s.ny(), nt = s.nt();
  for (auto& env : s.envelopes) {
    ComplexVec out(env.size());
    for (int i = 0; i < nx; ++i) {
      int si = (i + nx / 2) % nx;
      for (int j = 0; j < ny; ++j) {
        int sj = g.has_y() ? (j + ny / 2) % ny : j;
        for (int k = 0; k < nt; ++k)
          out[(static_cast<std::size_t>(i) * ny + j) * nt + k] =
              env[(static_cast<std::size_t>(si) * ny + sj) * nt + k];
      }
    }
    env = std::move(out);
  }
}

}  // namespace detail

/// Free-space propagation over a signed distance (negative = back-propagation),
/// exact paraxial Fourier multiplier e^{-i lambda q^2 L / 4 pi} per envelope
/// at its vacuum wavelength.
inline void free_space_propagate(FieldState& s, double length, const CrystalParams& c) {
  if (s.domain != FieldDomain::real_space) throw ConfigError("free_space: state must be in real space");
  for (int e = 0; e < s.n_env(); ++e) {
    const double lambda = (e == 0) ? c.lambda_1 : c.lambda_2;
    detail::apply_transverse_multiplier(s, e, [&](double qx, double qy) {
      return std::exp(cplx(0, -lambda * (qx * qx + qy * qy) * length / (4.0 * pi)));
    });
  }
  s.plane_z += length;
}

/// f-f lens system: unitary Fourier transform of the crystal-exit field with
/// the position mapping x = (lambda f / 2 pi) q. Output cells are shifted so
/// index i sits at x' = (i - n/2) dx'. Lens phase prefactors are omitted;
/// only moduli are measured downstream.
inline FieldState to_far_field(const FieldState& in, const OpticalPath& path,
                               const CrystalParams& c) {
  if (in.domain != FieldDomain::real_space) throw ConfigError("to_far_field: state must be in real space");
  if (path.kind != OpticsKind::far_field_f_f) throw ConfigError("to_far_field: path kind mismatch");
  if (in.n_env() == 2 && std::abs(c.lambda_1 - c.lambda_2) > 1e-12 * c.lambda_1)
    throw ConfigError("to_far_field: non-degenerate wavelengths map arms to different scales; unsupported");

  FieldState out = in;
  const GridSpec& g = in.grid;
  const int ny = out.ny(), nt = out.nt();
  unsigned axes = axis_x | (g.has_y() ? axis_y : 0u);
  const double lambda = c.lambda_1;
  const double scale = lambda * path.f / two_pi;  // q -> x'
  const double dxp = scale * g.dq();

  // Per transverse axis b = DFT(a) * dx / sqrt(2 pi scale), which makes
  // sum |b|^2 dx' = sum |a|^2 dx (lossless kernel).
  double norm = g.dx() / std::sqrt(two_pi * scale);
  if (g.has_y()) norm *= g.dy() / std::sqrt(two_pi * scale);

  auto& fft = FftEngine::instance();
  for (auto& env : out.envelopes) {
    fft.transform(env.data(), g.n_x, ny, nt, axes, FFTW_FORWARD);
    for (auto& a : env) a *= norm;
  }
  detail::fftshift_transverse(out);
  out.grid.l_x = g.n_x * dxp;
  if (g.has_y()) out.grid.l_y = ny * scale * (two_pi / g.l_y);
  out.plane = FieldPlane::far_field;
  out.plane_z = in.plane_z + 2.0 * path.f;
  return out;
}

struct NearFieldArms {
  FieldState signal;
  FieldState idler;
};

/// 2f-2f imaging of the plane z = l_c - delta_z onto the two detection planes
/// after the polarizing beam splitter. Both arms are back-propagated in free
/// space by delta_z; the idler lattice is resampled at the shifted detector
/// positions (exact Fourier phase ramp, delta_y not quantized to the grid).
inline NearFieldArms image_near_field(const FieldState& in, const OpticalPath& path,
                                      const CrystalParams& c) {
  if (path.kind != OpticsKind::near_field_2f2f) throw ConfigError("image_near_field: path kind mismatch");
  if (in.n_env() != 2) throw ConfigError("image_near_field: requires a two-envelope (type II) state");
  if (in.domain != FieldDomain::real_space) throw ConfigError("image_near_field: state must be in real space");

  const GridSpec& g = in.grid;
  const double q_max = pi / g.dx();
  const double dq = g.dq();
  // Quadratic-phase aliasing guard: adjacent-cell phase increment at the band
  // edge must stay below pi.
  if (c.lambda_1 * std::abs(path.delta_z) * q_max * dq / two_pi > pi)
    throw ConfigError("image_near_field: delta_z aliases the quadratic back-propagation phase on this grid");

  FieldState work = in;
  detail::apply_transverse_multiplier(work, 0, [&](double qx, double qy) {
    return std::exp(cplx(0, c.lambda_1 * (qx * qx + qy * qy) * path.delta_z / (4.0 * pi)));
  });
  detail::apply_transverse_multiplier(work, 1, [&](double qx, double qy) {
    // back-propagation plus the idler detector displacement x2 = x1 - delta_y
    // along the walk-off axis: a2 -> a2(x - delta_y) <=> e^{-i q_y delta_y}.
    return std::exp(cplx(0, c.lambda_2 * (qx * qx + qy * qy) * path.delta_z / (4.0 * pi) -
                            qy * path.delta_y));
  });
  work.plane = FieldPlane::near_image;

  NearFieldArms arms;
  arms.signal = FieldState{work.grid, work.plane_z, work.domain, work.plane, {}};
  arms.idler = FieldState{work.grid, work.plane_z, work.domain, work.plane, {}};
  arms.signal.envelopes.push_back(std::move(work.envelopes[0]));
  arms.idler.envelopes.push_back(std::move(work.envelopes[1]));
  return arms;
}

}  // namespace twinbeam

#endif  // TWINBEAM_OPTICS_HPP
