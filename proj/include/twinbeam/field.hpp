#ifndef TWINBEAM_FIELD_HPP
#define TWINBEAM_FIELD_HPP

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "twinbeam/core.hpp"
#include "twinbeam/fft.hpp"
#include "twinbeam/model.hpp"

namespace twinbeam {

enum class FieldDomain { real_space, fourier_space };
enum class FieldPlane { crystal, far_field, near_image };

/// Real-space cell coordinate, window centered on the origin.
inline double coord_at(int i, int n, double step) { return (i - n / 2) * step; }

/// Signed lattice index in standard FFT order.
inline int fft_wrap(int i, int n) { return i <= n / 2 ? i : i - n; }

/// Spatial frequency of Fourier cell i: q = 2*pi*wrap(i)/L.
inline double freq_at(int i, int n, double window) { return two_pi * fft_wrap(i, n) / window; }

/// Temporal frequency of Fourier cell j. The transform convention carries
/// e^{+i Omega t}, i.e. a forward FFT along t indexes -Omega, hence the sign.
inline double omega_at(int j, int n, double t_win) { return -two_pi * fft_wrap(j, n) / t_win; }

/// Complex signal/idler envelopes sampled on a space-time lattice at plane z.
/// Type II carries two envelopes (signal, idler); degenerate type I one.
/// In x_t mode the single transverse axis is the walk-off (y) direction.
struct FieldState {
  GridSpec grid;
  double plane_z = 0;
  FieldDomain domain = FieldDomain::real_space;
  FieldPlane plane = FieldPlane::crystal;
  std::vector<ComplexVec> envelopes;

  static FieldState zero(const GridSpec& g, int n_envelopes) {
    FieldState s;
    s.grid = g;
    s.envelopes.assign(n_envelopes, ComplexVec(g.n_cells(), cplx(0, 0)));
    return s;
  }

  int n_env() const { return static_cast<int>(envelopes.size()); }
  int ny() const { return grid.has_y() ? grid.n_y : 1; }
  int nt() const { return grid.has_t() ? grid.n_t : 1; }
  std::size_t idx(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * ny() + j) * nt() + k;
  }

  /// Unitary-pair normalization: multiplying the raw transforms by these
  /// constants makes sum |a|^2 dV invariant between the two domains.
  double forward_scale() const {
    double d = grid.dx();
    double norm = std::sqrt(two_pi);
    if (grid.has_y()) { d *= grid.dy(); norm *= std::sqrt(two_pi); }
    if (grid.has_t()) { d *= grid.dt(); norm *= std::sqrt(two_pi); }
    return d / norm;
  }

  void to_fourier() {
    if (domain == FieldDomain::fourier_space) return;
    unsigned axes = axis_x | (grid.has_y() ? axis_y : 0u) | (grid.has_t() ? axis_t : 0u);
    double c = forward_scale();
    for (auto& env : envelopes) {
      FftEngine::instance().transform(env.data(), grid.n_x, ny(), nt(), axes, FFTW_FORWARD);
      for (auto& a : env) a *= c;
    }
    domain = FieldDomain::fourier_space;
  }

  void to_real() {
    if (domain == FieldDomain::real_space) return;
    unsigned axes = axis_x | (grid.has_y() ? axis_y : 0u) | (grid.has_t() ? axis_t : 0u);
    double c = 1.0 / (forward_scale() * static_cast<double>(grid.n_cells()));
    for (auto& env : envelopes) {
      FftEngine::instance().transform(env.data(), grid.n_x, ny(), nt(), axes, FFTW_BACKWARD);
      for (auto& a : env) a *= c;
    }
    domain = FieldDomain::real_space;
  }

  /// sum |a|^2 * cell_volume per envelope (photon-count-like quantity).
  double norm_sum(int env) const {
    double s = 0;
    for (const auto& a : envelopes[env]) s += std::norm(a);
    double dv = domain == FieldDomain::real_space
                    ? grid.cell_volume()
                    : grid.dq() * (grid.has_y() ? two_pi / grid.l_y : 1.0) * (grid.has_t() ? grid.domega() : 1.0);
    return s * dv;
  }

  bool finite() const {
    for (const auto& env : envelopes)
      for (const auto& a : env)
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) return false;
    return true;
  }
};

/// Raw lattice dump: text header terminated by a blank line, then the cells
/// of each envelope as little-endian complex<double> in row-major order.
inline void dump_field(const FieldState& s, const std::string& path,
                       std::uint64_t master_seed = 0, std::uint64_t trajectory_index = 0) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open field dump path: " + path);
  f << "twinbeam-field 1\n";
  f << "dims " << to_string(s.grid.dims) << "\n";
  f << "n_x " << s.grid.n_x << "\nn_y " << s.ny() << "\nn_t " << s.nt() << "\n";
  f << "l_x " << s.grid.l_x << "\nl_y " << s.grid.l_y << "\nt_win " << s.grid.t_win << "\n";
  f << "plane_z " << s.plane_z << "\n";
  f << "domain " << (s.domain == FieldDomain::real_space ? "real" : "fourier") << "\n";
  f << "envelopes " << s.n_env() << "\n";
  f << "dtype complex128\nendianness little\n";
  f << "master_seed " << master_seed << "\ntrajectory_index " << trajectory_index << "\n\n";
  for (const auto& env : s.envelopes)
    f.write(reinterpret_cast<const char*>(env.data()),
            static_cast<std::streamsize>(env.size() * sizeof(cplx)));
  if (!f) throw NumericalError("field dump write failed: " + path);
}

inline FieldState load_field(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open field dump: " + path);
  std::string magic, version;
  f >> magic >> version;
  if (magic != "twinbeam-field") throw ConfigError("not a twinbeam field dump: " + path);
  FieldState s;
  int n_env = 0;
  std::string key;
  while (f >> key) {
    if (key == "dims") {
      std::string v; f >> v;
      s.grid.dims = v == "x_t" ? GridDims::x_t : (v == "xy" ? GridDims::xy : GridDims::xy_t);
    } else if (key == "n_x") f >> s.grid.n_x;
    else if (key == "n_y") f >> s.grid.n_y;
    else if (key == "n_t") f >> s.grid.n_t;
    else if (key == "l_x") f >> s.grid.l_x;
    else if (key == "l_y") f >> s.grid.l_y;
    else if (key == "t_win") f >> s.grid.t_win;
    else if (key == "plane_z") f >> s.plane_z;
    else if (key == "domain") {
      std::string v; f >> v;
      s.domain = v == "real" ? FieldDomain::real_space : FieldDomain::fourier_space;
    } else if (key == "envelopes") f >> n_env;
    else { std::string v; f >> v; }
    if (key == "trajectory_index") break;
  }
  f.ignore(2, '\n');
  f.ignore(1, '\n');
  s.envelopes.assign(n_env, ComplexVec(s.grid.n_cells()));
  for (auto& env : s.envelopes)
    f.read(reinterpret_cast<char*>(env.data()), static_cast<std::streamsize>(env.size() * sizeof(cplx)));
  if (!f) throw ConfigError("truncated field dump: " + path);
  return s;
}

}  // namespace twinbeam

#endif  // TWINBEAM_FIELD_HPP
