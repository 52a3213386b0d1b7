#ifndef TWINBEAM_FFT_HPP
#define TWINBEAM_FFT_HPP

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "twinbeam/core.hpp"

namespace twinbeam {

/// Axis selection for transforms of a row-major [x][y][t] lattice.
enum : unsigned { axis_x = 1u, axis_y = 2u, axis_t = 4u, axis_all = 7u };

/// Process-wide cache of in-place FFTW plans. Plans are created with
/// FFTW_ESTIMATE so repeated runs use identical algorithms (bitwise
/// reproducible results); creation is serialized, execution via
/// fftw_execute_dft is safe from concurrent threads on distinct arrays.
class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine e;
    return e;
  }

  /// In-place c2c transform along the selected axes. sign: FFTW_FORWARD (-1)
  /// or FFTW_BACKWARD (+1). No normalization is applied.
  void transform(cplx* data, int nx, int ny, int nt, unsigned axes, int sign) {
    fftw_plan p = plan_for(nx, ny, nt, axes, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data), reinterpret_cast<fftw_complex*>(data));
  }

  FftEngine(const FftEngine&) = delete;
  FftEngine& operator=(const FftEngine&) = delete;

 private:
  FftEngine() = default;
  ~FftEngine() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

  using Key = std::tuple<int, int, int, unsigned, int>;

  fftw_plan plan_for(int nx, int ny, int nt, unsigned axes, int sign) {
    Key key{nx, ny, nt, axes, sign};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;

    ComplexVec scratch(static_cast<std::size_t>(nx) * ny * nt);
    const int n[3] = {nx, ny, nt};
    const int stride[3] = {ny * nt, nt, 1};
    fftw_iodim dims[3], loop[3];
    int rank = 0, lrank = 0;
    for (int a = 0; a < 3; ++a) {
      if (axes & (1u << a)) {
        dims[rank].n = n[a];
        dims[rank].is = dims[rank].os = stride[a];
        ++rank;
      } else {
        loop[lrank].n = n[a];
        loop[lrank].is = loop[lrank].os = stride[a];
        ++lrank;
      }
    }
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_guru_dft(rank, dims, lrank, loop, buf, buf, sign, FFTW_ESTIMATE);
    if (!p) throw NumericalError("fftw_plan_guru_dft failed");
    plans_.emplace(key, p);
    return p;
  }

  std::mutex mu_;
  std::map<Key, fftw_plan> plans_;
};

}  // namespace twinbeam

#endif  // TWINBEAM_FFT_HPP
