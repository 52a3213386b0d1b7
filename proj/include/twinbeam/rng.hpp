#ifndef TWINBEAM_RNG_HPP
#define TWINBEAM_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

#include "twinbeam/core.hpp"

namespace twinbeam {

/// Philox4x32-10 counter-based generator. A stream is addressed by
/// (key = master seed, counter high half = trajectory index), so any
/// trajectory can be regenerated independently of scheduling.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32(std::uint64_t key, std::uint64_t stream) : k0_(static_cast<std::uint32_t>(key)),
                                                        k1_(static_cast<std::uint32_t>(key >> 32)),
                                                        stream_(stream) {}

  /// Raw 128-bit block for counter value n within the stream.
  Block block(std::uint64_t n) const {
    std::uint32_t c0 = static_cast<std::uint32_t>(n);
    std::uint32_t c1 = static_cast<std::uint32_t>(n >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
    std::uint32_t k0 = k0_, k1 = k1_;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c0;
      std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c2;
      std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      std::uint32_t n0 = hi1 ^ c1 ^ k0;
      std::uint32_t n1 = lo1;
      std::uint32_t n2 = hi0 ^ c3 ^ k1;
      std::uint32_t n3 = lo0;
      c0 = n0; c1 = n1; c2 = n2; c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return {c0, c1, c2, c3};
  }

 private:
  std::uint32_t k0_, k1_;
  std::uint64_t stream_;
};

/// Sequential view over a Philox stream yielding uniforms and Gaussians.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : gen_(master_seed, stream_index) {}

  /// Uniform in (0, 1] (never 0, so log() is safe).
  double uniform() {
    std::uint64_t u = next_u64();
    return (static_cast<double>(u >> 11) + 1.0) * 0x1p-53;
  }

  /// Standard circular complex Gaussian: E[re^2] = E[im^2] = 1/2, E[|z|^2] = 1.
  cplx gaussian_pair() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-std::log(u1));  // Box-Muller with variance 1/2 per quadrature
    return cplx(r * std::cos(two_pi * u2), r * std::sin(two_pi * u2));
  }

 private:
  std::uint64_t next_u64() {
    if (phase_ == 0) {
      blk_ = gen_.block(counter_++);
      phase_ = 1;
      return (static_cast<std::uint64_t>(blk_[1]) << 32) | blk_[0];
    }
    phase_ = 0;
    return (static_cast<std::uint64_t>(blk_[3]) << 32) | blk_[2];
  }

  Philox4x32 gen_;
  Philox4x32::Block blk_{};
  std::uint64_t counter_ = 0;
  int phase_ = 0;
};

/// Addresses one trajectory's independent random stream.
struct TrajectorySeed {
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;

  RandomStream stream() const { return RandomStream(master_seed, trajectory_index); }
};

}  // namespace twinbeam

#endif  // TWINBEAM_RNG_HPP
