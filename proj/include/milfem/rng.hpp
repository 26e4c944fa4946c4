#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random streams (Philox4x64-10). Every draw is a pure
// function of (seed, path, class, step, index), so paths can be generated
// and re-generated in any order, on any number of workers, with identical
// output.
namespace milfem::rng {

struct Block {
  std::uint64_t x[4];
};

namespace detail {

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                    std::uint64_t& lo) {
  const unsigned __int128 p =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

} // namespace detail

// Philox4x64-10 block cipher (Salmon et al. constants).
inline Block philox4x64(const std::uint64_t ctr[4], std::uint64_t key0,
                        std::uint64_t key1) {
  constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL;

  std::uint64_t x0 = ctr[0], x1 = ctr[1], x2 = ctr[2], x3 = ctr[3];
  std::uint64_t k0 = key0, k1 = key1;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    detail::mulhilo(M0, x0, hi0, lo0);
    detail::mulhilo(M1, x2, hi1, lo1);
    const std::uint64_t y0 = hi1 ^ x1 ^ k0;
    const std::uint64_t y1 = lo1;
    const std::uint64_t y2 = hi0 ^ x3 ^ k1;
    const std::uint64_t y3 = lo0;
    x0 = y0;
    x1 = y1;
    x2 = y2;
    x3 = y3;
    k0 += W0;
    k1 += W1;
  }
  return Block{{x0, x1, x2, x3}};
}

// Map 64 bits to (0,1]; never returns 0, so log() is safe.
inline double to_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
}

// Draw classes separate independent stream families within one path.
enum class DrawClass : std::uint64_t {
  increment = 0,
  levy_fourier = 1,
  oracle_subgrid = 2,
  probe = 3,
};

// Stream of standard normals for one (seed, path) pair.
struct PathStream {
  std::uint64_t seed = 0;
  std::uint64_t path = 0;

  // Four independent N(0,1) draws keyed by (class, step, index).
  void normal4(DrawClass cls, std::uint64_t step, std::uint64_t index,
               double out[4]) const {
    const std::uint64_t ctr[4] = {static_cast<std::uint64_t>(cls), step, index,
                                  0};
    const Block b = philox4x64(ctr, seed, path);
    const double u0 = to_unit(b.x[0]);
    const double u1 = to_unit(b.x[1]);
    const double u2 = to_unit(b.x[2]);
    const double u3 = to_unit(b.x[3]);
    const double r0 = std::sqrt(-2.0 * std::log(u0));
    const double r1 = std::sqrt(-2.0 * std::log(u2));
    constexpr double two_pi = 6.283185307179586476925286766559;
    out[0] = r0 * std::cos(two_pi * u1);
    out[1] = r0 * std::sin(two_pi * u1);
    out[2] = r1 * std::cos(two_pi * u3);
    out[3] = r1 * std::sin(two_pi * u3);
  }

  // Single N(0,1): lane (index % 4) of the block holding this index.
  double normal(DrawClass cls, std::uint64_t step, std::uint64_t index) const {
    double z[4];
    normal4(cls, step, index / 4, z);
    return z[index % 4];
  }

  // Uniform in (0,1] keyed like normal draws.
  double uniform(DrawClass cls, std::uint64_t step, std::uint64_t index) const {
    const std::uint64_t ctr[4] = {static_cast<std::uint64_t>(cls), step,
                                  index / 4, 1};
    const Block b = philox4x64(ctr, seed, path);
    return to_unit(b.x[index % 4]);
  }
};

} // namespace milfem::rng
