#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace liouville {

// Philox4x32-10 (Salmon et al.): counter-based, so any (seed, sample, index) triple
// maps to the same numbers regardless of evaluation order or worker count.
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox(std::uint64_t seed) : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Block operator()(Block ctr) const {
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int r = 0; r < 10; ++r) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  std::array<std::uint32_t, 2> key_;
};

// Stream of standard normals for one (sample, stream) pair; index n picks the n-th pair.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t sample, std::uint32_t stream)
      : gen_(seed), sample_(sample), stream_(stream) {}

  // Two independent N(0,1) values for block `index`.
  std::array<double, 2> pair(std::uint64_t index) const {
    const Philox::Block out = gen_({static_cast<std::uint32_t>(index),
                                    static_cast<std::uint32_t>(index >> 32) ^ (stream_ << 16),
                                    static_cast<std::uint32_t>(sample_), static_cast<std::uint32_t>(sample_ >> 32)});
    const double u1 = to_unit(out[0], out[1]);
    const double u2 = to_unit(out[2], out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(t), r * std::sin(t)};
  }

  // Fill n normals starting at block offset `first_block`.
  template <class Out>
  void fill(Out* dst, std::size_t n, std::uint64_t first_block = 0) const {
    std::size_t i = 0;
    for (std::uint64_t b = first_block; i < n; ++b) {
      const auto p = pair(b);
      dst[i++] = static_cast<Out>(p[0]);
      if (i < n) dst[i++] = static_cast<Out>(p[1]);
    }
  }

 private:
  // (0,1], 53 bits
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t v = (std::uint64_t{hi} << 21) ^ (lo >> 11);
    return (static_cast<double>(v & ((std::uint64_t{1} << 53) - 1)) + 1.0) * 0x1.0p-53;
  }

  Philox gen_;
  std::uint64_t sample_;
  std::uint32_t stream_;
};

// splitmix64 finalizer of base + i * golden; a bijection in i for fixed base.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + index * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace liouville
