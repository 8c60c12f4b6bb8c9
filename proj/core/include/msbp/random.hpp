#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace msbp {

// Philox4x64-10 block function (Salmon et al., SC'11).
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  __extension__ using u128 = unsigned __int128;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const u128 p0 = static_cast<u128>(kMul0) * ctr[0];
      const u128 p1 = static_cast<u128>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const auto lo0 = static_cast<std::uint64_t>(p0);
      const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
      const auto lo1 = static_cast<std::uint64_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;
};

// Counter-based random stream. The key is (master seed, stream id); the
// counter walks forward from 1, so any (seed, id) pair reproduces the same
// sequence regardless of which thread owns it. Satisfies
// UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : key_{seed, stream_id} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  // Marsaglia polar method; the spare variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::uint64_t seed() const noexcept { return key_[0]; }
  std::uint64_t stream_id() const noexcept { return key_[1]; }
  // Number of 256-bit blocks consumed so far.
  std::uint64_t blocks_used() const noexcept { return counter_[0]; }

 private:
  void refill() noexcept {
    if (++counter_[0] == 0) ++counter_[1];
    block_ = Philox4x64::generate(counter_, key_);
    pos_ = 0;
  }

  Philox4x64::Key key_;
  Philox4x64::Counter counter_{0, 0, 0, 0};
  Philox4x64::Counter block_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids are partitioned by a 16-bit tag in the high bits so that
// different experiment phases never share randomness for the same replicate.
constexpr std::uint64_t stream_id(std::uint16_t tag, std::uint64_t replicate) noexcept {
  return (static_cast<std::uint64_t>(tag) << 48) | (replicate & ((1ULL << 48) - 1));
}

// Walker/Vose alias table over {0, ..., n-1}.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> weights);

  std::size_t sample(RandomStream& rng) const noexcept {
    const double u = rng.uniform() * static_cast<double>(prob_.size());
    auto i = static_cast<std::size_t>(u);
    if (i >= prob_.size()) i = prob_.size() - 1;
    return (u - static_cast<double>(i) < prob_[i]) ? i : alias_[i];
  }

  std::size_t size() const noexcept { return prob_.size(); }
  bool empty() const noexcept { return prob_.empty(); }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

}  // namespace msbp
