#include "mfoc/rng.hpp"

#include <cmath>
#include <numbers>

#include "mfoc/errors.hpp"

namespace mfoc {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// 53 random bits mapped to the open unit interval.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::array<std::uint32_t, 4> NoisePlan::block(Stream stream, std::uint32_t sample,
                                              std::uint32_t particle, std::uint32_t step,
                                              std::uint32_t index) const noexcept {
  // Word 3: stream (8 bits) | run id (16 bits) | block index (8 bits).
  const std::uint32_t tag = (static_cast<std::uint32_t>(stream) << 24) |
                            ((run_id_ & 0xFFFFu) << 8) | (index & 0xFFu);
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  return philox4x32({step, particle, sample, tag}, key);
}

void NoisePlan::gaussian(Stream stream, std::uint32_t sample, std::uint32_t particle,
                         std::uint32_t step, Eigen::Ref<Eigen::VectorXd> out) const {
  if (out.size() > 256) throw ParameterError("NoisePlan: at most 256 normals per address");
  if (stream == Stream::brownian && common_noise_) particle = 0;
  for (Eigen::Index k = 0; k < out.size(); k += 2) {
    const auto bits = block(stream, sample, particle, step, static_cast<std::uint32_t>(k / 2));
    const double u1 = to_unit(bits[0], bits[1]);
    const double u2 = to_unit(bits[2], bits[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out(k) = radius * std::cos(angle);
    if (k + 1 < out.size()) out(k + 1) = radius * std::sin(angle);
  }
}

double NoisePlan::uniform(Stream stream, std::uint32_t sample, std::uint32_t particle,
                          std::uint32_t step, std::uint32_t slot) const {
  // Slots live above the Gaussian block range so they never collide with it.
  const auto bits = block(stream, sample, particle, step, 0x80u | (slot >> 1));
  return (slot & 1u) ? to_unit(bits[2], bits[3]) : to_unit(bits[0], bits[1]);
}

Eigen::MatrixXd NoisePlan::brownian_block(Eigen::Index dim, std::uint32_t sample,
                                          Eigen::Index count, std::uint32_t step) const {
  Eigen::MatrixXd xi(dim, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    gaussian(Stream::brownian, sample, static_cast<std::uint32_t>(i), step, xi.col(i));
  }
  return xi;
}

}  // namespace mfoc
