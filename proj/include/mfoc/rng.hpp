#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

namespace mfoc {

/// Philox4x32-10 block cipher (Salmon et al., SC'11): a keyed bijection on
/// 128-bit counters. Every draw is a pure function of (key, counter).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Independent purposes of randomness; part of every counter.
enum class Stream : std::uint32_t {
  brownian = 0,
  follower_init = 1,
  leader_init = 2,
  perturbation = 3,
  start_point = 4,
};

/// Reproducible noise source keyed by (seed, run id). Draws are addressed by
/// (stream, sample id, particle id, step id) and never depend on call order or
/// thread layout.
class NoisePlan {
 public:
  explicit NoisePlan(std::uint64_t seed, std::uint32_t run_id = 0, bool common_noise = false)
      : seed_(seed), run_id_(run_id), common_noise_(common_noise) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint32_t run_id() const noexcept { return run_id_; }
  /// When set, every follower reads the Brownian stream of particle 0.
  bool common_noise() const noexcept { return common_noise_; }

  NoisePlan with_run(std::uint32_t run_id) const { return NoisePlan(seed_, run_id, common_noise_); }
  NoisePlan with_common_noise(bool common) const { return NoisePlan(seed_, run_id_, common); }

  /// Fills `out` with i.i.d. standard normals (Box-Muller on 53-bit uniforms).
  void gaussian(Stream stream, std::uint32_t sample, std::uint32_t particle, std::uint32_t step,
                Eigen::Ref<Eigen::VectorXd> out) const;

  /// Uniform on the open interval (0, 1); `slot` selects among independent draws.
  double uniform(Stream stream, std::uint32_t sample, std::uint32_t particle, std::uint32_t step,
                 std::uint32_t slot = 0) const;

  /// Brownian increments (standard normals) for followers [0, count) at one step.
  Eigen::MatrixXd brownian_block(Eigen::Index dim, std::uint32_t sample, Eigen::Index count,
                                 std::uint32_t step) const;

 private:
  std::array<std::uint32_t, 4> block(Stream stream, std::uint32_t sample, std::uint32_t particle,
                                     std::uint32_t step, std::uint32_t index) const noexcept;

  std::uint64_t seed_;
  std::uint32_t run_id_;
  bool common_noise_;
};

}  // namespace mfoc
