#include <doctest.h>

#include <cmath>

#include "mfoc/rng.hpp"

using mfoc::NoisePlan;
using mfoc::Stream;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(mfoc::philox4x32({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(mfoc::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(mfoc::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("draws are pure functions of their address") {
  const NoisePlan noise(42);
  Eigen::VectorXd a(5), b(5);
  noise.gaussian(Stream::brownian, 3, 7, 11, a);
  noise.gaussian(Stream::follower_init, 0, 0, 0, b);  // unrelated draw in between
  noise.gaussian(Stream::brownian, 3, 7, 11, b);
  CHECK(a == b);
  const Eigen::MatrixXd block = noise.brownian_block(5, 3, 10, 11);
  CHECK(block.col(7) == a);
}

TEST_CASE("streams, samples, seeds and runs are distinct") {
  const NoisePlan noise(42);
  Eigen::VectorXd base(4), other(4);
  noise.gaussian(Stream::brownian, 0, 0, 0, base);
  noise.gaussian(Stream::follower_init, 0, 0, 0, other);
  CHECK(base != other);
  noise.gaussian(Stream::brownian, 1, 0, 0, other);
  CHECK(base != other);
  NoisePlan(43).gaussian(Stream::brownian, 0, 0, 0, other);
  CHECK(base != other);
  noise.with_run(1).gaussian(Stream::brownian, 0, 0, 0, other);
  CHECK(base != other);
}

TEST_CASE("common noise shares the Brownian stream across followers") {
  const NoisePlan noise = NoisePlan(9).with_common_noise(true);
  const Eigen::MatrixXd block = noise.brownian_block(2, 0, 6, 4);
  for (Eigen::Index i = 1; i < 6; ++i) CHECK(block.col(i) == block.col(0));
}

TEST_CASE("Gaussian moments") {
  const NoisePlan noise(7);
  Eigen::VectorXd draws(200);
  double sum = 0.0, sq = 0.0, quart = 0.0;
  const int blocks = 500;
  for (int k = 0; k < blocks; ++k) {
    noise.gaussian(Stream::brownian, 0, static_cast<std::uint32_t>(k), 0, draws);
    sum += draws.sum();
    sq += draws.squaredNorm();
    quart += draws.array().pow(4).sum();
  }
  const double n = 200.0 * blocks;
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(quart / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("uniforms live in the open unit interval with mean 1/2") {
  const NoisePlan noise(3);
  double sum = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double u = noise.uniform(Stream::perturbation, 0, static_cast<std::uint32_t>(k), 0);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(noise.uniform(Stream::perturbation, 0, 0, 0, 0) != noise.uniform(Stream::perturbation, 0, 0, 0, 1));
}

TEST_CASE("Gaussian block size limit") {
  Eigen::VectorXd too_long(257);
  CHECK_THROWS(NoisePlan(1).gaussian(Stream::brownian, 0, 0, 0, too_long));
}
