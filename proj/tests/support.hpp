#pragma once

#include <Eigen/Dense>

#include <random>

#include "vmiv/dataset.hpp"
#include "vmiv/rng.hpp"

namespace vmiv::testing {

// Random dataset in which every instrument cell appears, with a genuine first
// stage so the complier share is far from zero.
inline Dataset random_full_support(int j, Eigen::Index n, std::uint64_t seed) {
  Engine eng = stream_engine(seed, 0);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset data;
  const Eigen::Index cells = Eigen::Index(1) << j;
  data.y.resize(n);
  data.d.resize(n);
  data.z.resize(n, j);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index cell = i < cells ? i : Eigen::Index(eng() % std::uint64_t(cells));
    int on = 0;
    for (int c = 0; c < j; ++c) {
      data.z(i, c) = double((cell >> c) & 1);
      on += int((cell >> c) & 1);
    }
    const double p = 0.15 + 0.7 * double(on) / double(j);
    data.d(i) = unif(eng) < p ? 1.0 : 0.0;
    data.y(i) = 1.0 + 2.0 * data.d(i) + 0.5 * on + noise(eng);
  }
  return data;
}

}  // namespace vmiv::testing
