#pragma once

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace phzz {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double draw_laplace(std::mt19937_64& rng) {
  std::exponential_distribution<double> ed(1.0);
  std::bernoulli_distribution coin(0.5);
  double e = ed(rng);
  return coin(rng) ? e : -e;
}

inline Eigen::VectorXd laplace_vector(int d, std::mt19937_64& rng) {
  Eigen::VectorXd p(d);
  for (int i = 0; i < d; ++i) p[i] = draw_laplace(rng);
  return p;
}

inline Eigen::VectorXd std_normal_vector(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd p(d);
  for (int i = 0; i < d; ++i) p[i] = nd(rng);
  return p;
}

// Uniform on the unit sphere restricted to the given coordinate mask.
inline Eigen::VectorXd sphere_vector(const Eigen::VectorXd& mask,
                                     std::mt19937_64& rng) {
  Eigen::VectorXd v = std_normal_vector(static_cast<int>(mask.size()), rng)
                          .cwiseProduct(mask);
  double n = v.norm();
  while (n == 0.0) {
    v = std_normal_vector(static_cast<int>(mask.size()), rng).cwiseProduct(mask);
    n = v.norm();
  }
  return v / n;
}

}  // namespace phzz
