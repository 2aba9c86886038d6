#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

namespace phzz {

// Potential energy U and its gradient for the Gaussian-momentum block.
struct HamiltonianSystem {
  std::function<double(const Eigen::VectorXd&)> potential;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  int dim = 0;
};

struct LeapfrogResult {
  Eigen::VectorXd theta, p;
  bool divergent = false;  // non-finite gradient or state
};

// Half-kick, drift, half-kick.
inline LeapfrogResult leapfrog(const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& p, double eps,
                               const HamiltonianSystem& sys) {
  if (eps <= 0.0) throw std::invalid_argument("leapfrog: eps must be > 0");
  LeapfrogResult r;
  Eigen::VectorXd g = sys.gradient(theta);
  if (!g.allFinite()) {
    r.theta = theta;
    r.p = p;
    r.divergent = true;
    return r;
  }
  r.p = p - 0.5 * eps * g;
  r.theta = theta + eps * r.p;
  g = sys.gradient(r.theta);
  if (!g.allFinite()) {
    r.divergent = true;
    return r;
  }
  r.p -= 0.5 * eps * g;
  return r;
}

inline double gauss_kinetic(const Eigen::VectorXd& p) {
  return 0.5 * p.squaredNorm();
}

}  // namespace phzz
