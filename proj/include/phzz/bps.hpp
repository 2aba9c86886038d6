#pragma once

// Bouncy particle sampler on truncated multivariate normals: straight-line
// motion, gradient-reflection bounces driven by an inhomogeneous Poisson
// process with rate max(0, a + b t), specular wall reflections at the
// discrete-data boundaries, and Poisson velocity refreshment.

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "phzz/gaussian_target.hpp"
#include "phzz/random.hpp"
#include "phzz/zigzag.hpp"

namespace phzz {

// First arrival of a Poisson process with rate max(0, a + b t), b >= 0,
// given the exponential variate e = -log(uniform).
inline double bps_bounce_time_from_exponential(double a, double b, double e) {
  if (e < 0.0) throw std::invalid_argument("negative exponential variate");
  if (b <= 0.0) {
    // constant-rate limit
    if (a <= 0.0) return kInf;
    return e / a;
  }
  if (a >= 0.0) {
    // a t + b t^2 / 2 = e
    return (std::sqrt(a * a + 2.0 * b * e) - a) / b;
  }
  // no accumulation before the rate turns positive at t0 = -a/b
  double t0 = -a / b;
  return t0 + std::sqrt(2.0 * e / b);
}

inline double bps_bounce_time(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& v,
                              const GaussianTarget& target,
                              std::mt19937_64& rng) {
  Eigen::VectorXd d = x - target.mean();
  double a = v.dot(target.product(d));
  double b = v.dot(target.product(v));
  std::exponential_distribution<double> ed(1.0);
  return bps_bounce_time_from_exponential(a, b, ed(rng));
}

struct BpsStats {
  long bounces = 0;
  long wall_hits = 0;
  long refreshments = 0;
};

// Simulates BPS for time T and returns the end position. Velocity is
// uniform on the unit sphere of the moving subspace.
inline Eigen::VectorXd bps_kernel(const Eigen::VectorXd& x0,
                                  const GaussianTarget& target,
                                  const FlatConstraints& cons, double T,
                                  double lambda_ref, std::mt19937_64& rng,
                                  BpsStats* stats = nullptr,
                                  Eigen::VectorXd* v_io = nullptr) {
  if (T <= 0.0) throw std::invalid_argument("bps_kernel: T must be > 0");
  if (lambda_ref < 0.0)
    throw std::invalid_argument("bps_kernel: lambda_ref must be >= 0");
  if (!cons.consistent(x0))
    throw std::invalid_argument("bps_kernel: inconsistent initial state");
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(cons.dim);
  double n_free = 0.0;
  for (int i = 0; i < cons.dim; ++i)
    if (cons.is_free_moving(i)) {
      mask[i] = 1.0;
      n_free += 1.0;
    }
  // Sphere radius sqrt(#free dims): matches the l2 speed of a {-1,+1}
  // velocity so equal travel times cover equal distances.
  const double speed = std::sqrt(n_free);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd v;
  if (v_io && v_io->size() == cons.dim)
    v = *v_io;
  else
    v = speed * sphere_vector(mask, rng);

  Eigen::VectorXd phi_x = target.product(x - target.mean());
  Eigen::VectorXd phi_v = target.product(v);
  std::exponential_distribution<double> ed(1.0);

  double remaining = T;
  long events = 0;
  while (remaining > 0.0) {
    double a = v.dot(phi_x);
    double b = v.dot(phi_v);
    double t_bounce = bps_bounce_time_from_exponential(a, b, ed(rng));
    double t_refresh = lambda_ref > 0.0 ? ed(rng) / lambda_ref : kInf;
    Event wb = binary_event_time(x, v, cons);
    Event wc = categorical_event_time(x, v, cons);
    Event wall = wb.time <= wc.time ? wb : wc;

    double t = std::min(std::min(t_bounce, t_refresh),
                        std::min(wall.time, remaining));
    x += t * v;
    phi_x += t * phi_v;
    remaining -= t;
    if (remaining <= 0.0) break;

    if (t == wall.time) {
      if (stats) ++stats->wall_hits;
      if (wall.type == Event::CatOrder) {
        double mid = 0.5 * (x[wall.dim1] + x[wall.dim2]);
        x[wall.dim1] = mid;
        x[wall.dim2] = mid;
        double v1 = v[wall.dim1], v2 = v[wall.dim2];
        target.add_column(phi_v, wall.dim1, v2 - v1);
        target.add_column(phi_v, wall.dim2, v1 - v2);
        v[wall.dim1] = v2;
        v[wall.dim2] = v1;
      } else {
        x[wall.dim1] = 0.0;
        target.add_column(phi_v, wall.dim1, -2.0 * v[wall.dim1]);
        v[wall.dim1] = -v[wall.dim1];
      }
    } else if (t == t_bounce) {
      if (stats) ++stats->bounces;
      Eigen::VectorXd g = phi_x.cwiseProduct(mask);
      double gg = g.squaredNorm();
      if (gg > 0.0) {
        v -= (2.0 * v.dot(g) / gg) * g;
        phi_v = target.product(v);
      }
    } else if (t == t_refresh) {
      if (stats) ++stats->refreshments;
      v = speed * sphere_vector(mask, rng);
      phi_v = target.product(v);
    }
    if (++events > kMaxEventsPerCall)
      throw ZigzagError("bps_kernel: event cap exceeded");
  }
  if (v_io) *v_io = v;
  return x;
}

}  // namespace phzz
