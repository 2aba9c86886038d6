#pragma once

// No-U-Turn sampler: recursive doubling with slice-based state selection
// (multinomial weighting available behind a flag). The tree builder is
// generic over the phase-space state so the mixed-momentum sampler can
// reuse it with a different integrator and U-turn rule.

#include <cmath>
#include <optional>
#include <random>

#include <Eigen/Dense>

#include "phzz/leapfrog.hpp"
#include "phzz/random.hpp"

namespace phzz {

enum class NutsVariant { Slice, Multinomial };

inline constexpr double kDivergenceThreshold = 1000.0;

struct NutsStats {
  long transitions = 0;
  long divergences = 0;
  long max_depth_hits = 0;
  double accept_stat_sum = 0.0;  // mean leapfrog acceptance statistic
  long tree_depth_sum = 0;

  double last_accept_stat = 0.0;
  int last_depth = 0;
};

namespace detail {

// State must be copyable. Ops requirements:
//   State step(const State&, int dir)   one integrator unit, dir = +/-1
//   double energy(const State&)
//   bool uturn(const State& minus, const State& plus)
template <class State, class Ops>
struct NutsTree {
  State minus, plus, sample;
  double weight = 0.0;  // slice: leaf count; multinomial: sum exp(H0 - H)
  bool valid = true;
  double alpha_sum = 0.0;
  long n_alpha = 0;
};

template <class State, class Ops>
NutsTree<State, Ops> nuts_build_tree(const State& from, int dir, int depth,
                                     double log_u, double h0, Ops& ops,
                                     NutsVariant variant, std::mt19937_64& rng,
                                     NutsStats* stats) {
  if (depth == 0) {
    NutsTree<State, Ops> t;
    State s2 = ops.step(from, dir);
    double h = ops.energy(s2);
    double log_w = h0 - h;  // log importance weight of the leaf
    if (!std::isfinite(h)) {
      t.valid = false;
      log_w = -kInf;
      if (stats) ++stats->divergences;
    } else if (log_u - log_w > kDivergenceThreshold) {
      t.valid = false;
      if (stats) ++stats->divergences;
    }
    t.minus = s2;
    t.plus = s2;
    t.sample = s2;
    if (variant == NutsVariant::Slice)
      t.weight = (t.valid && log_u <= log_w) ? 1.0 : 0.0;
    else
      t.weight = t.valid ? std::exp(log_w) : 0.0;
    t.alpha_sum = std::isfinite(h) ? std::min(1.0, std::exp(log_w)) : 0.0;
    t.n_alpha = 1;
    return t;
  }
  NutsTree<State, Ops> t1 = nuts_build_tree<State, Ops>(
      from, dir, depth - 1, log_u, h0, ops, variant, rng, stats);
  if (!t1.valid) return t1;
  NutsTree<State, Ops> t2 = nuts_build_tree<State, Ops>(
      dir > 0 ? t1.plus : t1.minus, dir, depth - 1, log_u, h0, ops, variant,
      rng, stats);
  NutsTree<State, Ops> t;
  t.minus = dir > 0 ? t1.minus : t2.minus;
  t.plus = dir > 0 ? t2.plus : t1.plus;
  double total = t1.weight + t2.weight;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  t.sample = (total > 0.0 && u01(rng) < t2.weight / total) ? t2.sample
                                                           : t1.sample;
  t.weight = total;
  t.valid = t1.valid && t2.valid && !ops.uturn(t.minus, t.plus);
  t.alpha_sum = t1.alpha_sum + t2.alpha_sum;
  t.n_alpha = t1.n_alpha + t2.n_alpha;
  return t;
}

template <class State, class Ops>
State nuts_transition(const State& init, Ops& ops, NutsVariant variant,
                      int max_depth, std::mt19937_64& rng, NutsStats* stats) {
  double h0 = ops.energy(init);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // slice variable relative to the initial energy
  double log_u = std::log(u01(rng));
  State minus = init, plus = init, sample = init;
  double weight = (variant == NutsVariant::Slice) ? 1.0 : 1.0;
  bool going = true;
  int depth = 0;
  double alpha_sum = 0.0;
  long n_alpha = 0;
  while (going && depth < max_depth) {
    int dir = u01(rng) < 0.5 ? -1 : 1;
    NutsTree<State, Ops> t = nuts_build_tree<State, Ops>(
        dir > 0 ? plus : minus, dir, depth, log_u, h0, ops, variant, rng,
        stats);
    if (t.valid && t.weight > 0.0) {
      double pr = (variant == NutsVariant::Slice)
                      ? std::min(1.0, t.weight / weight)
                      : std::min(1.0, t.weight / weight);
      if (u01(rng) < pr) sample = t.sample;
    }
    if (dir > 0)
      plus = t.plus;
    else
      minus = t.minus;
    weight += t.weight;
    alpha_sum += t.alpha_sum;
    n_alpha += t.n_alpha;
    going = t.valid && !ops.uturn(minus, plus);
    ++depth;
  }
  if (stats) {
    ++stats->transitions;
    if (depth >= max_depth && going) ++stats->max_depth_hits;
    stats->last_accept_stat = n_alpha > 0 ? alpha_sum / double(n_alpha) : 0.0;
    stats->accept_stat_sum += stats->last_accept_stat;
    stats->last_depth = depth;
    stats->tree_depth_sum += depth;
  }
  return sample;
}

}  // namespace detail

// One NUTS transition for a plain Gaussian-momentum system.
inline Eigen::VectorXd nuts_kernel(const Eigen::VectorXd& theta,
                                   const HamiltonianSystem& sys, double eps,
                                   std::mt19937_64& rng, int max_depth = 10,
                                   NutsStats* stats = nullptr,
                                   NutsVariant variant = NutsVariant::Slice) {
  struct PhaseState {
    Eigen::VectorXd theta, p;
  };
  struct Ops {
    const HamiltonianSystem* sys;
    double eps;
    PhaseState step(const PhaseState& s, int dir) const {
      // backward integration = integrate with negated momentum
      Eigen::VectorXd p = dir > 0 ? s.p : (-s.p).eval();
      LeapfrogResult r = leapfrog(s.theta, p, eps, *sys);
      if (r.divergent)
        return {s.theta,
                Eigen::VectorXd::Constant(s.p.size(),
                                          std::numeric_limits<double>::quiet_NaN())};
      return {r.theta, dir > 0 ? r.p : (-r.p).eval()};
    }
    double energy(const PhaseState& s) const {
      if (!s.p.allFinite()) return kInf;
      return sys->potential(s.theta) + gauss_kinetic(s.p);
    }
    bool uturn(const PhaseState& minus, const PhaseState& plus) const {
      Eigen::VectorXd d = plus.theta - minus.theta;
      return d.dot(minus.p) < 0.0 || d.dot(plus.p) < 0.0;
    }
  };
  Ops ops{&sys, eps};
  PhaseState init{theta, std_normal_vector(sys.dim, rng)};
  PhaseState out = detail::nuts_transition<PhaseState, Ops>(
      init, ops, variant, max_depth, rng, stats);
  return out.theta;
}

}  // namespace phzz
