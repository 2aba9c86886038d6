#pragma once

// Exact Hamiltonian zigzag dynamics on a truncated multivariate normal.
// Between events positions move linearly with velocity sign(p); events are
// momentum sign changes (gradient events) and bounces off the sign,
// ordering, and positivity walls imposed by discrete observations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "phzz/gaussian_target.hpp"
#include "phzz/random.hpp"
#include "phzz/traits.hpp"

namespace phzz {

inline constexpr std::int64_t kMaxEventsPerCall = 1'000'000;

// Constraint layout for a flattened latent vector. Built once per data set;
// shared read-only by the zigzag and BPS kernels.
struct FlatConstraints {
  struct CatGroup {
    int offset = 0;     // first flat dim of the group
    int width = 0;      // m - 1 slots
    int obs_class = 0;  // observed 0-based class (0 = reference)
  };

  int dim = 0;
  std::vector<LatentRole> role;      // per flat dim
  std::vector<double> fixed_value;   // Fixed dims only
  std::vector<CatGroup> cats;        // observed categorical groups

  bool is_free_moving(int i) const { return role[i] != LatentRole::Fixed; }

  static FlatConstraints unconstrained(int d) {
    FlatConstraints c;
    c.dim = d;
    c.role.assign(d, LatentRole::Free);
    c.fixed_value.assign(d, 0.0);
    c.bin_sign.assign(d, 0);
    return c;
  }

  // All coordinates positive: d binary walls with sign +1.
  static FlatConstraints positive_orthant(int d) {
    FlatConstraints c = unconstrained(d);
    for (auto& r : c.role) r = LatentRole::BinarySign;
    c.bin_sign.assign(d, 1);
    return c;
  }

  static FlatConstraints from_maps(const std::vector<ConstraintMap>& maps) {
    FlatConstraints c;
    for (const auto& m : maps) {
      int base = c.dim;
      for (int i = 0; i < m.dim(); ++i) {
        const LatentDim& d = m[i];
        c.role.push_back(d.role);
        c.bin_sign.push_back(d.sign);
        c.fixed_value.push_back(d.role == LatentRole::Fixed ? d.fixed_value
                                                            : 0.0);
        if (d.role == LatentRole::CategoricalSlot && d.slot == 0) {
          int w = latent_width(m.spec().traits[d.trait]);
          c.cats.push_back({base + i, w, d.obs_class});
        }
      }
      c.dim += m.dim();
    }
    return c;
  }

  std::vector<int> bin_sign;  // BinarySign dims: observed sign

  bool consistent(const Eigen::VectorXd& x, double tol = 0.0) const {
    for (int i = 0; i < dim; ++i) {
      if (role[i] == LatentRole::BinarySign && x[i] * bin_sign[i] < -tol)
        return false;
      if (role[i] == LatentRole::Fixed && x[i] != fixed_value[i]) return false;
    }
    for (const auto& g : cats) {
      if (g.obs_class == 0) {
        for (int s = 0; s < g.width; ++s)
          if (x[g.offset + s] > tol) return false;
      } else {
        int k = g.offset + g.obs_class - 1;
        if (x[k] < -tol) return false;
        for (int s = 0; s < g.width; ++s)
          if (g.offset + s != k && x[g.offset + s] - x[k] > tol) return false;
      }
    }
    return true;
  }
};

struct ZigzagState {
  Eigen::VectorXd x, v, p;        // v entries in {-1,0,+1}, 0 on Fixed dims
  Eigen::VectorXd phi_x, phi_v;   // cached Phi(x - mu), Phi v
  double t_remaining = 0.0;
};

struct Event {
  enum Type { None, Gradient, Binary, CatOrder, CatPositivity };
  Type type = None;
  double time = kInf;
  int dim1 = -1, dim2 = -1;
};

struct EventRecord {
  double time = 0.0;  // absolute flow time within the call
  Event::Type type = Event::None;
  int dim1 = -1, dim2 = -1;
};

// Smallest t > 0 with a t^2 + b t + c = 0, or +inf. Cancellation-safe.
inline double min_positive_root(double a, double b, double c) {
  if (a == 0.0) {
    if (b == 0.0) return kInf;
    double t = -c / b;
    return t > 0.0 ? t : kInf;
  }
  double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  double sq = std::sqrt(disc);
  double qq = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double r1 = qq / a;
  double r2 = (qq == 0.0) ? 0.0 : c / qq;
  double best = kInf;
  if (r1 > 0.0) best = r1;
  if (r2 > 0.0 && r2 < best) best = r2;
  return best;
}

// First sign change of any free momentum coordinate (ties: lowest index).
// Roots at or beyond `horizon` are ignored; callers pass the earliest wall
// event (or the remaining flow time) so most dims need only a cheap
// root-in-interval sign test instead of the full quadratic solve.
inline Event gradient_event_time(const ZigzagState& s,
                                 const FlatConstraints& cons,
                                 double horizon = kInf) {
  Event e;
  e.type = Event::Gradient;
  double tb = horizon;
  for (int i = 0; i < cons.dim; ++i) {
    double vi = s.v[i];
    if (vi == 0.0) continue;  // Fixed dims carry zero velocity
    double a = 0.5 * s.phi_v[i];
    double b = s.phi_x[i];
    double c = -s.p[i];
    if (tb < kInf) {
      // q(t) = a t^2 + b t + c with sign(q(0)) = -sign(v_i); normalizing by
      // v_i gives qn(0) <= 0, so qn crosses zero in (0, tm] iff qn(tm) >= 0,
      // except that a concave qn may also poke above zero strictly inside
      // (vertex -bn/(2 an) in (0, tm) with nonnegative discriminant).
      // tm carries a relative margin so a root within rounding distance of
      // the horizon still reaches the exact solver below. Evaluated
      // branchlessly: the concave-vertex test mispredicts badly as a branch.
      double tm = tb * 1.000000000001;
      double an = vi * a, bn = vi * b;
      double qn = (an * tm + bn) * tm + vi * c;
      bool vertex_inside = (an < 0.0) & (bn > 0.0) & (bn + 2.0 * an * tm < 0.0);
      bool maybe = (qn >= 0.0) | (vertex_inside & (b * b - 4.0 * a * c >= 0.0));
      if (!maybe) continue;
    }
    double t = min_positive_root(a, b, c);
    if (t < e.time && t < tb) {
      e.time = t;
      e.dim1 = i;
      tb = t;
    }
  }
  return e;
}

inline Event binary_event_time(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& v,
                               const FlatConstraints& cons) {
  Event e;
  e.type = Event::Binary;
  for (int i = 0; i < cons.dim; ++i) {
    if (cons.role[i] != LatentRole::BinarySign) continue;
    // x exactly on the wall with inward velocity fires immediately; this
    // happens when a previous call ended on a wall snap.
    bool approaching = x[i] * v[i] < 0.0 ||
                       (x[i] == 0.0 && v[i] * cons.bin_sign[i] < 0.0);
    if (approaching) {
      double t = std::abs(x[i] / v[i]);
      if (t < e.time) {
        e.time = t;
        e.dim1 = i;
      }
    }
  }
  return e;
}

inline Event binary_event_time(const ZigzagState& s,
                               const FlatConstraints& cons) {
  return binary_event_time(s.x, s.v, cons);
}

// Earliest wall hit among the categorical groups: for the reference class
// all slots act as negative sign walls; otherwise ordering walls between
// the observed-max slot and any slot catching up, plus the positivity wall
// on the observed-max slot.
inline Event categorical_event_time(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& v,
                                    const FlatConstraints& cons) {
  Event e;
  for (const auto& g : cons.cats) {
    if (g.obs_class == 0) {
      for (int sl = 0; sl < g.width; ++sl) {
        int i = g.offset + sl;
        // slots live at x <= 0; forbidden side is positive
        if (x[i] * v[i] < 0.0 || (x[i] == 0.0 && v[i] > 0.0)) {
          double t = std::abs(x[i] / v[i]);
          if (t < e.time) {
            e = {Event::CatPositivity, t, i, -1};
          }
        }
      }
    } else {
      int k = g.offset + g.obs_class - 1;
      // ordering walls
      for (int sl = 0; sl < g.width; ++sl) {
        int i = g.offset + sl;
        if (i == k) continue;
        if (v[k] < v[i]) {
          double t = (x[k] - x[i]) / (v[i] - v[k]);
          if (t >= 0.0 && t < e.time) {
            e = {Event::CatOrder, t, k, i};
          }
        }
      }
      // positivity wall on the observed-max slot; forbidden side negative
      if (x[k] * v[k] < 0.0 || (x[k] == 0.0 && v[k] < 0.0)) {
        double t = std::abs(x[k] / v[k]);
        if (t < e.time) {
          e = {Event::CatPositivity, t, k, -1};
        }
      }
    }
  }
  return e;
}

inline Event categorical_event_time(const ZigzagState& s,
                                    const FlatConstraints& cons) {
  return categorical_event_time(s.x, s.v, cons);
}

// Closed-form free flight for duration t (must not cross an event).
inline void advance(ZigzagState& s, double t) {
  if (t < 0.0) throw std::invalid_argument("advance: negative time");
  s.x += t * s.v;
  s.p -= t * s.phi_x + 0.5 * t * t * s.phi_v;
  s.phi_x += t * s.phi_v;
}

// Instantaneous flips at the event, then rank-one refresh of phi_v for
// each flipped dimension.
inline void apply_event(ZigzagState& s, const GaussianTarget& target,
                        const Event& e) {
  auto flip = [&](int i, bool flip_p) {
    s.v[i] = -s.v[i];
    if (flip_p) s.p[i] = -s.p[i];
    target.add_column(s.phi_v, i, 2.0 * s.v[i]);
  };
  switch (e.type) {
    case Event::Gradient:
      s.p[e.dim1] = 0.0;  // exact zero kills root-chatter at the event
      flip(e.dim1, false);
      break;
    case Event::Binary:
    case Event::CatPositivity:
      s.x[e.dim1] = 0.0;
      flip(e.dim1, true);
      break;
    case Event::CatOrder: {
      double mid = 0.5 * (s.x[e.dim1] + s.x[e.dim2]);
      s.x[e.dim1] = mid;
      s.x[e.dim2] = mid;
      flip(e.dim1, true);
      flip(e.dim2, true);
      break;
    }
    default:
      throw std::invalid_argument("apply_event: unknown event type");
  }
}

struct ZigzagError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Simulates the zigzag flow for exactly time T, all event types included.
// Deterministic given inputs. Caches are refreshed exactly on entry.
inline ZigzagState hzz_tmvn(const Eigen::VectorXd& x0,
                            const Eigen::VectorXd& p0,
                            const GaussianTarget& target,
                            const FlatConstraints& cons, double T,
                            std::vector<EventRecord>* log = nullptr) {
  if (T < 0.0) throw std::invalid_argument("hzz_tmvn: negative duration");
  if (!cons.consistent(x0))
    throw ZigzagError("hzz_tmvn: initial state violates constraints");
  ZigzagState s;
  s.x = x0;
  s.p = p0;
  s.v.resize(cons.dim);
  for (int i = 0; i < cons.dim; ++i)
    s.v[i] = cons.is_free_moving(i) ? (p0[i] >= 0.0 ? 1.0 : -1.0) : 0.0;
  s.phi_x = target.product(s.x - target.mean());
  s.phi_v = target.product(s.v);
  s.t_remaining = T;

  std::int64_t events = 0;
  double elapsed = 0.0;
  while (s.t_remaining > 0.0) {
    Event eb = binary_event_time(s, cons);
    Event ec = categorical_event_time(s, cons);
    // boundary beats gradient on exact ties
    Event next = eb;
    if (ec.time < next.time) next = ec;
    Event eg = gradient_event_time(s, cons,
                                   std::min(next.time, s.t_remaining));
    if (eg.time < next.time) next = eg;
    if (next.time >= s.t_remaining) {
      advance(s, s.t_remaining);
      s.t_remaining = 0.0;
      break;
    }
    advance(s, next.time);
    apply_event(s, target, next);
    s.t_remaining -= next.time;
    elapsed += next.time;
    if (log) log->push_back({elapsed, next.type, next.dim1, next.dim2});
    if (++events > kMaxEventsPerCall)
      throw ZigzagError("hzz_tmvn: event cap exceeded (mis-scaled target?)");
  }
  return s;
}

// Total energy on the moving subspace.
inline double zigzag_energy(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                            const GaussianTarget& target,
                            const FlatConstraints& cons) {
  double k = 0.0;
  for (int i = 0; i < cons.dim; ++i)
    if (cons.is_free_moving(i)) k += std::abs(p[i]);
  return k + target.potential(x);
}

struct KernelStats {
  std::int64_t proposals = 0;
  std::int64_t rejections = 0;
  double max_abs_delta_h = 0.0;
};

// One Zigzag-HMC transition: fresh Laplace momentum, exact flow for time T,
// Metropolis correction (a formality for an exact flow, retained so that
// floating-point drift cannot bias the chain).
inline Eigen::VectorXd zigzag_hmc_kernel(const Eigen::VectorXd& x,
                                         const GaussianTarget& target,
                                         const FlatConstraints& cons, double T,
                                         std::mt19937_64& rng,
                                         KernelStats* stats = nullptr) {
  Eigen::VectorXd p = laplace_vector(cons.dim, rng);
  for (int i = 0; i < cons.dim; ++i)
    if (!cons.is_free_moving(i)) p[i] = 0.0;
  double h0 = zigzag_energy(x, p, target, cons);
  ZigzagState s = hzz_tmvn(x, p, target, cons, T);
  double h1 = zigzag_energy(s.x, s.p, target, cons);
  double dh = h1 - h0;
  if (stats) {
    ++stats->proposals;
    stats->max_abs_delta_h = std::max(stats->max_abs_delta_h, std::abs(dh));
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (std::log(u01(rng)) < -dh) return s.x;
  if (stats) ++stats->rejections;
  return x;
}

}  // namespace phzz
