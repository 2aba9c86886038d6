#pragma once

// Joint update of Laplace-momentum latents and Gaussian-momentum
// covariance parameters via symmetric differential-operator splitting:
// leapfrog(theta; eps) -> exact zigzag(x; rs*eps) -> leapfrog(theta; eps),
// Metropolis-corrected, with a NUTS wrapper over whole LG steps.

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "phzz/gaussian_target.hpp"
#include "phzz/leapfrog.hpp"
#include "phzz/nuts.hpp"
#include "phzz/posterior.hpp"
#include "phzz/random.hpp"
#include "phzz/zigzag.hpp"

namespace phzz {

// Joint target over (theta_G, x_L). The x_L-dependence of the potential
// must coincide with the quadratic of laplace_target(theta), so that the
// zigzag leg integrates the correct conditional dynamics.
class JointSystem {
 public:
  virtual ~JointSystem() = default;
  virtual int gauss_dim() const = 0;
  virtual int laplace_dim() const = 0;
  virtual double potential(const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd grad_gauss(const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& x) const = 0;
  virtual std::unique_ptr<GaussianTarget> laplace_target(
      const Eigen::VectorXd& theta) const = 0;
  virtual const FlatConstraints& constraints() const = 0;
};

class PosteriorJointSystem final : public JointSystem {
 public:
  explicit PosteriorJointSystem(const PosteriorModel& model) : model_(&model) {}
  int gauss_dim() const override { return model_->theta_dim(); }
  int laplace_dim() const override { return model_->latent_dim(); }
  double potential(const Eigen::VectorXd& theta,
                   const Eigen::VectorXd& x) const override {
    return -model_->log_posterior(theta, x);
  }
  Eigen::VectorXd grad_gauss(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& x) const override {
    return -model_->grad_theta(theta, x);
  }
  std::unique_ptr<GaussianTarget> laplace_target(
      const Eigen::VectorXd& theta) const override {
    return std::make_unique<KroneckerPhyloTarget>(model_->latent_target(theta));
  }
  const FlatConstraints& constraints() const override {
    return model_->constraints();
  }

 private:
  const PosteriorModel* model_;
};

struct SplitState {
  Eigen::VectorXd theta, p_g;  // Gaussian-momentum block
  Eigen::VectorXd x, p_l;      // Laplace-momentum block
  bool divergent = false;
};

inline double split_energy(const SplitState& s, const JointSystem& js) {
  if (s.divergent) return kInf;
  double u = js.potential(s.theta, s.x);
  if (!std::isfinite(u)) return kInf;
  double kl = 0.0;
  const FlatConstraints& cons = js.constraints();
  for (int i = 0; i < js.laplace_dim(); ++i)
    if (cons.is_free_moving(i)) kl += std::abs(s.p_l[i]);
  return u + gauss_kinetic(s.p_g) + kl;
}

// One symmetric LG step covering joint time 2*eps (zigzag leg rs*eps).
inline SplitState lg_step(const SplitState& s, const JointSystem& js,
                          double eps, double rs) {
  SplitState r = s;
  if (r.divergent) return r;
  auto leap = [&]() {
    HamiltonianSystem sys;
    sys.dim = js.gauss_dim();
    sys.gradient = [&](const Eigen::VectorXd& th) {
      return js.grad_gauss(th, r.x);
    };
    sys.potential = [](const Eigen::VectorXd&) { return 0.0; };
    LeapfrogResult lf = leapfrog(r.theta, r.p_g, eps, sys);
    if (lf.divergent) {
      r.divergent = true;
      return;
    }
    r.theta = lf.theta;
    r.p_g = lf.p;
  };
  if (js.gauss_dim() > 0) leap();
  if (r.divergent) return r;
  double t = rs * eps;
  if (js.laplace_dim() > 0 && t > 0.0) {
    // a failed target build or a pathological trajectory is a divergence,
    // not a fatal error: the proposal is simply rejected
    try {
      std::unique_ptr<GaussianTarget> target = js.laplace_target(r.theta);
      ZigzagState zs = hzz_tmvn(r.x, r.p_l, *target, js.constraints(), t);
      r.x = zs.x;
      r.p_l = zs.p;
    } catch (const std::runtime_error&) {
      r.divergent = true;
      return r;
    }
  }
  if (js.gauss_dim() > 0) leap();
  return r;
}

struct LgStats {
  long proposals = 0;
  long rejections = 0;
  long divergences = 0;
  double last_accept_stat = 0.0;
};

inline SplitState draw_momenta(SplitState s, const JointSystem& js,
                               std::mt19937_64& rng) {
  s.p_g = std_normal_vector(js.gauss_dim(), rng);
  s.p_l = laplace_vector(js.laplace_dim(), rng);
  const FlatConstraints& cons = js.constraints();
  for (int i = 0; i < js.laplace_dim(); ++i)
    if (!cons.is_free_moving(i)) s.p_l[i] = 0.0;
  s.divergent = false;
  return s;
}

// One LG-HMC iteration: fresh momenta, lstep LG steps, Metropolis test.
inline SplitState lg_hmc_kernel(const SplitState& init, const JointSystem& js,
                                double eps, double rs, int lstep,
                                std::mt19937_64& rng,
                                LgStats* stats = nullptr) {
  if (lstep < 1) throw std::invalid_argument("lg_hmc_kernel: lstep >= 1");
  SplitState start = draw_momenta(init, js, rng);
  double h0 = split_energy(start, js);
  SplitState s = start;
  for (int i = 0; i < lstep && !s.divergent; ++i) s = lg_step(s, js, eps, rs);
  double h1 = split_energy(s, js);
  double accept = std::isfinite(h1) ? std::min(1.0, std::exp(h0 - h1)) : 0.0;
  if (stats) {
    ++stats->proposals;
    stats->last_accept_stat = accept;
    if (!std::isfinite(h1)) ++stats->divergences;
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < accept) return s;
  if (stats) ++stats->rejections;
  return start;
}

// NUTS over LG steps. The U-turn rule uses the concatenated position
// displacement against (p_G, sign(p_L)) since the Laplace block's velocity
// is the sign of its momentum.
inline SplitState lg_nuts_kernel(const SplitState& init, const JointSystem& js,
                                 double eps, double rs, std::mt19937_64& rng,
                                 int max_depth = 10,
                                 NutsStats* stats = nullptr,
                                 NutsVariant variant = NutsVariant::Slice) {
  struct Ops {
    const JointSystem* js;
    double eps, rs;
    SplitState step(const SplitState& s, int dir) const {
      if (dir > 0) return lg_step(s, *js, eps, rs);
      SplitState r = s;
      r.p_g = -r.p_g;
      r.p_l = -r.p_l;
      r = lg_step(r, *js, eps, rs);
      r.p_g = -r.p_g;
      r.p_l = -r.p_l;
      return r;
    }
    double energy(const SplitState& s) const { return split_energy(s, *js); }
    bool uturn(const SplitState& minus, const SplitState& plus) const {
      Eigen::VectorXd dt = plus.theta - minus.theta;
      Eigen::VectorXd dx = plus.x - minus.x;
      const FlatConstraints& cons = js->constraints();
      auto proj = [&](const SplitState& s) {
        double v = dt.dot(s.p_g);
        for (int i = 0; i < js->laplace_dim(); ++i)
          if (cons.is_free_moving(i))
            v += dx[i] * (s.p_l[i] >= 0.0 ? 1.0 : -1.0);
        return v;
      };
      return proj(minus) < 0.0 || proj(plus) < 0.0;
    }
  };
  Ops ops{&js, eps, rs};
  SplitState start = draw_momenta(init, js, rng);
  return detail::nuts_transition<SplitState, Ops>(start, ops, variant,
                                                  max_depth, rng, stats);
}

// Appendix-style step-size-ratio heuristic: sqrt of the ratio of minimal
// eigenvalues of the two blocks' covariance estimates.
inline double tune_rs(const Eigen::MatrixXd& sigma_g,
                      const Eigen::MatrixXd& sigma_l) {
  auto lambda_min = [](const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite())
      throw std::invalid_argument("tune_rs: defective covariance estimate");
    Eigen::MatrixXd reg =
        0.5 * (m + m.transpose()) +
        1e-10 * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reg,
                                                      Eigen::EigenvaluesOnly);
    double l = es.eigenvalues().minCoeff();
    if (!(l > 0.0))
      throw std::invalid_argument("tune_rs: covariance not positive definite");
    return l;
  };
  return std::sqrt(lambda_min(sigma_l) / lambda_min(sigma_g));
}

// Monte-Carlo mean travel speed E|<v, u>| along a random unit direction
// for a uniform {-1,+1}^d velocity; the Gaussian analogue is sqrt(2/pi).
inline double mean_speed_laplace(int d, long n_mc, std::mt19937_64& rng) {
  if (d < 1) throw std::invalid_argument("mean_speed_laplace: d >= 1");
  std::bernoulli_distribution coin(0.5);
  double acc = 0.0;
  for (long it = 0; it < n_mc; ++it) {
    Eigen::VectorXd u = std_normal_vector(d, rng);
    u /= u.norm();
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += (coin(rng) ? 1.0 : -1.0) * u[i];
    acc += std::abs(dot);
  }
  return acc / double(n_mc);
}

inline double mean_speed_gauss(int d, long n_mc, std::mt19937_64& rng) {
  if (d < 1) throw std::invalid_argument("mean_speed_gauss: d >= 1");
  double acc = 0.0;
  for (long it = 0; it < n_mc; ++it) {
    Eigen::VectorXd u = std_normal_vector(d, rng);
    u /= u.norm();
    acc += std::abs(std_normal_vector(d, rng).dot(u));
  }
  return acc / double(n_mc);
}

}  // namespace phzz
