#pragma once

// Per-chain MCMC driver. JOINT mode applies one LG-NUTS (or LG-HMC) update
// of {X, R, D} per iteration; ALTERNATE mode reproduces the random-scan
// comparison arms (zigzag or BPS on X, NUTS on the covariance block).
// Warmup adapts the step size by dual averaging and the step-size ratio
// from trailing marginal variances, then freezes both.

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "phzz/bps.hpp"
#include "phzz/dual_averaging.hpp"
#include "phzz/lg_joint.hpp"
#include "phzz/nuts.hpp"
#include "phzz/posterior.hpp"
#include "phzz/zigzag.hpp"

namespace phzz {

struct ChainRecord {
  long iteration = 0;
  Eigen::VectorXd r_upper;  // R(i,j) for i<j, row-major pair order
  Eigen::VectorXd d_free;
  double log_density = 0.0;
  double accept_stat = 0.0;
  double seconds = 0.0;
  Eigen::VectorXd x;  // latents, only when requested
};

struct TuningReport {
  double adapted_eps = 0.0;
  std::vector<double> rs_trajectory;
  long divergences = 0;
  double avg_tree_depth = 0.0;
  long iterations = 0;
};

using RecordSink = std::function<void(const ChainRecord&)>;

// Standard-normal draw forced onto the constraint set by coordinate-wise
// reflection; landings are nudged off the walls.
inline Eigen::VectorXd initial_latents(const FlatConstraints& cons,
                                       std::mt19937_64& rng) {
  const double nudge = 1e-8;
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(cons.dim);
  for (int i = 0; i < cons.dim; ++i) x[i] = nd(rng);
  for (int i = 0; i < cons.dim; ++i) {
    switch (cons.role[i]) {
      case LatentRole::Fixed:
        x[i] = cons.fixed_value[i];
        break;
      case LatentRole::BinarySign:
        x[i] = cons.bin_sign[i] * (std::abs(x[i]) + nudge);
        break;
      default:
        break;
    }
  }
  for (const auto& g : cons.cats) {
    if (g.obs_class == 0) {
      for (int s = 0; s < g.width; ++s) {
        int i = g.offset + s;
        x[i] = -(std::abs(x[i]) + nudge);
      }
    } else {
      int k = g.offset + g.obs_class - 1;
      double top = std::abs(x[k]) + nudge;
      x[k] = top;
      for (int s = 0; s < g.width; ++s) {
        int i = g.offset + s;
        if (i == k) continue;
        x[i] = top - std::abs(x[i]) - nudge;
      }
    }
  }
  return x;
}

inline Eigen::VectorXd initial_theta(const PosteriorModel& model) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(model.theta_dim());
  // free D entries at the prior median
  for (int k = cpc_dim(model.q()); k < model.theta_dim(); ++k)
    theta[k] = model.config().d_log_location;
  return theta;
}

inline Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& R) {
  int q = static_cast<int>(R.rows());
  Eigen::VectorXd out(q * (q - 1) / 2);
  int k = 0;
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) out[k++] = R(i, j);
  return out;
}

inline Eigen::MatrixXd diag_cov(const std::deque<Eigen::VectorXd>& hist);
inline Eigen::MatrixXd diag_cov_moving(const std::deque<Eigen::VectorXd>& hist,
                                       const PosteriorModel& model);

// Runs one chain and streams post-burn-in records to the sink.
inline TuningReport run_chain(const PosteriorModel& model,
                              std::mt19937_64& rng, const RecordSink& sink) {
  const ModelConfig& cfg = model.config();
  PosteriorJointSystem js(model);
  Eigen::VectorXd theta = initial_theta(model);
  Eigen::VectorXd x = initial_latents(model.constraints(), rng);
  if (!model.constraints().consistent(x))
    throw std::runtime_error("initial latent state inconsistent");

  const bool joint = cfg.mode == "joint";
  const bool use_bps = cfg.latent_sampler == "bps";
  const bool use_nuts_joint = cfg.joint_kernel == "lg-nuts";
  double eps = cfg.eps_init;
  double rs = cfg.rs_init;
  DualAveraging da(cfg.eps_init, cfg.target_accept);
  const long adapt_until = cfg.burnin / 2;

  TuningReport report;
  report.rs_trajectory.push_back(rs);
  std::deque<Eigen::VectorXd> theta_hist, x_hist;
  const std::size_t hist_cap = 1000;

  NutsStats nuts_stats;
  LgStats lg_stats;
  KernelStats zz_stats;
  long depth_count = 0;

  const long total = cfg.burnin + cfg.iterations;
  for (long it = 0; it < total; ++it) {
    auto t0 = std::chrono::steady_clock::now();
    double accept_stat = 1.0;
    if (joint) {
      SplitState s;
      s.theta = theta;
      s.x = x;
      if (use_nuts_joint) {
        s = lg_nuts_kernel(s, js, eps, rs, rng, cfg.max_depth, &nuts_stats);
        accept_stat = nuts_stats.last_accept_stat;
        report.avg_tree_depth += nuts_stats.last_depth;
        ++depth_count;
      } else {
        s = lg_hmc_kernel(s, js, eps, rs, cfg.lstep, rng, &lg_stats);
        accept_stat = lg_stats.last_accept_stat;
      }
      theta = s.theta;
      x = s.x;
    } else {
      std::bernoulli_distribution coin(0.5);
      if (coin(rng)) {
        std::unique_ptr<GaussianTarget> target = js.laplace_target(theta);
        if (use_bps)
          x = bps_kernel(x, *target, model.constraints(), 1.0, cfg.lambda_ref,
                         rng);
        else
          x = zigzag_hmc_kernel(x, *target, model.constraints(), 1.0, rng,
                                &zz_stats);
        accept_stat = 1.0;  // exact / PDMP updates carry no step size
      } else {
        HamiltonianSystem sys = model.gaussian_system(x);
        theta = nuts_kernel(theta, sys, eps, rng, cfg.max_depth, &nuts_stats);
        accept_stat = nuts_stats.last_accept_stat;
      }
    }
    auto t1 = std::chrono::steady_clock::now();

    if (it < cfg.burnin) {
      if (it < adapt_until) {
        da.update(accept_stat);
        eps = da.step_size();
      } else if (it == adapt_until) {
        eps = da.adapted_step_size();
      }
      if (joint) {
        theta_hist.push_back(theta);
        x_hist.push_back(x);
        if (theta_hist.size() > hist_cap) {
          theta_hist.pop_front();
          x_hist.pop_front();
        }
        if ((it + 1) % 100 == 0 && theta_hist.size() >= 50) {
          try {
            rs = tune_rs(diag_cov(theta_hist), diag_cov_moving(x_hist, model));
          } catch (const std::invalid_argument&) {
            // defective estimate: keep the previous rs
          }
          report.rs_trajectory.push_back(rs);
        }
      }
    } else {
      long post = it - cfg.burnin;
      if (post % cfg.thinning == 0) {
        ChainRecord rec;
        rec.iteration = it;
        PosteriorModel::Unpacked u = model.unpack(theta);
        rec.r_upper = upper_triangle(u.cpc.R);
        rec.d_free.resize(model.n_free_d());
        int k = 0;
        for (int i = 0; i < model.q(); ++i)
          if (!model.d_fixed()[i]) rec.d_free[k++] = u.D[i];
        rec.log_density = model.log_posterior(theta, x);
        rec.accept_stat = accept_stat;
        rec.seconds =
            std::chrono::duration<double>(t1 - t0).count();
        if (cfg.save_latents) rec.x = x;
        sink(rec);
      }
    }
  }
  report.adapted_eps = eps;
  report.divergences = nuts_stats.divergences + lg_stats.divergences;
  if (depth_count > 0) report.avg_tree_depth /= double(depth_count);
  report.iterations = total;
  return report;
}

// Diagonal covariance estimates feeding the rs heuristic; full covariance
// estimates are rank-deficient at these sample sizes.
inline Eigen::MatrixXd diag_cov(const std::deque<Eigen::VectorXd>& hist) {
  const int d = static_cast<int>(hist.front().size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& v : hist) mean += v;
  mean /= double(hist.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& v : hist) var += (v - mean).array().square().matrix();
  var /= double(hist.size() - 1);
  return var.asDiagonal();
}

inline Eigen::MatrixXd diag_cov_moving(const std::deque<Eigen::VectorXd>& hist,
                                       const PosteriorModel& model) {
  Eigen::MatrixXd full = diag_cov(hist);
  const FlatConstraints& cons = model.constraints();
  std::vector<int> moving;
  for (int i = 0; i < cons.dim; ++i)
    if (cons.is_free_moving(i)) moving.push_back(i);
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(moving.size(), moving.size());
  for (std::size_t k = 0; k < moving.size(); ++k)
    out(k, k) = full(moving[k], moving[k]);
  return out;
}

}  // namespace phzz
