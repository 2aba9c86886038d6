#pragma once

// Joint posterior of the phylogenetic probit model with the tree fixed:
// matrix-normal likelihood of the tip latents, Sigma = D R D with an LKJ
// prior on R and log-normal priors on the free scale entries, all mapped
// to unconstrained coordinates theta = (z_R, z_D) with log-Jacobians.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phzz/cpc.hpp"
#include "phzz/gaussian_target.hpp"
#include "phzz/leapfrog.hpp"
#include "phzz/newick.hpp"
#include "phzz/traits.hpp"
#include "phzz/tree_gaussian.hpp"
#include "phzz/zigzag.hpp"

namespace phzz {

struct ModelConfig {
  // priors
  double lkj_eta = 1.0;
  double d_log_location = 0.0;
  double d_log_scale = 1.0;
  double root_sample_size = 10.0;  // kappa
  std::vector<double> root_mean;   // empty = zeros
  // identifiability: fix D entries of discrete-trait latent dims at 1.
  // Setting this false puts the log-normal prior on them instead.
  bool fix_discrete_d = true;
  // sampler settings
  double eps_init = 0.1;
  int lstep = 100;
  double lambda_ref = 1.4;
  std::uint64_t seed = 1;
  int chains = 1;
  long iterations = 1000;
  long burnin = 500;
  int thinning = 1;
  double target_accept = 0.8;
  int max_depth = 10;
  double rs_init = 1.0;
  std::string mode = "joint";             // joint | alternate
  std::string latent_sampler = "zigzag";  // alternate mode: zigzag | bps
  std::string joint_kernel = "lg-nuts";   // lg-nuts | lg-hmc
  bool save_latents = false;
};

inline double lognormal_logpdf(double x, double mu, double sigma) {
  double lx = std::log(x);
  double z = (lx - mu) / sigma;
  return -lx - std::log(sigma) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
}

class PosteriorModel {
 public:
  PosteriorModel(TraitSpec spec, std::vector<TraitRow> data,
                 const Phylogeny& tree, ModelConfig cfg)
      : spec_(std::move(spec)),
        data_(std::move(data)),
        cfg_(std::move(cfg)),
        layout_(layout(spec_)),
        tg_(tree, cfg_.root_sample_size) {
    n_ = tree.n_tips;
    if (static_cast<int>(data_.size()) != n_)
      throw std::invalid_argument("trait rows != tree tips");
    q_ = layout_.q;
    mu0_ = Eigen::VectorXd::Zero(q_);
    if (!cfg_.root_mean.empty()) {
      if (static_cast<int>(cfg_.root_mean.size()) != q_)
        throw std::invalid_argument("root_mean has wrong length");
      for (int i = 0; i < q_; ++i) mu0_[i] = cfg_.root_mean[i];
    }
    d_fixed_.assign(q_, false);
    for (std::size_t j = 0; j < spec_.traits.size(); ++j) {
      bool discrete = spec_.traits[j].kind != TraitKind::Continuous;
      for (int s = 0; s < layout_.widths[j]; ++s)
        d_fixed_[layout_.offsets[j] + s] = discrete && cfg_.fix_discrete_d;
    }
    n_free_d_ = 0;
    for (bool f : d_fixed_) n_free_d_ += !f;
    M_.resize(n_, q_);
    for (int a = 0; a < n_; ++a) M_.row(a) = mu0_.transpose();
    maps_.reserve(n_);
    for (const auto& row : data_) maps_.emplace_back(spec_, row);
    cons_ = FlatConstraints::from_maps(maps_);
  }

  int n_taxa() const { return n_; }
  int q() const { return q_; }
  int theta_dim() const { return cpc_dim(q_) + n_free_d_; }
  int latent_dim() const { return n_ * q_; }
  int n_free_d() const { return n_free_d_; }
  const std::vector<bool>& d_fixed() const { return d_fixed_; }
  const TraitSpec& spec() const { return spec_; }
  const std::vector<TraitRow>& data() const { return data_; }
  const TreeGaussian& tree_gaussian() const { return tg_; }
  const FlatConstraints& constraints() const { return cons_; }
  const std::vector<ConstraintMap>& constraint_maps() const { return maps_; }
  const ModelConfig& config() const { return cfg_; }
  const Eigen::VectorXd& root_mean() const { return mu0_; }

  const Eigen::MatrixXd& mean_matrix() const { return M_; }

  struct Unpacked {
    CpcResult cpc;
    Eigen::VectorXd D;            // length q, fixed entries = 1
    Eigen::MatrixXd Sigma;        // D R D
    double log_prior_plus_jac = 0.0;  // LKJ + D priors + transform jacobians
  };

  Unpacked unpack(const Eigen::VectorXd& theta) const {
    if (theta.size() != theta_dim())
      throw std::invalid_argument("theta has wrong length");
    Unpacked u;
    u.cpc = cpc_transform(theta.head(cpc_dim(q_)), q_);
    u.D = Eigen::VectorXd::Ones(q_);
    int k = cpc_dim(q_);
    double prior = (cfg_.lkj_eta - 1.0) * u.cpc.log_det_R + u.cpc.log_jacobian;
    for (int i = 0; i < q_; ++i) {
      if (d_fixed_[i]) continue;
      double z = theta[k++];
      u.D[i] = std::exp(z);
      prior += lognormal_logpdf(u.D[i], cfg_.d_log_location, cfg_.d_log_scale);
      prior += z;  // log-Jacobian of exp
    }
    u.Sigma = u.D.asDiagonal() * u.cpc.R * u.D.asDiagonal();
    u.log_prior_plus_jac = prior;
    return u;
  }

  // Flattened latent vector (taxon-major) as an n x q matrix view.
  Eigen::MatrixXd to_matrix(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd X(n_, q_);
    for (int a = 0; a < n_; ++a) X.row(a) = x.segment(a * q_, q_).transpose();
    return X;
  }
  Eigen::VectorXd to_flat(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd x(n_ * q_);
    for (int a = 0; a < n_; ++a) x.segment(a * q_, q_) = X.row(a).transpose();
    return x;
  }

  // Numerically degenerate Sigma (overflowed D, near-singular R) yields
  // -inf / NaN rather than throwing, so kernels flag a divergence.
  // Matrix-normal terms use the cached tree factorization (log|V| and
  // V^-1 products) instead of refactorizing the n x n row covariance;
  // this is the hot call of NUTS energy evaluations.
  double log_posterior(const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& x) const {
    Unpacked u = unpack(theta);
    if (!u.Sigma.allFinite()) return -kInf;
    Eigen::LLT<Eigen::MatrixXd> lltS(u.Sigma);
    if (lltS.info() != Eigen::Success) return -kInf;
    Eigen::MatrixXd E = to_matrix(x) - M_;
    // trace(V^-1 E Sigma^-1 E^T)
    double quad = tg_.vinv_product(E).cwiseProduct(
        lltS.solve(E.transpose()).transpose()).sum();
    double logdet_S =
        2.0 * lltS.matrixL().toDenseMatrix().diagonal().array().log().sum();
    double ll = -0.5 * (double(n_) * double(q_) * std::log(2.0 * M_PI) +
                        double(q_) * tg_.logdet_V() +
                        double(n_) * logdet_S + quad);
    return ll + u.log_prior_plus_jac;
  }

  // d log_posterior / d theta at fixed latents, via the chain rule through
  // Sigma = D R D and the CPC recursion (forward-mode, one pass per z).
  Eigen::VectorXd grad_theta(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& x) const {
    Unpacked u = unpack(theta);
    Eigen::MatrixXd E = to_matrix(x) - M_;
    Eigen::MatrixXd VinvE = tg_.vinv_product(E);
    Eigen::MatrixXd A = E.transpose() * VinvE;  // q x q
    Eigen::LLT<Eigen::MatrixXd> llt(u.Sigma);
    if (!u.Sigma.allFinite() || llt.info() != Eigen::Success)
      return Eigen::VectorXd::Constant(
          theta_dim(), std::numeric_limits<double>::quiet_NaN());
    Eigen::MatrixXd SigInv =
        llt.solve(Eigen::MatrixXd::Identity(q_, q_));
    // d logMTN / d Sigma
    Eigen::MatrixXd G =
        -0.5 * double(n_) * SigInv + 0.5 * SigInv * A * SigInv;
    Eigen::MatrixXd B = u.D.asDiagonal() * G * u.D.asDiagonal();
    Eigen::VectorXd grad(theta_dim());
    int m = cpc_dim(q_);
    Eigen::VectorXd zR = theta.head(m);
    for (int k = 0; k < m; ++k) {
      CpcDirectionalDeriv dk = cpc_derivative(zR, q_, u.cpc, k);
      double g = 0.0;
      for (int c = 0; c < q_; ++c) g += B(dk.row, c) * dk.dR_row[c];
      g *= 2.0;  // symmetric perturbation, zero diagonal
      g += (cfg_.lkj_eta - 1.0) * dk.dlog_det_R + dk.dlog_jacobian;
      grad[k] = g;
    }
    Eigen::MatrixXd GDR =
        G * u.D.asDiagonal() * u.cpc.R;
    int k = m;
    int zi = 0;
    for (int i = 0; i < q_; ++i) {
      if (d_fixed_[i]) continue;
      double z = theta[m + zi];
      double g = 2.0 * GDR(i, i) * u.D[i] -
                 (z - cfg_.d_log_location) /
                     (cfg_.d_log_scale * cfg_.d_log_scale);
      grad[k++] = g;
      ++zi;
    }
    return grad;
  }

  // Gaussian-momentum system for the covariance block at fixed latents.
  HamiltonianSystem gaussian_system(const Eigen::VectorXd& x) const {
    HamiltonianSystem sys;
    sys.dim = theta_dim();
    sys.potential = [this, x](const Eigen::VectorXd& th) {
      return -log_posterior(th, x);
    };
    sys.gradient = [this, x](const Eigen::VectorXd& th) {
      return (-grad_theta(th, x)).eval();
    };
    return sys;
  }

  // Conditional of the latents given theta: truncated N(vec M, Phi^-1)
  // with Phi = V^-1 (x) Sigma^-1 and the discrete-data walls.
  KroneckerPhyloTarget latent_target(const Eigen::VectorXd& theta) const {
    Unpacked u = unpack(theta);
    Eigen::LLT<Eigen::MatrixXd> llt(u.Sigma);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("latent_target: Sigma not PD");
    Eigen::MatrixXd SigInv = llt.solve(Eigen::MatrixXd::Identity(q_, q_));
    return KroneckerPhyloTarget(tg_, SigInv, mu0_);
  }

 private:
  TraitSpec spec_;
  std::vector<TraitRow> data_;
  ModelConfig cfg_;
  Layout layout_;
  TreeGaussian tg_;
  int n_ = 0, q_ = 0, n_free_d_ = 0;
  Eigen::VectorXd mu0_;
  Eigen::MatrixXd M_;
  std::vector<bool> d_fixed_;
  std::vector<ConstraintMap> maps_;
  FlatConstraints cons_;
};

}  // namespace phzz
