#pragma once

// Gaussian target N(mu, Phi^-1) exposed through precision *products* only:
// full products Phi u and single columns Phi e_i. The zigzag and BPS
// kernels never need Phi itself.
//
// Flattening convention for matrix-valued latents: an n x q matrix X maps
// to a vector of length n*q with flat index (taxon * q + latent_dim).

#include <stdexcept>

#include <Eigen/Dense>

#include "phzz/tree_gaussian.hpp"

namespace phzz {

class GaussianTarget {
 public:
  virtual ~GaussianTarget() = default;
  virtual int dim() const = 0;
  virtual const Eigen::VectorXd& mean() const = 0;
  // Phi u
  virtual Eigen::VectorXd product(const Eigen::VectorXd& u) const = 0;
  // out += coef * Phi e_i
  virtual void add_column(Eigen::VectorXd& out, int i, double coef) const = 0;

  // 1/2 (x-mu)^T Phi (x-mu)
  double potential(const Eigen::VectorXd& x) const {
    Eigen::VectorXd d = x - mean();
    return 0.5 * d.dot(product(d));
  }
};

class DenseGaussianTarget final : public GaussianTarget {
 public:
  DenseGaussianTarget(Eigen::VectorXd mu, Eigen::MatrixXd precision)
      : mu_(std::move(mu)), phi_(std::move(precision)) {
    if (phi_.rows() != phi_.cols() || phi_.rows() != mu_.size())
      throw std::invalid_argument("precision/mean dimension mismatch");
  }

  static DenseGaussianTarget standard(int d) {
    return DenseGaussianTarget(Eigen::VectorXd::Zero(d),
                               Eigen::MatrixXd::Identity(d, d));
  }

  int dim() const override { return static_cast<int>(mu_.size()); }
  const Eigen::VectorXd& mean() const override { return mu_; }
  Eigen::VectorXd product(const Eigen::VectorXd& u) const override {
    return phi_ * u;
  }
  void add_column(Eigen::VectorXd& out, int i, double coef) const override {
    out += coef * phi_.col(i);
  }
  const Eigen::MatrixXd& precision() const { return phi_; }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd phi_;
};

// Precision V^-1 (x) Sigma^-1 of tip latents under the matrix normal,
// with products evaluated by tree traversal instead of dense Kronecker
// algebra. Columns read off the cached dense V^-1 and Sigma^-1.
class KroneckerPhyloTarget final : public GaussianTarget {
 public:
  KroneckerPhyloTarget(const TreeGaussian& tg, Eigen::MatrixXd sigma_inv,
                       Eigen::VectorXd mu_row)
      : tg_(&tg),
        sinv_(std::move(sigma_inv)),
        n_(tg.n_tips()),
        q_(static_cast<int>(sinv_.rows())) {
    if (mu_row.size() != q_)
      throw std::invalid_argument("mean row dimension mismatch");
    mu_.resize(n_ * q_);
    for (int a = 0; a < n_; ++a) mu_.segment(a * q_, q_) = mu_row;
  }

  int dim() const override { return n_ * q_; }
  const Eigen::VectorXd& mean() const override { return mu_; }

  Eigen::VectorXd product(const Eigen::VectorXd& u) const override {
    if (u.size() != n_ * q_) throw std::invalid_argument("size mismatch");
    // reshape (taxon-major) -> V^-1 U Sigma^-1 -> flatten
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        U(u.data(), n_, q_);
    Eigen::MatrixXd W = tg_->vinv_product(U) * sinv_;
    Eigen::VectorXd out(n_ * q_);
    for (int a = 0; a < n_; ++a)
      out.segment(a * q_, q_) = W.row(a).transpose();
    return out;
  }

  void add_column(Eigen::VectorXd& out, int i, double coef) const override {
    int a = i / q_, b = i % q_;
    // column i of V^-1 (x) Sigma^-1 is Vinv.col(a) (x) sinv.col(b); on the
    // taxon-major flattening that is a rank-one update of the n x q view
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        O(out.data(), n_, q_);
    O.noalias() += coef * tg_->Vinv().col(a) * sinv_.col(b).transpose();
  }

  const Eigen::MatrixXd& sigma_inv() const { return sinv_; }

 private:
  const TreeGaussian* tg_;
  Eigen::MatrixXd sinv_;
  int n_, q_;
  Eigen::VectorXd mu_;
};

}  // namespace phzz
