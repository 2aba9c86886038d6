#pragma once

// Across-taxa covariance induced by Brownian diffusion on a fixed rooted
// tree, V = Upsilon + kappa^-1 J, plus fast V^-1 b products that avoid
// forming V^-1 inside hot loops. The joint Gaussian over all 2n-1 node
// values has a tree-sparse precision; eliminating the internal nodes
// (Schur complement) yields exactly V^-1 acting on tip values.

#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "phzz/newick.hpp"
#include "phzz/traits.hpp"

namespace phzz {

inline constexpr double kMinBranchLength = 1e-8;

// Upsilon_ii = root-to-tip path length, Upsilon_ij = shared path length.
inline Eigen::MatrixXd tree_diffusion_matrix(const Phylogeny& tree) {
  int n = tree.n_tips;
  int total = static_cast<int>(tree.nodes.size());
  std::vector<double> depth(total, 0.0);
  // nodes are ordered tips-first, root last; walk parents directly
  std::vector<int> order;
  order.reserve(total);
  order.push_back(tree.root);
  for (std::size_t k = 0; k < order.size(); ++k) {
    int i = order[k];
    if (tree.nodes[i].left >= 0) {
      order.push_back(tree.nodes[i].left);
      order.push_back(tree.nodes[i].right);
    }
  }
  for (std::size_t k = 1; k < order.size(); ++k) {
    int i = order[k];
    double bl = std::max(tree.nodes[i].branch_length, kMinBranchLength);
    depth[i] = depth[tree.nodes[i].parent] + bl;
  }
  // tips under each node
  std::vector<std::vector<int>> tips_below(total);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int i = *it;
    if (tree.is_tip(i)) {
      tips_below[i] = {i};
    } else {
      const auto& l = tips_below[tree.nodes[i].left];
      const auto& r = tips_below[tree.nodes[i].right];
      tips_below[i].reserve(l.size() + r.size());
      tips_below[i].insert(tips_below[i].end(), l.begin(), l.end());
      tips_below[i].insert(tips_below[i].end(), r.begin(), r.end());
    }
  }
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) U(i, i) = depth[i];
  for (int v = n; v < total; ++v) {
    for (int a : tips_below[tree.nodes[v].left])
      for (int b : tips_below[tree.nodes[v].right]) {
        U(a, b) = depth[v];
        U(b, a) = depth[v];
      }
  }
  return U;
}

// V = Upsilon + kappa^-1 J.
inline Eigen::MatrixXd tree_covariance(const Phylogeny& tree, double kappa) {
  if (kappa <= 0) throw std::invalid_argument("kappa must be positive");
  Eigen::MatrixXd V = tree_diffusion_matrix(tree);
  V.array() += 1.0 / kappa;
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("tree covariance is not positive definite");
  return V;
}

// Precision products for the across-taxa factor, built once per run.
class TreeGaussian {
 public:
  TreeGaussian(const Phylogeny& tree, double kappa)
      : n_(tree.n_tips), kappa_(kappa) {
    if (kappa <= 0) throw std::invalid_argument("kappa must be positive");
    V_ = tree_covariance(tree, kappa);
    build_sparse(tree);
    // dense inverse, needed for single-column precision reads
    Eigen::LLT<Eigen::MatrixXd> llt(V_);
    Vinv_ = llt.solve(Eigen::MatrixXd::Identity(n_, n_));
    logdet_V_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  int n_tips() const { return n_; }
  const Eigen::MatrixXd& V() const { return V_; }
  const Eigen::MatrixXd& Vinv() const { return Vinv_; }
  double logdet_V() const { return logdet_V_; }

  // V^-1 B for an n x k matrix B, via the tree-sparse Schur complement:
  // V^-1 B = P_tt B - P_ti (P_ii)^-1 P_it B.
  Eigen::MatrixXd vinv_product(const Eigen::MatrixXd& B) const {
    if (B.rows() != n_) throw std::invalid_argument("row count mismatch");
    Eigen::MatrixXd w = Pit_.transpose() * B;
    Eigen::MatrixXd z = internal_solver_.solve(w);
    return Ptt_diag_.asDiagonal() * B - Pit_ * z;
  }

 private:
  void build_sparse(const Phylogeny& tree) {
    int total = static_cast<int>(tree.nodes.size());
    int ni = total - n_;  // internal nodes incl. root
    std::vector<Eigen::Triplet<double>> tii;
    std::vector<Eigen::Triplet<double>> tit;
    Ptt_diag_ = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd dii = Eigen::VectorXd::Zero(ni);
    auto internal_idx = [&](int node) { return node - n_; };
    for (int c = 0; c < total; ++c) {
      if (c == tree.root) continue;
      int a = tree.nodes[c].parent;
      double w = 1.0 / std::max(tree.nodes[c].branch_length, kMinBranchLength);
      int ai = internal_idx(a);
      dii[ai] += w;
      if (tree.is_tip(c)) {
        Ptt_diag_[c] += w;
        tit.emplace_back(c, ai, -w);
      } else {
        int ci = internal_idx(c);
        dii[ci] += w;
        tii.emplace_back(ci, ai, -w);
        tii.emplace_back(ai, ci, -w);
      }
    }
    dii[internal_idx(tree.root)] += kappa_;
    for (int i = 0; i < ni; ++i) tii.emplace_back(i, i, dii[i]);
    Eigen::SparseMatrix<double> Pii(ni, ni);
    Pii.setFromTriplets(tii.begin(), tii.end());
    Pit_.resize(n_, ni);
    Pit_.setFromTriplets(tit.begin(), tit.end());
    internal_solver_.compute(Pii);
    if (internal_solver_.info() != Eigen::Success)
      throw std::runtime_error("tree precision factorization failed");
  }

  int n_;
  double kappa_;
  Eigen::MatrixXd V_, Vinv_;
  double logdet_V_ = 0.0;
  Eigen::VectorXd Ptt_diag_;
  Eigen::SparseMatrix<double> Pit_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> internal_solver_;
};

// log MTN(X; M, V, Sigma) = log MVN(vec X; vec M, V (x) Sigma).
inline double matrix_normal_logdensity(const Eigen::MatrixXd& X,
                                       const Eigen::MatrixXd& M,
                                       const Eigen::MatrixXd& V,
                                       const Eigen::MatrixXd& Sigma) {
  const auto n = X.rows(), q = X.cols();
  if (M.rows() != n || M.cols() != q || V.rows() != n || Sigma.rows() != q)
    throw std::invalid_argument("matrix normal dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> lltV(V), lltS(Sigma);
  if (lltV.info() != Eigen::Success || lltS.info() != Eigen::Success)
    throw std::runtime_error("matrix normal: non-PD scale matrix");
  Eigen::MatrixXd E = X - M;
  double logdet_V = 2.0 * lltV.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double logdet_S = 2.0 * lltS.matrixL().toDenseMatrix().diagonal().array().log().sum();
  // trace(V^-1 E Sigma^-1 E^T)
  double quad = lltV.solve(E).cwiseProduct(
      lltS.solve(E.transpose()).transpose()).sum();
  return -0.5 * (double(n * q) * std::log(2.0 * M_PI) +
                 double(q) * logdet_V + double(n) * logdet_S + quad);
}

// Forward Brownian simulation down the tree (Eq-style: root from the
// conjugate prior, each child normal around its parent with variance
// t_i Sigma), thresholded to observed traits. Returns tip latents and Y.
struct SimulatedData {
  Eigen::MatrixXd X;             // n x q tip latents
  std::vector<TraitRow> Y;       // per-tip observed traits
};

inline SimulatedData simulate_traits(const Phylogeny& tree,
                                     const Eigen::MatrixXd& Sigma,
                                     const Eigen::VectorXd& mu0, double kappa,
                                     const TraitSpec& spec,
                                     std::mt19937_64& rng) {
  Layout l = layout(spec);
  int q = l.q;
  if (Sigma.rows() != q || mu0.size() != q)
    throw std::invalid_argument("simulate_traits dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("simulate_traits: Sigma not PD");
  Eigen::MatrixXd L = llt.matrixL();
  std::normal_distribution<double> nd;
  auto draw = [&](const Eigen::VectorXd& mean, double scale) {
    Eigen::VectorXd z(q);
    for (int i = 0; i < q; ++i) z[i] = nd(rng);
    return (mean + std::sqrt(scale) * (L * z)).eval();
  };
  int total = static_cast<int>(tree.nodes.size());
  std::vector<Eigen::VectorXd> value(total);
  value[tree.root] = draw(mu0, 1.0 / kappa);
  std::vector<int> order{tree.root};
  order.reserve(total);
  for (std::size_t k = 0; k < order.size(); ++k) {
    int i = order[k];
    if (tree.nodes[i].left >= 0) {
      order.push_back(tree.nodes[i].left);
      order.push_back(tree.nodes[i].right);
    }
  }
  for (std::size_t k = 1; k < order.size(); ++k) {
    int i = order[k];
    double bl = std::max(tree.nodes[i].branch_length, kMinBranchLength);
    value[i] = draw(value[tree.nodes[i].parent], bl);
  }
  SimulatedData out;
  out.X.resize(tree.n_tips, q);
  for (int i = 0; i < tree.n_tips; ++i) out.X.row(i) = value[i].transpose();
  out.Y.reserve(tree.n_tips);
  for (int i = 0; i < tree.n_tips; ++i)
    out.Y.push_back(map_latent(out.X.row(i).transpose(), spec));
  return out;
}

}  // namespace phzz
