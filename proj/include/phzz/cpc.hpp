#pragma once

// Unconstrained parameterization of correlation matrices: tanh maps reals
// to canonical partial correlations, a triangular recursion builds the
// Cholesky factor, R = L L^T. The Jacobian of each stage is triangular in
// a suitable ordering, so the log-determinant accumulates in closed form
// during the forward pass.
//
// z ordering: strict lower triangle of R, row-major: (1,0), (2,0), (2,1), ...

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace phzz {

inline int cpc_dim(int q) { return q * (q - 1) / 2; }

struct CpcResult {
  Eigen::MatrixXd R;    // correlation matrix
  Eigen::MatrixXd L;    // lower-triangular Cholesky factor of R
  double log_jacobian;  // log |dR / dz| of the composite map
  double log_det_R;
};

inline CpcResult cpc_transform(const Eigen::VectorXd& z, int q) {
  if (z.size() != cpc_dim(q))
    throw std::invalid_argument("cpc_transform: z has wrong length");
  CpcResult out;
  out.L = Eigen::MatrixXd::Zero(q, q);
  out.L(0, 0) = 1.0;
  double logjac = 0.0;
  int k = 0;
  for (int i = 1; i < q; ++i) {
    double acc = 1.0;
    for (int j = 0; j < i; ++j, ++k) {
      double w = std::tanh(z[k]);
      double s = std::sqrt(acc);
      out.L(i, j) = w * s;
      acc -= out.L(i, j) * out.L(i, j);
      // z -> w stage: d tanh = 1 - w^2; w -> L stage: dL/dw = s
      logjac += std::log1p(-w * w) + std::log(s);
    }
    out.L(i, i) = std::sqrt(std::max(acc, 0.0));
  }
  out.R = out.L * out.L.transpose();
  out.R.diagonal().setOnes();
  double logdet = 0.0;
  for (int j = 0; j < q; ++j) {
    double d = std::log(out.L(j, j));
    logdet += 2.0 * d;
    // L -> R stage: dR(i,j)/dL(i,j) = L(j,j) for each of the q-1-j rows
    logjac += double(q - 1 - j) * d;
  }
  out.log_jacobian = logjac;
  out.log_det_R = logdet;
  return out;
}

// Exact inverse: correlation matrix back to unconstrained coordinates.
inline Eigen::VectorXd cpc_inverse(const Eigen::MatrixXd& R) {
  int q = static_cast<int>(R.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("cpc_inverse: R not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  Eigen::VectorXd z(cpc_dim(q));
  int k = 0;
  for (int i = 1; i < q; ++i) {
    double acc = 1.0;
    for (int j = 0; j < i; ++j, ++k) {
      double s = std::sqrt(acc);
      double w = L(i, j) / s;
      z[k] = std::atanh(w);
      acc -= L(i, j) * L(i, j);
    }
  }
  return z;
}

// Forward-mode derivatives of one unconstrained coordinate z_k: the row of
// dR/dz_k (nonzero only in row/column I, zero diagonal) plus the
// derivatives of log|J| and log det R. Cost O(q) per coordinate given L.
struct CpcDirectionalDeriv {
  int row = 0;                 // the affected row I of R
  Eigen::VectorXd dR_row;      // d R(I, m) / d z_k for m = 0..q-1
  double dlog_jacobian = 0.0;
  double dlog_det_R = 0.0;
};

inline CpcDirectionalDeriv cpc_derivative(const Eigen::VectorXd& z, int q,
                                          const CpcResult& fwd, int k) {
  // locate (I, J): row-major strict lower triangle
  int I = 1, rem = k;
  while (rem >= I) {
    rem -= I;
    ++I;
  }
  int J = rem;
  CpcDirectionalDeriv d;
  d.row = I;
  // replay row I of the recursion with derivative propagation w.r.t. w_J
  int base = cpc_dim(I);  // index of (I, 0)
  Eigen::VectorXd dL = Eigen::VectorXd::Zero(I + 1);
  double acc = 1.0, dacc = 0.0;
  double dlogjac_w = 0.0;  // d/dw_J of the log-jacobian pieces in row I
  double wJ = std::tanh(z[base + J]);
  for (int j = 0; j < I; ++j) {
    double w = std::tanh(z[base + j]);
    double s = std::sqrt(acc);
    double ds = (j == 0) ? 0.0 : dacc / (2.0 * s);
    dL[j] = (j == J ? s : 0.0) + w * ds;
    double Lij = fwd.L(I, j);
    dacc -= 2.0 * Lij * dL[j];
    acc -= Lij * Lij;
    if (j > 0) dlogjac_w += ds / s;  // sum over log s(I,j)
  }
  double LII = fwd.L(I, I);
  dL[I] = (LII > 0.0) ? dacc / (2.0 * LII) : 0.0;

  // dR(I,m) = sum_c dL(I,c) L(m,c)
  d.dR_row = Eigen::VectorXd::Zero(q);
  for (int m = 0; m < q; ++m) {
    if (m == I) continue;
    double v = 0.0;
    int cmax = std::min(m, I);
    for (int c = 0; c <= cmax; ++c) v += dL[c] * fwd.L(m, c);
    d.dR_row[m] = v;
  }

  double dw_dz = 1.0 - wJ * wJ;  // chain rule through the tanh stage
  d.dR_row *= dw_dz;
  double dLII_rel = (LII > 0.0) ? dL[I] / LII : 0.0;
  d.dlog_det_R = 2.0 * dLII_rel * dw_dz;
  // jacobian pieces: tanh stage, sqrt(acc) stages of row I, L(I,I) power
  d.dlog_jacobian =
      -2.0 * wJ + dw_dz * (dlogjac_w + double(q - 1 - I) * dLII_rel);
  return d;
}

}  // namespace phzz
