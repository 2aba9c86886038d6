#pragma once

// Built-in benchmark targets: the d-dimensional orthant-truncated standard
// normal (unit travel time, fresh momentum each iteration) and a simulated
// phylogenetic probit data set with known covariance.

#include <chrono>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phzz/bps.hpp"
#include "phzz/cpc.hpp"
#include "phzz/diagnostics.hpp"
#include "phzz/newick.hpp"
#include "phzz/tree_gaussian.hpp"
#include "phzz/zigzag.hpp"

namespace phzz {

struct OrthantRun {
  Eigen::VectorXd mean, var;            // per-coordinate moments
  std::vector<double> logdens;          // unnormalized log pi per iteration
  std::vector<Eigen::VectorXd> draws;   // kept only when requested
  double seconds = 0.0;
  double min_ess = 0.0;                 // across coordinates
  KernelStats zigzag_stats;
  BpsStats bps_stats;
};

// One arm of the orthant comparison. sampler is "zigzag" or "bps".
inline OrthantRun run_orthant(int d, const std::string& sampler, long iters,
                              double lambda_ref, std::uint64_t seed,
                              bool keep_draws = false) {
  if (sampler != "zigzag" && sampler != "bps")
    throw std::invalid_argument("run_orthant: sampler must be zigzag or bps");
  DenseGaussianTarget target = DenseGaussianTarget::standard(d);
  FlatConstraints cons = FlatConstraints::positive_orthant(d);
  std::mt19937_64 rng(seed);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(d);

  std::vector<std::vector<double>> coord(d);
  OrthantRun out;
  auto t0 = std::chrono::steady_clock::now();
  for (long it = 0; it < iters; ++it) {
    if (sampler == "zigzag")
      x = zigzag_hmc_kernel(x, target, cons, 1.0, rng, &out.zigzag_stats);
    else
      x = bps_kernel(x, target, cons, 1.0, lambda_ref, rng, &out.bps_stats);
    for (int i = 0; i < d; ++i) coord[i].push_back(x[i]);
    out.logdens.push_back(-0.5 * x.squaredNorm());
    if (keep_draws) out.draws.push_back(x);
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  out.mean.resize(d);
  out.var.resize(d);
  out.min_ess = kInf;
  for (int i = 0; i < d; ++i) {
    double m = 0.0;
    for (double v : coord[i]) m += v;
    m /= double(iters);
    double s2 = 0.0;
    for (double v : coord[i]) s2 += (v - m) * (v - m);
    s2 /= double(iters - 1);
    out.mean[i] = m;
    out.var[i] = s2;
    out.min_ess = std::min(out.min_ess, ess(coord[i]));
  }
  return out;
}

// Random rooted bifurcating topology over the given labels with uniform
// branch lengths in [0.1, 1], emitted as Newick text.
inline std::string random_newick(const std::vector<std::string>& labels,
                                 std::mt19937_64& rng) {
  if (labels.size() < 2)
    throw std::invalid_argument("random_newick: need >= 2 labels");
  std::uniform_real_distribution<double> bl(0.1, 1.0);
  std::vector<std::string> sub(labels);
  while (sub.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, sub.size() - 1);
    std::size_t i = pick(rng);
    std::swap(sub[i], sub.back());
    std::string a = sub.back();
    sub.pop_back();
    std::uniform_int_distribution<std::size_t> pick2(0, sub.size() - 1);
    std::size_t j = pick2(rng);
    std::ostringstream os;
    os.precision(17);
    os << "(" << a << ":" << bl(rng) << "," << sub[j] << ":" << bl(rng) << ")";
    sub[j] = os.str();
  }
  return sub[0] + ";";
}

// Simulated phylogenetic benchmark: 1 continuous, 2 binary, 1 three-class
// categorical trait (q = 5) with a known correlation matrix.
struct PhyloBenchmark {
  Phylogeny tree;
  TraitSpec spec;
  std::vector<TraitRow> rows;
  Eigen::MatrixXd R_true;
  Eigen::VectorXd D_true;
  Eigen::MatrixXd X_true;
};

inline PhyloBenchmark make_phylo_benchmark(int n_taxa, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> labels;
  for (int i = 0; i < n_taxa; ++i) labels.push_back("t" + std::to_string(i + 1));
  PhyloBenchmark b;
  b.tree = parse_newick(random_newick(labels, rng));
  b.spec.traits = {TraitSpec::continuous("c1"), TraitSpec::binary("b1"),
                   TraitSpec::binary("b2"),
                   TraitSpec::categorical("k1", {"r", "s", "t"})};
  const int q = layout(b.spec).q;
  std::normal_distribution<double> nd(0.0, 0.5);
  Eigen::VectorXd z(cpc_dim(q));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = nd(rng);
  b.R_true = cpc_transform(z, q).R;
  b.D_true = Eigen::VectorXd::Ones(q);
  Eigen::MatrixXd Sigma =
      b.D_true.asDiagonal() * b.R_true * b.D_true.asDiagonal();
  SimulatedData sim = simulate_traits(b.tree, Sigma, Eigen::VectorXd::Zero(q),
                                      10.0, b.spec, rng);
  // reorder simulated rows to tree tip labels (already tip order)
  b.rows = sim.Y;
  b.X_true = sim.X;
  return b;
}

}  // namespace phzz
