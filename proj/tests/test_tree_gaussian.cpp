#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "phzz/benchmark.hpp"
#include "phzz/gaussian_target.hpp"
#include "phzz/tree_gaussian.hpp"

using namespace phzz;

static Phylogeny random_tree(int n, std::mt19937_64& rng) {
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back("t" + std::to_string(i));
  return parse_newick(random_newick(labels, rng));
}

static Eigen::MatrixXd random_spd(int q, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) A(i, j) = nd(rng);
  return A * A.transpose() + Eigen::MatrixXd::Identity(q, q);
}

TEST_CASE("vinv_product matches the dense inverse") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 30; ++rep) {
    int n = 2 + int(rng() % 19);
    Phylogeny tree = random_tree(n, rng);
    double kappa = 0.5 + 10.0 * std::generate_canonical<double, 53>(rng);
    TreeGaussian tg(tree, kappa);
    Eigen::MatrixXd B(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) B(i, j) = nd(rng);
    Eigen::MatrixXd dense = tg.V().llt().solve(B);
    Eigen::MatrixXd fast = tg.vinv_product(B);
    double scale = dense.cwiseAbs().maxCoeff();
    CHECK((fast - dense).cwiseAbs().maxCoeff() < 1e-8 * std::max(scale, 1.0));
  }
}

TEST_CASE("vinv_product is linear") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  Phylogeny tree = random_tree(8, rng);
  TreeGaussian tg(tree, 3.0);
  Eigen::MatrixXd B1(8, 2), B2(8, 2);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 2; ++j) {
      B1(i, j) = nd(rng);
      B2(i, j) = nd(rng);
    }
  Eigen::MatrixXd lhs = tg.vinv_product(2.5 * B1 - 0.7 * B2);
  Eigen::MatrixXd rhs = 2.5 * tg.vinv_product(B1) - 0.7 * tg.vinv_product(B2);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <
        1e-10 * std::max(rhs.cwiseAbs().maxCoeff(), 1.0));
}

TEST_CASE("Kronecker target matches dense Kronecker algebra") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    int n = 2 + int(rng() % 7);
    int q = 1 + int(rng() % 4);
    Phylogeny tree = random_tree(n, rng);
    TreeGaussian tg(tree, 2.0);
    Eigen::MatrixXd Sigma = random_spd(q, rng);
    Eigen::MatrixXd SigInv = Sigma.inverse();
    KroneckerPhyloTarget target(tg, SigInv, Eigen::VectorXd::Zero(q));

    // dense Phi with flat index (taxon * q + dim)
    Eigen::MatrixXd Vinv = tg.V().inverse();
    Eigen::MatrixXd Phi(n * q, n * q);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < q; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < q; ++d)
            Phi(a * q + b, c * q + d) = Vinv(a, c) * SigInv(b, d);

    Eigen::VectorXd u(n * q);
    for (int i = 0; i < n * q; ++i) u[i] = nd(rng);
    Eigen::VectorXd dense = Phi * u;
    Eigen::VectorXd fast = target.product(u);
    double scale = std::max(dense.cwiseAbs().maxCoeff(), 1.0);
    CHECK((fast - dense).cwiseAbs().maxCoeff() < 1e-8 * scale);

    int i = int(rng() % (n * q));
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n * q);
    target.add_column(col, i, 1.7);
    CHECK((col - 1.7 * Phi.col(i)).cwiseAbs().maxCoeff() < 1e-8 * scale);
    // symmetric access
    int j = int(rng() % (n * q));
    Eigen::VectorXd colj = Eigen::VectorXd::Zero(n * q);
    target.add_column(colj, j, 1.0);
    CHECK(col[j] / 1.7 == Catch::Approx(colj[i]).margin(1e-12));
  }
}

TEST_CASE("identity covariances give unit precision columns") {
  Phylogeny tree = parse_newick("(A:0.5,B:0.5);");
  // V = I requires kappa -> inf and unit depths; use a dense target instead
  // for the exact statement, and check the Kronecker structure with V given.
  TreeGaussian tg(tree, 1e14);
  Eigen::MatrixXd Vinv = tg.Vinv();
  Eigen::MatrixXd SigInv = Eigen::MatrixXd::Identity(3, 3);
  KroneckerPhyloTarget target(tg, SigInv, Eigen::VectorXd::Zero(3));
  Eigen::VectorXd col = Eigen::VectorXd::Zero(6);
  target.add_column(col, 4, 1.0);  // taxon 1, dim 1
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) {
      double expect = Vinv(a, 1) * (b == 1 ? 1.0 : 0.0);
      CHECK(col[a * 3 + b] == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("matrix normal density basics") {
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  Eigen::MatrixXd X(1, 1), M(1, 1);
  X << 0.3;
  M << 0.3;
  CHECK(matrix_normal_logdensity(X, M, one, one) ==
        Catch::Approx(-0.5 * std::log(2.0 * M_PI)).margin(1e-14));
  // X = M gives the normalizer only; quadratic term vanishes
  X << 2.0;
  M << 2.0;
  Eigen::MatrixXd V(1, 1), S(1, 1);
  V << 3.0;
  S << 5.0;
  CHECK(matrix_normal_logdensity(X, M, V, S) ==
        Catch::Approx(-0.5 * (std::log(2.0 * M_PI) + std::log(15.0)))
            .margin(1e-12));
}

TEST_CASE("matrix normal equals dense Kronecker MVN") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 10; ++rep) {
    int n = 2 + int(rng() % 4), q = 1 + int(rng() % 3);
    Eigen::MatrixXd V = random_spd(n, rng), S = random_spd(q, rng);
    Eigen::MatrixXd X(n, q), M(n, q);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < q; ++j) {
        X(i, j) = nd(rng);
        M(i, j) = nd(rng);
      }
    // vec by rows, covariance V (x) S at flat index (i*q + j)
    Eigen::MatrixXd C(n * q, n * q);
    Eigen::VectorXd e(n * q);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < q; ++j) {
        e[i * q + j] = X(i, j) - M(i, j);
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < q; ++l)
            C(i * q + j, k * q + l) = V(i, k) * S(j, l);
      }
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    double mvn = -0.5 * (double(n * q) * std::log(2.0 * M_PI) + logdet +
                         e.dot(llt.solve(e)));
    CHECK(matrix_normal_logdensity(X, M, V, S) ==
          Catch::Approx(mvn).margin(1e-10 * std::max(std::abs(mvn), 1.0)));
  }
}

TEST_CASE("matrix normal translation invariance and errors") {
  std::mt19937_64 rng(12);
  Eigen::MatrixXd V = random_spd(3, rng), S = random_spd(2, rng);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 2);
  Eigen::MatrixXd M = Eigen::MatrixXd::Random(3, 2);
  Eigen::MatrixXd T = Eigen::MatrixXd::Constant(3, 2, 4.2);
  CHECK(matrix_normal_logdensity(X, M, V, S) ==
        Catch::Approx(matrix_normal_logdensity(X + T, M + T, V, S))
            .margin(1e-10));
  CHECK_THROWS_AS(matrix_normal_logdensity(X, M.topRows(2), V, S),
                  std::invalid_argument);
  Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(matrix_normal_logdensity(X, M, bad, S), std::runtime_error);
}

TEST_CASE("simulate_traits with zero branch lengths collapses to the root") {
  std::mt19937_64 rng(13);
  Phylogeny tree = parse_newick("((A:0,B:0):0,C:0);");
  TraitSpec spec;
  spec.traits = {TraitSpec::continuous("c")};
  Eigen::MatrixXd Sigma = Eigen::MatrixXd::Identity(1, 1);
  SimulatedData sim =
      simulate_traits(tree, Sigma, Eigen::VectorXd::Zero(1), 1.0, spec, rng);
  // zero lengths are clamped to 1e-8, so tips nearly equal the root draw
  CHECK(std::abs(sim.X(0, 0) - sim.X(1, 0)) < 1e-2);
  CHECK(std::abs(sim.X(0, 0) - sim.X(2, 0)) < 1e-2);
}

TEST_CASE("simulated tips are consistent with their own observations") {
  std::mt19937_64 rng(14);
  Phylogeny tree = random_tree(12, rng);
  TraitSpec spec;
  spec.traits = {TraitSpec::continuous("c"), TraitSpec::binary("b"),
                 TraitSpec::categorical("k", {"x", "y", "z"})};
  Eigen::MatrixXd Sigma = random_spd(4, rng);
  SimulatedData sim =
      simulate_traits(tree, Sigma, Eigen::VectorXd::Zero(4), 5.0, spec, rng);
  std::vector<ConstraintMap> maps;
  for (const auto& row : sim.Y) maps.emplace_back(spec, row);
  CHECK(check_consistency(sim.X, maps));
}

TEST_CASE("simulated tip covariance converges to the tree covariance") {
  std::mt19937_64 rng(15);
  Phylogeny tree = parse_newick("((A:0.4,B:0.6):0.3,C:0.8);");
  double kappa = 2.0;
  Eigen::MatrixXd V = tree_covariance(tree, kappa);
  TraitSpec spec;
  spec.traits = {TraitSpec::continuous("c")};
  Eigen::MatrixXd Sigma(1, 1);
  Sigma << 1.0;
  const int reps = 20000;
  Eigen::MatrixXd draws(reps, 3);
  for (int r = 0; r < reps; ++r) {
    SimulatedData sim =
        simulate_traits(tree, Sigma, Eigen::VectorXd::Zero(1), kappa, spec, rng);
    for (int a = 0; a < 3; ++a) draws(r, a) = sim.X(a, 0);
  }
  Eigen::RowVectorXd mean = draws.colwise().mean();
  Eigen::MatrixXd centered = draws.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / double(reps - 1);
  // elementwise within ~3 MC standard errors; SE of a covariance entry is
  // roughly sqrt((V_ii V_jj + V_ij^2)/reps)
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double se = std::sqrt((V(i, i) * V(j, j) + V(i, j) * V(i, j)) /
                            double(reps));
      CHECK(std::abs(cov(i, j) - V(i, j)) < 4.0 * se);
    }
}
