#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "phzz/dual_averaging.hpp"
#include "phzz/leapfrog.hpp"
#include "phzz/nuts.hpp"

using namespace phzz;

static HamiltonianSystem std_normal_system(int d) {
  HamiltonianSystem sys;
  sys.dim = d;
  sys.potential = [](const Eigen::VectorXd& th) { return 0.5 * th.squaredNorm(); };
  sys.gradient = [](const Eigen::VectorXd& th) { return th; };
  return sys;
}

TEST_CASE("leapfrog arithmetic on the 1-D standard normal") {
  HamiltonianSystem sys = std_normal_system(1);
  Eigen::VectorXd theta(1), p(1);
  theta << 1.0;
  p << 0.0;
  LeapfrogResult r = leapfrog(theta, p, 0.1, sys);
  CHECK(r.theta[0] == Catch::Approx(0.995).margin(1e-15));
  CHECK(r.p[0] == Catch::Approx(-0.09975).margin(1e-15));
  CHECK_FALSE(r.divergent);
  CHECK_THROWS_AS(leapfrog(theta, p, 0.0, sys), std::invalid_argument);
}

TEST_CASE("leapfrog small-step limit is the identity") {
  HamiltonianSystem sys = std_normal_system(2);
  Eigen::VectorXd theta(2), p(2);
  theta << 0.3, -1.2;
  p << 0.8, 0.1;
  LeapfrogResult r = leapfrog(theta, p, 1e-9, sys);
  CHECK((r.theta - theta).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((r.p - p).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("leapfrog reversibility") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  HamiltonianSystem sys = std_normal_system(4);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd theta(4), p(4);
    for (int i = 0; i < 4; ++i) {
      theta[i] = nd(rng);
      p[i] = nd(rng);
    }
    LeapfrogResult fwd = leapfrog(theta, p, 0.2, sys);
    LeapfrogResult back = leapfrog(fwd.theta, -fwd.p, 0.2, sys);
    CHECK((back.theta - theta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.p + p).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("leapfrog energy error scales as eps squared") {
  HamiltonianSystem sys = std_normal_system(1);
  auto max_energy_error = [&](double eps) {
    Eigen::VectorXd theta(1), p(1);
    theta << 1.0;
    p << 0.0;
    double h0 = sys.potential(theta) + gauss_kinetic(p);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      LeapfrogResult r = leapfrog(theta, p, eps, sys);
      theta = r.theta;
      p = r.p;
      worst = std::max(worst,
                       std::abs(sys.potential(theta) + gauss_kinetic(p) - h0));
    }
    return worst;
  };
  double e1 = max_energy_error(0.2);
  double e2 = max_energy_error(0.1);
  double e3 = max_energy_error(0.05);
  CHECK(e1 / e2 == Catch::Approx(4.0).epsilon(0.35));
  CHECK(e2 / e3 == Catch::Approx(4.0).epsilon(0.35));
}

TEST_CASE("leapfrog preserves phase-space volume") {
  // FD Jacobian determinant of one step on a 2-D anisotropic Gaussian
  HamiltonianSystem sys;
  sys.dim = 2;
  Eigen::Matrix2d A;
  A << 2.0, 0.3, 0.3, 0.7;
  sys.potential = [A](const Eigen::VectorXd& th) { return 0.5 * th.dot(A * th); };
  sys.gradient = [A](const Eigen::VectorXd& th) { return (A * th).eval(); };
  Eigen::VectorXd z0(4);
  z0 << 0.4, -0.8, 0.9, 0.2;  // (theta, p)
  auto step = [&](const Eigen::VectorXd& z) {
    LeapfrogResult r = leapfrog(z.head(2), z.tail(2), 0.1, sys);
    Eigen::VectorXd out(4);
    out << r.theta, r.p;
    return out;
  };
  const double h = 1e-6;
  Eigen::MatrixXd J(4, 4);
  for (int j = 0; j < 4; ++j) {
    Eigen::VectorXd zp = z0, zm = z0;
    zp[j] += h;
    zm[j] -= h;
    J.col(j) = (step(zp) - step(zm)) / (2.0 * h);
  }
  CHECK(std::abs(J.determinant() - 1.0) < 1e-6);
}

TEST_CASE("NUTS recovers standard normal moments") {
  HamiltonianSystem sys = std_normal_system(1);
  std::mt19937_64 rng(7);
  Eigen::VectorXd theta(1);
  theta << 0.0;
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  NutsStats stats;
  for (int it = 0; it < n; ++it) {
    theta = nuts_kernel(theta, sys, 0.5, rng, 10, &stats);
    sum += theta[0];
    sq += theta[0] * theta[0];
  }
  double mean = sum / n, var = sq / n - mean * mean;
  CHECK(mean == Catch::Approx(0.0).margin(0.03));
  CHECK(var == Catch::Approx(1.0).margin(0.05));
  CHECK(stats.divergences == 0);
}

TEST_CASE("NUTS translation invariance (two-sample KS)") {
  const double c = 3.7;
  HamiltonianSystem shifted;
  shifted.dim = 1;
  shifted.potential = [c](const Eigen::VectorXd& th) {
    return 0.5 * (th[0] - c) * (th[0] - c);
  };
  shifted.gradient = [c](const Eigen::VectorXd& th) {
    return Eigen::VectorXd::Constant(1, th[0] - c).eval();
  };
  HamiltonianSystem base = std_normal_system(1);
  std::mt19937_64 rng(11);
  const int n = 6000;
  std::vector<double> a, b;
  Eigen::VectorXd ta(1), tb(1);
  ta << c;
  tb << 0.0;
  for (int it = 0; it < n; ++it) {
    ta = nuts_kernel(ta, shifted, 0.5, rng, 10);
    tb = nuts_kernel(tb, base, 0.5, rng, 10);
    a.push_back(ta[0]);
    b.push_back(tb[0] + c);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    ks = std::max(ks, std::abs(double(i) - double(j)) / double(n));
  }
  // two-sample critical value at alpha = 0.01 with slack for autocorrelation
  CHECK(ks < 1.63 * std::sqrt(2.0 / double(n)) * 1.5);
}

TEST_CASE("NUTS on an ill-scaled Gaussian with adapted step size") {
  HamiltonianSystem sys;
  sys.dim = 2;
  Eigen::Vector2d prec(1.0, 1e4);  // condition number 1e4
  sys.potential = [prec](const Eigen::VectorXd& th) {
    return 0.5 * (prec.array() * th.array().square()).sum();
  };
  sys.gradient = [prec](const Eigen::VectorXd& th) {
    return (prec.array() * th.array()).matrix().eval();
  };
  std::mt19937_64 rng(13);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  DualAveraging da(0.1, 0.8);
  NutsStats stats;
  double eps = 0.1;
  for (int it = 0; it < 600; ++it) {
    theta = nuts_kernel(theta, sys, eps, rng, 10, &stats);
    da.update(stats.last_accept_stat);
    eps = da.step_size();
  }
  eps = da.adapted_step_size();
  const int n = 8000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sq = Eigen::Vector2d::Zero();
  for (int it = 0; it < n; ++it) {
    theta = nuts_kernel(theta, sys, eps, rng, 10);
    sum += theta;
    sq += theta.cwiseProduct(theta);
  }
  for (int i = 0; i < 2; ++i) {
    double var_true = 1.0 / prec[i];
    double mean = sum[i] / n, var = sq[i] / n - mean * mean;
    CHECK(mean == Catch::Approx(0.0).margin(4.0 * std::sqrt(var_true)
                                            / std::sqrt(double(n) / 10.0)));
    CHECK(var == Catch::Approx(var_true).epsilon(0.15));
  }
}

TEST_CASE("depth-0 NUTS is still stationary (single leapfrog proposals)") {
  HamiltonianSystem sys = std_normal_system(1);
  std::mt19937_64 rng(17);
  Eigen::VectorXd theta(1);
  theta << 0.4;
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int it = 0; it < n; ++it) {
    theta = nuts_kernel(theta, sys, 0.9, rng, 1);
    sum += theta[0];
    sq += theta[0] * theta[0];
  }
  double mean = sum / n, var = sq / n - mean * mean;
  CHECK(mean == Catch::Approx(0.0).margin(0.07));
  CHECK(var == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("dual averaging monotone responses") {
  DualAveraging shrink(0.5, 0.8), grow(0.5, 0.8);
  // baseline after one update: the mu = log(10 eps0) offset dominates the
  // very first iterate in both directions
  shrink.update(0.0);
  grow.update(1.0);
  double prev_s = shrink.step_size();
  double prev_g = grow.step_size();
  for (int it = 0; it < 100; ++it) {
    shrink.update(0.0);
    grow.update(1.0);
    CHECK(shrink.step_size() < prev_s);
    CHECK(grow.step_size() > prev_g);
    prev_s = shrink.step_size();
    prev_g = grow.step_size();
  }
}

TEST_CASE("dual averaging converges under constant feedback") {
  DualAveraging da(0.3, 0.8);
  double prev = da.adapted_step_size();
  double last_gap = 0.0;
  for (int it = 0; it < 500; ++it) {
    da.update(0.8);
    last_gap = std::abs(std::log(da.adapted_step_size()) - std::log(prev));
    prev = da.adapted_step_size();
  }
  CHECK(last_gap < 1e-3);
}
