#pragma once

// Primal-dual averaging step-size adaptation (Hoffman & Gelman 2014).

#include <cmath>

namespace phzz {

class DualAveraging {
 public:
  explicit DualAveraging(double eps_init, double target_accept = 0.8,
                         double t0 = 10.0, double gamma = 0.05,
                         double kappa = 0.75)
      : mu_(std::log(10.0 * eps_init)),
        log_eps_(std::log(eps_init)),
        log_eps_bar_(std::log(eps_init)),
        delta_(target_accept),
        t0_(t0),
        gamma_(gamma),
        kappa_(kappa) {}

  void update(double accept_stat) {
    ++m_;
    double frac = 1.0 / (m_ + t0_);
    hbar_ = (1.0 - frac) * hbar_ + frac * (delta_ - accept_stat);
    log_eps_ = mu_ - std::sqrt(double(m_)) / gamma_ * hbar_;
    double w = std::pow(double(m_), -kappa_);
    log_eps_bar_ = w * log_eps_ + (1.0 - w) * log_eps_bar_;
  }

  // current iterate, used during warmup
  double step_size() const { return std::exp(log_eps_); }
  // averaged iterate, frozen after warmup
  double adapted_step_size() const { return std::exp(log_eps_bar_); }
  double target_accept() const { return delta_; }
  long iterations() const { return m_; }

 private:
  double mu_, log_eps_, log_eps_bar_;
  double hbar_ = 0.0;
  double delta_, t0_, gamma_, kappa_;
  long m_ = 0;
};

}  // namespace phzz
