#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "photonic/common.hpp"
#include "photonic/expression.hpp"

namespace photonic {

using GIndex = std::array<int, 3>;

inline GIndex negate(const GIndex& g) { return {-g[0], -g[1], -g[2]}; }

inline GIndex g_sub(const GIndex& a, const GIndex& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

// Periodic material weights given as finite Fourier coefficient tables,
// eps(y) = sum_g eps_hat(g) exp(2 pi i g.f(y)) with g integer tuples on the
// dual lattice and f the fractional coordinates of y. Component count is 1
// for the 1D transverse model and 3 otherwise.
class MaterialWeights {
public:
  using Table = std::map<GIndex, Mat>;

  MaterialWeights(int dim, Table eps, Table mu, bool real_flag)
      : dim_(dim), eps_(std::move(eps)), mu_(std::move(mu)), real_(real_flag) {
    components_ = (dim_ == 1) ? 1 : 3;
    hermitize(eps_);
    hermitize(mu_);
    validate();
  }

  int dim() const { return dim_; }
  int components() const { return components_; }
  bool real_flag() const { return real_; }
  double lower_bound() const { return c_; }
  double upper_bound() const { return C_; }
  double hermitization_correction() const { return herm_correction_; }

  Mat eps_hat(const GIndex& g) const { return lookup(eps_, g); }
  Mat mu_hat(const GIndex& g) const { return lookup(mu_, g); }
  const Table& eps_table() const { return eps_; }
  const Table& mu_table() const { return mu_; }

  Mat eps_at(const RVec& frac) const { return eval(eps_, frac); }
  Mat mu_at(const RVec& frac) const { return eval(mu_, frac); }

  // Stable content-based key for spectrum caches.
  size_t hash() const {
    size_t h = std::hash<int>()(dim_) ^ (std::hash<bool>()(real_) << 1);
    auto mix = [&h](double v) {
      h ^= std::hash<double>()(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    for (const auto* t : {&eps_, &mu_}) {
      for (const auto& [g, m] : *t) {
        mix(g[0]); mix(g[1]); mix(g[2]);
        for (int i = 0; i < m.rows(); ++i)
          for (int j = 0; j < m.cols(); ++j) {
            mix(m(i, j).real());
            mix(m(i, j).imag());
          }
      }
    }
    return h;
  }

private:
  Mat lookup(const Table& t, const GIndex& g) const {
    auto it = t.find(g);
    if (it == t.end()) return Mat::Zero(components_, components_);
    return it->second;
  }

  Mat eval(const Table& t, const RVec& frac) const {
    Mat v = Mat::Zero(components_, components_);
    for (const auto& [g, m] : t) {
      double phase = 0.0;
      for (int j = 0; j < dim_; ++j) phase += 2.0 * pi * g[j] * frac[j];
      v += m * std::exp(iu * phase);
    }
    return v;
  }

  // eps_hat(-g) <- (eps_hat(-g) + eps_hat(g)^dagger)/2; records the largest
  // correction applied so callers can warn above 1e-10.
  void hermitize(Table& t) {
    Table fixed;
    for (const auto& [g, m] : t) {
      if (m.rows() != components_ || m.cols() != components_)
        throw ConfigError("weight coefficient has wrong dimensions");
      GIndex ng = negate(g);
      auto other = t.find(ng);
      Mat target = (other != t.end()) ? other->second : Mat::Zero(components_, components_);
      Mat sym = 0.5 * (m + target.adjoint());
      herm_correction_ = std::max(herm_correction_, (m - sym).norm());
      fixed[g] = sym;
    }
    t = std::move(fixed);
    if (t.find({0, 0, 0}) == t.end())
      throw ConfigError("weight table must contain the g=0 coefficient");
  }

  void validate() {
    int n = (dim_ == 1) ? 1024 : 64;
    c_ = std::numeric_limits<double>::infinity();
    C_ = 0.0;
    double max_imag = 0.0;
    int total = 1;
    for (int j = 0; j < dim_; ++j) total *= n;
    for (int id = 0; id < total; ++id) {
      RVec f(dim_);
      int rest = id;
      for (int j = dim_ - 1; j >= 0; --j) {
        f[j] = static_cast<double>(rest % n) / n;
        rest /= n;
      }
      for (const Table* t : {&eps_, &mu_}) {
        Mat v = eval(*t, f);
        max_imag = std::max(max_imag, v.imag().cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (v + v.adjoint()),
                                              Eigen::EigenvaluesOnly);
        c_ = std::min(c_, es.eigenvalues().minCoeff());
        C_ = std::max(C_, es.eigenvalues().maxCoeff());
      }
    }
    if (c_ <= 0.0)
      throw NotPositive("sampled weight eigenvalue min is " + std::to_string(c_));
    if (real_ && max_imag > 1e-10)
      throw NotReal("real_flag set but imaginary part reaches " + std::to_string(max_imag));
  }

  int dim_;
  int components_;
  Table eps_, mu_;
  bool real_;
  double c_ = 0.0, C_ = 0.0;
  double herm_correction_ = 0.0;
};

inline MaterialWeights weights_from_fourier(int dim, MaterialWeights::Table eps,
                                            MaterialWeights::Table mu, bool real_flag) {
  return MaterialWeights(dim, std::move(eps), std::move(mu), real_flag);
}

// Vacuum weights (eps = mu = identity).
inline MaterialWeights vacuum_weights(int dim) {
  int cc = (dim == 1) ? 1 : 3;
  MaterialWeights::Table t;
  t[{0, 0, 0}] = Mat::Identity(cc, cc);
  return MaterialWeights(dim, t, t, true);
}

// 1D layered eps(y) = e0 + 2*e1*cos(2 pi y), mu = 1.
inline MaterialWeights layered_weights_1d(double e0, double e1) {
  MaterialWeights::Table eps, mu;
  eps[{0, 0, 0}] = Mat::Constant(1, 1, e0);
  eps[{1, 0, 0}] = Mat::Constant(1, 1, e1);
  eps[{-1, 0, 0}] = Mat::Constant(1, 1, e1);
  mu[{0, 0, 0}] = Mat::Identity(1, 1);
  return MaterialWeights(1, eps, mu, true);
}

struct WeightSamples {
  std::vector<Mat> eps, mu, eps_inv, mu_inv;
  double inverse_residual = 0.0;
};

inline WeightSamples sample_weights(const MaterialWeights& w, const std::vector<RVec>& y_grid) {
  WeightSamples s;
  s.eps.reserve(y_grid.size());
  for (const RVec& y : y_grid) {
    Mat e = w.eps_at(y), m = w.mu_at(y);
    Mat ei = e.inverse(), mi = m.inverse();
    int cc = w.components();
    s.inverse_residual = std::max(
        {s.inverse_residual, (e * ei - Mat::Identity(cc, cc)).norm(),
         (m * mi - Mat::Identity(cc, cc)).norm()});
    s.eps.push_back(std::move(e));
    s.mu.push_back(std::move(m));
    s.eps_inv.push_back(std::move(ei));
    s.mu_inv.push_back(std::move(mi));
  }
  return s;
}

struct ModulationValues {
  double tau_eps = 1.0;
  double tau_mu = 1.0;
  double tau = 1.0;
  RVec grad_ln_ratio;  // grad ln(tau_eps/tau_mu)
  RVec grad_tau;
};

// Slow modulation profile: closed-form tau_eps, tau_mu with exact gradients.
// `period` is the macroscopic period per axis in lattice units (0 = not
// declared periodic); the Harper and dynamics modules require periodicity.
class ModulationProfile {
public:
  ModulationProfile(int dim, Expr::Ptr tau_eps, Expr::Ptr tau_mu, double lambda,
                    RVec period = RVec())
      : dim_(dim), tau_eps_(std::move(tau_eps)), tau_mu_(std::move(tau_mu)),
        lambda_(lambda), period_(std::move(period)) {
    if (lambda_ <= 0.0 || lambda_ > 1.0)
      throw ConfigError("lambda must lie in (0, 1]");
    if (period_.size() == 0) period_ = RVec::Zero(dim_);
    for (int j = 0; j < dim_; ++j) {
      deps_.push_back(tau_eps_->derivative(j));
      dmu_.push_back(tau_mu_->derivative(j));
    }
    RVec zero = RVec::Zero(dim_);
    if (std::abs(tau_eps_->eval(zero) - 1.0) > 1e-12 ||
        std::abs(tau_mu_->eval(zero) - 1.0) > 1e-12)
      throw ConfigError("modulation must satisfy tau_eps(0) = tau_mu(0) = 1");
    validate_positivity();
  }

  static ModulationProfile parse(int dim, const std::string& tau_eps,
                                 const std::string& tau_mu, double lambda,
                                 RVec period = RVec()) {
    return ModulationProfile(dim, ExprParser::parse(tau_eps), ExprParser::parse(tau_mu),
                             lambda, std::move(period));
  }

  static ModulationProfile none(int dim) {
    return ModulationProfile(dim, Expr::constant(1.0), Expr::constant(1.0), 1.0);
  }

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  const RVec& period() const { return period_; }
  bool is_periodic() const { return period_.size() > 0 && period_.minCoeff() > 0.0; }
  bool is_trivial() const { return grad_bound_ < 1e-14; }

  ModulationValues eval(const RVec& r) const {
    ModulationValues v;
    v.tau_eps = tau_eps_->eval(r);
    v.tau_mu = tau_mu_->eval(r);
    v.tau = v.tau_eps * v.tau_mu;
    v.grad_ln_ratio.resize(dim_);
    v.grad_tau.resize(dim_);
    for (int j = 0; j < dim_; ++j) {
      double de = deps_[j]->eval(r), dm = dmu_[j]->eval(r);
      v.grad_ln_ratio[j] = de / v.tau_eps - dm / v.tau_mu;
      v.grad_tau[j] = de * v.tau_mu + v.tau_eps * dm;
    }
    return v;
  }

  // Max deviation between symbolic and central-difference gradients on a
  // sample of the macroscopic cell; the materials contract wants < 1e-6.
  double gradient_crosscheck(int samples = 32, double step = 1e-5) const {
    double worst = 0.0;
    double span = is_periodic() ? period_.maxCoeff() : 2.0;
    for (int s = 0; s < samples; ++s) {
      RVec r = RVec::Zero(dim_);
      for (int j = 0; j < dim_; ++j)
        r[j] = span * (static_cast<double>((s * 37 + 11 * j) % samples) / samples - 0.5);
      ModulationValues v = eval(r);
      for (int j = 0; j < dim_; ++j) {
        RVec rp = r, rm = r;
        rp[j] += step;
        rm[j] -= step;
        double fd_tau = (eval(rp).tau - eval(rm).tau) / (2 * step);
        double fd_ln = (std::log(eval(rp).tau_eps / eval(rp).tau_mu) -
                        std::log(eval(rm).tau_eps / eval(rm).tau_mu)) /
                       (2 * step);
        worst = std::max(worst, std::abs(fd_tau - v.grad_tau[j]));
        worst = std::max(worst, std::abs(fd_ln - v.grad_ln_ratio[j]));
      }
    }
    return worst;
  }

  double min_tau() const { return min_tau_; }
  double max_tau() const { return max_tau_; }

private:
  void validate_positivity() {
    int n = 64;
    min_tau_ = std::numeric_limits<double>::infinity();
    max_tau_ = 0.0;
    double span = is_periodic() ? period_.maxCoeff() : 4.0;
    int total = 1;
    for (int j = 0; j < dim_; ++j) total *= n;
    for (int id = 0; id < total; ++id) {
      RVec r(dim_);
      int rest = id;
      for (int j = dim_ - 1; j >= 0; --j) {
        r[j] = span * (static_cast<double>(rest % n) / n - 0.5);
        rest /= n;
      }
      ModulationValues v = eval(r);
      if (v.tau_eps <= 0.0 || v.tau_mu <= 0.0)
        throw NotPositive("modulation profile not positive on sampled cell");
      min_tau_ = std::min(min_tau_, v.tau);
      max_tau_ = std::max(max_tau_, v.tau);
      grad_bound_ = std::max(grad_bound_, v.grad_tau.cwiseAbs().maxCoeff());
      grad_bound_ = std::max(grad_bound_, v.grad_ln_ratio.cwiseAbs().maxCoeff());
    }
  }

  int dim_;
  Expr::Ptr tau_eps_, tau_mu_;
  std::vector<Expr::Ptr> deps_, dmu_;
  double lambda_;
  RVec period_;
  double min_tau_ = 1.0, max_tau_ = 1.0, grad_bound_ = 0.0;
};

inline ModulationValues eval_modulation(const ModulationProfile& p, const RVec& r) {
  return p.eval(r);
}

}  // namespace photonic
