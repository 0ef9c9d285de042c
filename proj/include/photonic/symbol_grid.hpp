#pragma once

#include <functional>
#include <vector>

#include "photonic/common.hpp"

namespace photonic {

// Matrix-valued symbol f(r,k) sampled on uniform 1D grids: r over one
// macroscopic period [0, R) (exactly periodic), k over one dual cell with a
// halo of ghost columns for finite differences across the cell boundary.
// Ghosts come from re-evaluating the generator (equivariant operator
// symbols are not k-periodic on a truncated basis) or, for genuinely
// periodic symbols, from wrap copies. Units: r in lattice constants, k
// Cartesian; hr and hk are the conjugate-pair steps entering brackets.
class SymbolGrid {
public:
  SymbolGrid(int nr, double r_period, int nk, double k_period, int halo, int msize)
      : nr_(nr), nk_(nk), halo_(halo), m_(msize), r_period_(r_period), k_period_(k_period),
        values_((nk + 2 * halo) * nr, Mat::Zero(msize, msize)) {}

  // Sample from a generator f(r, k_cart); fills the halo by evaluation.
  static SymbolGrid sample(int nr, double r_period, int nk, double k_period, int halo,
                           int msize, const std::function<Mat(double, double)>& f) {
    SymbolGrid g(nr, r_period, nk, k_period, halo, msize);
    for (int ik = -halo; ik < nk + halo; ++ik)
      for (int ir = 0; ir < nr; ++ir) g.at(ir, ik) = f(g.r(ir), g.k(ik));
    return g;
  }

  // Periodic wrap copies into the halo (for k-periodic symbols such as
  // reference-space effective symbols).
  void fill_halo_periodic() {
    for (int ik = -halo_; ik < 0; ++ik)
      for (int ir = 0; ir < nr_; ++ir) at(ir, ik) = at(ir, ik + nk_);
    for (int ik = nk_; ik < nk_ + halo_; ++ik)
      for (int ir = 0; ir < nr_; ++ir) at(ir, ik) = at(ir, ik - nk_);
  }

  int nr() const { return nr_; }
  int nk() const { return nk_; }
  int halo() const { return halo_; }
  int msize() const { return m_; }
  double r_period() const { return r_period_; }
  double k_period() const { return k_period_; }
  double hr() const { return r_period_ / nr_; }
  double hk() const { return k_period_ / nk_; }
  double r(int ir) const { return r_period_ * ir / nr_; }
  double k(int ik) const { return k_period_ * ik / nk_; }

  Mat& at(int ir, int ik) { return values_[(ik + halo_) * nr_ + mod_index(ir, nr_)]; }
  const Mat& at(int ir, int ik) const {
    return values_[(ik + halo_) * nr_ + mod_index(ir, nr_)];
  }

  bool same_grid(const SymbolGrid& o) const {
    return nr_ == o.nr_ && nk_ == o.nk_ && m_ == o.m_ &&
           std::abs(r_period_ - o.r_period_) < 1e-14 &&
           std::abs(k_period_ - o.k_period_) < 1e-14;
  }

  // 4th-order central differences; the k-derivative consumes halo.
  Mat d_r(int ir, int ik) const {
    return (-at(ir + 2, ik) + 8.0 * at(ir + 1, ik) - 8.0 * at(ir - 1, ik) + at(ir - 2, ik)) /
           (12.0 * hr());
  }
  Mat d_k(int ir, int ik) const {
    return (-at(ir, ik + 2) + 8.0 * at(ir, ik + 1) - 8.0 * at(ir, ik - 1) + at(ir, ik - 2)) /
           (12.0 * hk());
  }

  double max_hermiticity_defect() const {
    double d = 0.0;
    for (int ik = 0; ik < nk_; ++ik)
      for (int ir = 0; ir < nr_; ++ir) d = std::max(d, hermiticity_defect(at(ir, ik)));
    return d;
  }

  double max_norm() const {
    double d = 0.0;
    for (int ik = 0; ik < nk_; ++ik)
      for (int ir = 0; ir < nr_; ++ir) d = std::max(d, at(ir, ik).norm());
    return d;
  }

  double max_norm_diff(const SymbolGrid& o) const {
    double d = 0.0;
    for (int ik = 0; ik < nk_; ++ik)
      for (int ir = 0; ir < nr_; ++ir) d = std::max(d, (at(ir, ik) - o.at(ir, ik)).norm());
    return d;
  }

  SymbolGrid like(int msize, int halo) const {
    return SymbolGrid(nr_, r_period_, nk_, k_period_, halo, msize);
  }

private:
  int nr_, nk_, halo_, m_;
  double r_period_, k_period_;
  std::vector<Mat> values_;
};

}  // namespace photonic
