#pragma once

#include "photonic/bundle_geometry.hpp"
#include "photonic/symbol_grid.hpp"

namespace photonic {

// Inputs shared by the closed-form effective symbols on a 1D crystal: a
// conjugation-adapted (or any trivializing) smooth frame over the k-grid
// with its band values, Berry connection and Poynting tensor, the
// modulation profile, and the r-grid resolution.
struct EffectiveInputs {
  const FiberProblem* problem = nullptr;
  const SubspaceGrid* frame = nullptr;  // smooth sections + omega
  const ModulationProfile* modulation = nullptr;
  int nr = 32;
  int halo = 0;
};

namespace detail {

inline double macro_period(const ModulationProfile& mod) {
  if (!mod.is_periodic())
    throw ConfigError("effective symbols need a periodic modulation profile");
  return mod.period()[0];
}

}  // namespace detail

// Meff,0(r,k) = tau(r) diag(omega_n(k)) in the reference basis.
inline SymbolGrid meff0(const EffectiveInputs& in) {
  const SubspaceGrid& fr = *in.frame;
  const int nk = fr.grid.counts()[0], m = fr.m;
  double R = detail::macro_period(*in.modulation);
  double K = fr.grid.lattice().dual_basis()(0, 0);
  SymbolGrid g(in.nr, R, nk, K, in.halo, m);
  for (int ik = -in.halo; ik < nk + in.halo; ++ik) {
    int node = mod_index(ik, nk);
    for (int ir = 0; ir < in.nr; ++ir) {
      double tau = in.modulation->eval(RVec::Constant(1, g.r(ir))).tau;
      Mat v = Mat::Zero(m, m);
      for (int n = 0; n < m; ++n) v(n, n) = tau * fr.omega[node][n];
      g.at(ir, ik) = std::move(v);
    }
  }
  return g;
}

// Meff,1(r,k) = 1/2 sum_nj [ i tau (grad ln tau_eps/tau_mu) . (P_nj -
// conj(P_jn)) + (omega_n + omega_j) grad tau . A_nj ] |chi_n><chi_j|.
inline SymbolGrid meff1(const EffectiveInputs& in) {
  const SubspaceGrid& fr = *in.frame;
  const int nk = fr.grid.counts()[0], m = fr.m;
  double R = detail::macro_period(*in.modulation);
  double K = fr.grid.lattice().dual_basis()(0, 0);
  BerryData berry = berry_connection(fr, *in.problem);
  auto poynting = poynting_tensor(*in.problem, fr);
  SymbolGrid g(in.nr, R, nk, K, in.halo, m);
  for (int ik = -in.halo; ik < nk + in.halo; ++ik) {
    int node = mod_index(ik, nk);
    const Mat& A = berry.A[node][0];
    const Mat& P = poynting[node][0];
    for (int ir = 0; ir < in.nr; ++ir) {
      ModulationValues mv = in.modulation->eval(RVec::Constant(1, g.r(ir)));
      Mat v(m, m);
      for (int n = 0; n < m; ++n)
        for (int j = 0; j < m; ++j) {
          cplx poy = iu * mv.tau * mv.grad_ln_ratio[0] * (P(n, j) - std::conj(P(j, n)));
          cplx ber = (fr.omega[node][n] + fr.omega[node][j]) * mv.grad_tau[0] * A(n, j);
          v(n, j) = 0.5 * (poy + ber);
        }
      g.at(ir, ik) = std::move(v);
    }
  }
  return g;
}

// Full-dimension auxiliary-representation symbol pair at one (r, k), in
// tilde coordinates: Msymb_0 = tau M_per(k), Msymb_1 independent of k with
// the curl-type coupling along grad ln(tau_eps/tau_mu).
struct MsymbPair {
  Mat m0, m1;
};

// The k-independent coupling operator of Msymb_1 divided by (tau * v):
// tilde form of -W [[0, (i/2) e_ax x], [(i/2) e_ax x, 0]] per axis ax (the
// 1D reduction carries opposite signs on the two blocks).
inline Mat msymb1_coupling_tilde(const FiberProblem& prob, int axis) {
  const PlaneWaveBasis& bs = prob.basis();
  const int n = bs.size(), cc = bs.components();
  Mat X = Mat::Zero(n, n);
  if (cc == 1) {
    for (int gi = 0; gi < bs.ng(); ++gi) {
      X(bs.e_index(gi, 0), bs.h_index(gi, 0)) = 0.5 * iu;
      X(bs.h_index(gi, 0), bs.e_index(gi, 0)) = -0.5 * iu;
    }
  } else {
    RVec unit = RVec::Zero(3);
    unit[axis] = 1.0;
    Mat vx = 0.5 * iu * cross_matrix(unit);
    for (int gi = 0; gi < bs.ng(); ++gi)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          X(bs.e_index(gi, i), bs.h_index(gi, j)) = -vx(i, j);
          X(bs.h_index(gi, i), bs.e_index(gi, j)) = -vx(i, j);
        }
  }
  return prob.weighted_op_tilde(X);
}

inline MsymbPair msymb_lambda(const FiberProblem& prob, const ModulationProfile& mod,
                              const RVec& r, const RVec& kfrac) {
  ModulationValues mv = mod.eval(r);
  MsymbPair out;
  out.m0 = mv.tau * prob.operator_tilde(kfrac);
  out.m1 = Mat::Zero(prob.basis().size(), prob.basis().size());
  for (int ax = 0; ax < prob.basis().dim(); ++ax)
    out.m1 += mv.tau * mv.grad_ln_ratio[ax] * msymb1_coupling_tilde(prob, ax);
  return out;
}

}  // namespace photonic
