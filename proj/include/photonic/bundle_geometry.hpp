#pragma once

#include <optional>
#include <vector>

#include "photonic/bands.hpp"

namespace photonic {

// Spectral projection onto the selected bands at one k, in plane-wave
// coordinates (B-orthogonal: P^2 = P, P^dagger B = B P).
struct SpectralProjection {
  RVec kfrac;
  Mat P_pw;
  int rank = 0;
  double idempotency_defect = 0.0;
  double b_selfadjoint_defect = 0.0;
};

inline SpectralProjection projection_at(const FiberProblem& prob, const RVec& kfrac,
                                        const std::vector<int>& indices) {
  NodeSpectrum ns = physical_spectrum(prob, kfrac);
  const int n = static_cast<int>(ns.vectors.rows());
  Mat F(n, indices.size());
  for (size_t c = 0; c < indices.size(); ++c) F.col(c) = ns.vectors.col(indices[c]);
  Mat P_tilde = F * F.adjoint();
  Mat P_pw = prob.op_to_pw(P_tilde);
  SpectralProjection sp;
  sp.kfrac = kfrac;
  sp.P_pw = P_pw;
  sp.rank = static_cast<int>(indices.size());
  sp.idempotency_defect = (P_pw * P_pw - P_pw).norm();
  sp.b_selfadjoint_defect = (P_pw.adjoint() * prob.B() - prob.B() * P_pw).norm();
  return sp;
}

// Orthonormal sections of a selected subspace over a periodic k-grid, in
// tilde coordinates. Nodes are sampled at unwrapped fractional coordinates
// m/N in [0,1) so marching in the index is monotone in k; crossing the cell
// boundary along an axis identifies psi(k + e*_ax) with wrap[ax] * psi(k).
struct SubspaceGrid {
  KGrid grid;
  int m = 0;                 // fiber rank |I|
  std::vector<Mat> frames;   // per node: D x m, orthonormal columns
  std::vector<Mat> wrap;     // per axis: D x D boundary identification
  std::vector<RVec> omega;   // selected eigenvalues per node (may be empty)

  SubspaceGrid(KGrid g, int rank) : grid(std::move(g)), m(rank) {
    frames.resize(grid.size());
    omega.resize(grid.size());
  }

  // Frame at an index tuple that may step one period outside the grid.
  Mat frame_at(std::vector<int> ix) const {
    Mat shift;
    for (size_t ax = 0; ax < ix.size(); ++ax) {
      int n = grid.counts()[ax];
      int w = 0;
      while (ix[ax] >= n) { ix[ax] -= n; ++w; }
      while (ix[ax] < 0) { ix[ax] += n; --w; }
      for (; w > 0; --w) shift = shift.size() ? (wrap[ax] * shift).eval() : wrap[ax];
      for (; w < 0; ++w) {
        Mat inv = wrap[ax].inverse();
        shift = shift.size() ? (inv * shift).eval() : inv;
      }
    }
    const Mat& f = frames[grid.node_id(ix)];
    return shift.size() ? Mat(shift * f) : f;
  }
};

// Selected-band sections from fiber solves (solver gauge, not smooth).
inline SubspaceGrid maxwell_subspace_grid(const FiberProblem& prob, const KGrid& grid,
                                          const std::vector<int>& indices, int threads = 0) {
  SubspaceGrid sg(grid, static_cast<int>(indices.size()));
  for (int ax = 0; ax < grid.dim(); ++ax) {
    GIndex g{0, 0, 0};
    g[ax] = -1;
    sg.wrap.push_back(prob.shift_matrix_tilde(g));
  }
  parallel_for(grid.size(), [&](int id) {
    NodeSpectrum ns = physical_spectrum(prob, grid.frac_unwrapped(id));
    Mat F(ns.vectors.rows(), indices.size());
    RVec om(indices.size());
    for (size_t c = 0; c < indices.size(); ++c) {
      F.col(c) = ns.vectors.col(indices[c]);
      om[c] = ns.omega[indices[c]];
    }
    sg.frames[id] = std::move(F);
    sg.omega[id] = std::move(om);
  }, threads);
  return sg;
}

// Single-band family over a 2D grid selected by overlap-following along the
// deterministic spanning tree (row 0, then columns), starting from a seed
// band at a seed node. Crossings with decoupled symmetry sectors are walked
// through by the overlap criterion; a matched overlap below 0.5 signals a
// genuine ambiguity.
inline SubspaceGrid follow_band_grid(const FiberProblem& prob, const KGrid& grid,
                                     const std::vector<int>& seed_ix, int seed_band,
                                     int threads = 0) {
  if (grid.dim() != 2) throw GridMismatch("follow_band_grid needs a 2D grid");
  const int n0 = grid.counts()[0], n1 = grid.counts()[1];
  SubspaceGrid sg(grid, 1);
  for (int ax = 0; ax < 2; ++ax) {
    GIndex g{0, 0, 0};
    g[ax] = -1;
    sg.wrap.push_back(prob.shift_matrix_tilde(g));
  }
  std::vector<NodeSpectrum> nodes(grid.size());
  parallel_for(grid.size(), [&](int id) {
    nodes[id] = physical_spectrum(prob, grid.frac_unwrapped(id));
  }, threads);

  auto pick = [&](int id, const Vec& ref) {
    const NodeSpectrum& ns = nodes[id];
    int best = -1;
    double bw = 0.0;
    for (int b = 0; b < ns.omega.size(); ++b) {
      double o = std::abs(ns.vectors.col(b).dot(ref));
      if (o > bw) {
        bw = o;
        best = b;
      }
    }
    if (bw < 0.5)
      throw AmbiguousConnection("followed-band overlap " + std::to_string(bw) + " < 0.5");
    sg.frames[id] = ns.vectors.col(best);
    sg.omega[id] = RVec::Constant(1, ns.omega[best]);
  };

  int seed_id = grid.node_id(seed_ix);
  sg.frames[seed_id] = nodes[seed_id].vectors.col(seed_band);
  sg.omega[seed_id] = RVec::Constant(1, nodes[seed_id].omega[seed_band]);
  int si = seed_ix[0], sj = seed_ix[1];
  // march outward from the seed (never across the cell boundary, where the
  // comparison would need the shift identification)
  for (int j = sj + 1; j < n1; ++j)
    pick(grid.node_id({si, j}), sg.frames[grid.node_id({si, j - 1})]);
  for (int j = sj - 1; j >= 0; --j)
    pick(grid.node_id({si, j}), sg.frames[grid.node_id({si, j + 1})]);
  for (int j = 0; j < n1; ++j) {
    for (int i = si + 1; i < n0; ++i)
      pick(grid.node_id({i, j}), sg.frames[grid.node_id({i - 1, j})]);
    for (int i = si - 1; i >= 0; --i)
      pick(grid.node_id({i, j}), sg.frames[grid.node_id({i + 1, j})]);
  }
  return sg;
}

// Two-band Chern test model h(k) = sin k1 s1 + sin k2 s2 + (m - cos k1 -
// cos k2) s3; the lower band carries Chern number -sgn(m) for 0 < |m| < 2.
inline Mat two_band_chern_hamiltonian(double k1, double k2, double m) {
  Mat h(2, 2);
  cplx dx = std::sin(k1), dy = std::sin(k2);
  double dz = m - std::cos(k1) - std::cos(k2);
  h(0, 0) = dz;
  h(1, 1) = -dz;
  h(0, 1) = dx - iu * dy;
  h(1, 0) = dx + iu * dy;
  return h;
}

inline SubspaceGrid two_band_chern_grid(const Lattice& lat, double mass, int n) {
  KGrid grid = make_kgrid(lat, {n, n});
  SubspaceGrid sg(grid, 1);
  sg.wrap = {Mat::Identity(2, 2), Mat::Identity(2, 2)};
  for (int id = 0; id < grid.size(); ++id) {
    RVec f = grid.frac_unwrapped(id);
    Eigen::SelfAdjointEigenSolver<Mat> es(
        two_band_chern_hamiltonian(2 * pi * f[0], 2 * pi * f[1], mass));
    sg.frames[id] = es.eigenvectors().col(0);
    sg.omega[id] = RVec::Constant(1, es.eigenvalues()[0]);
  }
  return sg;
}

// Plaquette (link-variable) Chern number of a rank-m subspace over a 2D
// grid; exact integer by construction of the winding sum.
struct ChernResult {
  int chern = 0;
  double rounding_defect = 0.0;
  double min_link_modulus = 1.0;
};

inline ChernResult chern_number(const SubspaceGrid& sg) {
  if (sg.grid.dim() != 2) throw GridMismatch("chern_number needs a 2D grid");
  const int n0 = sg.grid.counts()[0], n1 = sg.grid.counts()[1];
  // one toroidal link array; every link enters exactly two plaquettes with
  // opposite orientation, so the winding total is an integer by construction
  std::vector<std::array<cplx, 2>> links(n0 * n1);
  ChernResult res;
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j)
      for (int ax = 0; ax < 2; ++ax) {
        std::vector<int> b{i + (ax == 0), j + (ax == 1)};
        cplx d = Mat(sg.frames[sg.grid.node_id({i, j})].adjoint() * sg.frame_at(b))
                     .determinant();
        if (std::abs(d) < 1e-8)
          throw PlaquetteSingular("link determinant modulus " + std::to_string(std::abs(d)) +
                                  " < 1e-8 (grid passes through a degeneracy)");
        res.min_link_modulus = std::min(res.min_link_modulus, std::abs(d));
        links[i * n1 + j][ax] = d;
      }
  auto U = [&](int i, int j, int ax) { return links[mod_index(i, n0) * n1 + mod_index(j, n1)][ax]; };
  double sum = 0.0;
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j)
      sum += std::arg(U(i, j, 0) * U(i + 1, j, 1) * std::conj(U(i, j + 1, 0)) *
                      std::conj(U(i, j, 1)));
  double c = sum / (2 * pi);
  res.chern = static_cast<int>(std::lround(c));
  res.rounding_defect = std::abs(c - res.chern);
  return res;
}

namespace detail {

inline Mat loewdin(const Mat& F) {
  Eigen::SelfAdjointEigenSolver<Mat> es(F.adjoint() * F);
  Mat invsqrt = es.eigenvectors() *
                es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                es.eigenvectors().adjoint();
  return F * invsqrt;
}

// Principal fractional power of a (near-)unitary matrix; throws when a
// matrix eigenphase approaches the branch cut. The scalar case has no
// branch ambiguity to resolve (any branch distributes smoothly; line
// bundles over the circle are trivial), so a fixed branch is used instead.
inline Mat unitary_power(const Mat& V, double t, double max_phase = pi - 0.1) {
  if (V.rows() == 1) {
    double theta = std::arg(V(0, 0));
    if (theta <= -pi + 1e-12) theta = pi;  // deterministic branch at the cut
    return Mat::Constant(1, 1, std::exp(iu * (t * theta)));
  }
  Eigen::ComplexEigenSolver<Mat> es(V);
  for (int i = 0; i < V.rows(); ++i)
    if (std::abs(std::arg(es.eigenvalues()[i])) > max_phase)
      throw HolonomyTooLarge("holonomy eigenphase " +
                             std::to_string(std::arg(es.eigenvalues()[i])) +
                             " exceeds the principal-branch margin");
  Vec powered(V.rows());
  for (int i = 0; i < V.rows(); ++i)
    powered[i] = std::exp(iu * (t * std::arg(es.eigenvalues()[i])));
  return es.eigenvectors() * powered.asDiagonal() * es.eigenvectors().inverse();
}

// Parallel transport along one periodic line of frames (in place); the
// closing holonomy is distributed as V^{-i/N}. Returns the gauge-closure
// defect left after distribution (one more transport step vs the wrap
// identification of node 0).
inline double transport_line(std::vector<Mat*> line, const Mat& wrap) {
  const int n = static_cast<int>(line.size());
  for (int i = 1; i < n; ++i) {
    Mat P_next = *line[i] * line[i]->adjoint();
    *line[i] = loewdin(P_next * *line[i - 1]);
  }
  Mat ghost = wrap * *line[0];
  Mat P_ghost = ghost * ghost.adjoint();
  Mat transported = loewdin(P_ghost * *line[n - 1]);
  Mat V = ghost.adjoint() * transported;  // m x m unitary
  for (int i = 1; i < n; ++i)
    *line[i] = *line[i] * unitary_power(V, -static_cast<double>(i) / n);
  Mat closure = loewdin(P_ghost * *line[n - 1]);
  return (closure - ghost).norm();
}

}  // namespace detail

struct BlochFrame {
  SubspaceGrid sections;          // smooth-gauge frames
  double kappa = 0.0;             // smoothness proxy max |dpsi| / dk_frac
  double periodicity_defect = 0.0;
};

// Smooth Bloch frame by parallel transport: rows (axis 1) first at row 0,
// then column-wise along axis 0; each line's closing holonomy is spread as a
// fractional unitary power. 1D grids use a single line.
inline BlochFrame smooth_frame(SubspaceGrid sg) {
  if (sg.grid.dim() == 2) {
    ChernResult c = chern_number(sg);
    if (c.chern != 0)
      throw NontrivialBundle("slice Chern number " + std::to_string(c.chern) +
                             " != 0: no global smooth frame exists");
  }
  const auto& counts = sg.grid.counts();
  double closure = 0.0;
  if (sg.grid.dim() == 1) {
    std::vector<Mat*> line;
    for (int i = 0; i < counts[0]; ++i) line.push_back(&sg.frames[sg.grid.node_id({i})]);
    closure = detail::transport_line(line, sg.wrap[0]);
  } else if (sg.grid.dim() == 2) {
    std::vector<Mat*> row0;
    for (int j = 0; j < counts[1]; ++j) row0.push_back(&sg.frames[sg.grid.node_id({0, j})]);
    closure = detail::transport_line(row0, sg.wrap[1]);
    for (int j = 0; j < counts[1]; ++j) {
      std::vector<Mat*> col;
      for (int i = 0; i < counts[0]; ++i) col.push_back(&sg.frames[sg.grid.node_id({i, j})]);
      closure = std::max(closure, detail::transport_line(col, sg.wrap[0]));
    }
  } else {
    throw GridMismatch("smooth_frame supports 1D and 2D grids");
  }

  BlochFrame bf{std::move(sg), 0.0, closure};
  const auto& g = bf.sections.grid;
  for (int id = 0; id < g.size(); ++id) {
    auto ix = g.indices(id);
    for (int ax = 0; ax < g.dim(); ++ax) {
      auto jx = ix;
      jx[ax] += 1;
      double dk = 1.0 / g.counts()[ax];
      double d = (bf.sections.frame_at(jx) - bf.sections.frames[id]).norm();
      bf.kappa = std::max(bf.kappa, d / dk);
    }
  }
  return bf;
}

// Conjugation-adapted twin frame on a 1D grid: column 0 is a smooth section
// of the + band, column 1 its symmetric twin psi_-(k) = C psi_+(-k). Returns
// the sections together with (omega_+(k), -omega_+(-k)) per node.
inline SubspaceGrid conjugation_adapted_twin_frame(const FiberProblem& prob,
                                                   const KGrid& grid, int plus_index,
                                                   int threads = 0) {
  if (grid.dim() != 1) throw GridMismatch("twin frames are built on 1D grids");
  SubspaceGrid plus = maxwell_subspace_grid(prob, grid, {plus_index}, threads);
  BlochFrame smooth = smooth_frame(std::move(plus));
  const int n = grid.counts()[0];
  Mat C = prob.conjugation_matrix_tilde();
  Mat Sp = prob.shift_matrix_tilde({1, 0, 0});

  // exact twin eigenvectors per node (solver gauge); establishes the twin's
  // sorted index from omega ~ -omega_+(-k) at node 0
  std::vector<Vec> minus_exact(n);
  RVec minus_omega(n);
  {
    NodeSpectrum n0 = physical_spectrum(prob, grid.frac_unwrapped(0));
    double target = -smooth.sections.omega[0][0];
    int minus_index = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int b = 0; b < n0.omega.size(); ++b)
      if (std::abs(n0.omega[b] - target) < best) {
        best = std::abs(n0.omega[b] - target);
        minus_index = b;
      }
    SubspaceGrid minus = maxwell_subspace_grid(prob, grid, {minus_index}, threads);
    for (int m = 0; m < n; ++m) {
      minus_exact[m] = minus.frames[m].col(0);
      minus_omega[m] = minus.omega[m][0];
    }
  }

  SubspaceGrid tw(grid, 2);
  tw.wrap = smooth.sections.wrap;
  for (int m = 0; m < n; ++m) {
    int mm = (n - m) % n;
    Vec psi_plus = smooth.sections.frames[m].col(0);
    // value of psi_+ at -m/n: node (n-m)%n shifted by +e* when m != 0
    Vec at_minus_k = smooth.sections.frames[mm].col(0);
    if (m != 0) at_minus_k = Sp * at_minus_k;
    Vec twin = C * at_minus_k.conjugate();
    // snap to the exact eigenspace, keeping the conjugation-adapted phase
    // (the truncated shift perturbs the span slightly at coarse cutoffs)
    cplx overlap = minus_exact[m].dot(twin);
    twin = minus_exact[m] * (overlap / std::abs(overlap));
    Mat F(psi_plus.size(), 2);
    F.col(0) = psi_plus;
    F.col(1) = twin;
    tw.frames[m] = detail::loewdin(F);
    RVec om(2);
    om[0] = smooth.sections.omega[m][0];
    om[1] = minus_omega[m];
    tw.omega[m] = om;
  }
  return tw;
}

// Berry connection A[ax](n,j) = i <psi_n, d_ax psi_j> per node, where d_ax
// is the Cartesian k-derivative along dual axis ax; 4th-order central FD on
// the periodic grid.
struct BerryData {
  std::vector<std::vector<Mat>> A;  // [node][axis], m x m
  double hermiticity_defect = 0.0;
};

// Berry connection with exact off-diagonal entries from the
// Hellmann-Feynman identity A_nj = i <psi_n, (d_k M) psi_j> / (omega_j -
// omega_n), n != j; the diagonal gauge part comes from 4th-order FD of the
// smooth sections and is real by construction. Exactly hermitian.
inline BerryData berry_connection(const SubspaceGrid& sg, const FiberProblem& prob) {
  const KGrid& g = sg.grid;
  RMat dual = g.lattice().dual_basis();
  RMat frac_to_cart = dual.transpose().inverse();
  std::vector<Mat> dM(g.dim());
  for (int ax = 0; ax < g.dim(); ++ax) dM[ax] = prob.operator_tilde_derivative(ax);
  BerryData bd;
  bd.A.resize(g.size());
  for (int id = 0; id < g.size(); ++id) {
    auto ix = g.indices(id);
    const Mat& F = sg.frames[id];
    const RVec& om = sg.omega[id];
    bd.A[id].resize(g.dim());
    for (int c = 0; c < g.dim(); ++c) {
      Mat sandwich = F.adjoint() * dM[c] * F;
      Mat A = Mat::Zero(sg.m, sg.m);
      for (int n = 0; n < sg.m; ++n)
        for (int j = 0; j < sg.m; ++j) {
          if (n == j) continue;
          double dw = om[j] - om[n];
          if (std::abs(dw) < 1e-9)
            throw DegenerateBand("Hellmann-Feynman connection needs non-degenerate bands");
          A(n, j) = iu * sandwich(n, j) / dw;
        }
      // diagonal gauge part by FD along the grid axes
      for (int ax = 0; ax < g.dim(); ++ax) {
        double h = 1.0 / g.counts()[ax];
        auto at = [&](int step) {
          auto jx = ix;
          jx[ax] += step;
          return sg.frame_at(jx);
        };
        Mat d = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
        for (int n = 0; n < sg.m; ++n) {
          cplx a = iu * F.col(n).dot(d.col(n));
          A(n, n) += frac_to_cart(c, ax) * a.real();
        }
      }
      bd.A[id][c] = std::move(A);
    }
  }
  return bd;
}

inline BerryData berry_connection(const SubspaceGrid& sg) {
  const KGrid& g = sg.grid;
  RMat dual = g.lattice().dual_basis();
  RMat frac_to_cart = dual.transpose().inverse();  // grad_k = F^-T grad_frac
  BerryData bd;
  bd.A.resize(g.size());
  for (int id = 0; id < g.size(); ++id) {
    auto ix = g.indices(id);
    std::vector<Mat> dpsi_frac;
    for (int ax = 0; ax < g.dim(); ++ax) {
      double h = 1.0 / g.counts()[ax];
      auto at = [&](int step) {
        auto jx = ix;
        jx[ax] += step;
        return sg.frame_at(jx);
      };
      Mat d = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
      dpsi_frac.push_back(std::move(d));
    }
    bd.A[id].resize(g.dim());
    for (int c = 0; c < g.dim(); ++c) {
      Mat d_cart = Mat::Zero(sg.frames[id].rows(), sg.m);
      for (int ax = 0; ax < g.dim(); ++ax) d_cart += frac_to_cart(c, ax) * dpsi_frac[ax];
      Mat A = iu * (sg.frames[id].adjoint() * d_cart);
      bd.hermiticity_defect = std::max(bd.hermiticity_defect, hermiticity_defect(A));
      bd.A[id][c] = std::move(A);
    }
  }
  return bd;
}

// Berry curvature Omega^{kk}_{jl} = -i tr(P [d_j P, d_l P]) per node from
// the projections (gauge-free; works for nontrivial bundles too). Cartesian
// derivative indices.
inline std::vector<RMat> curvature_from_projections(const SubspaceGrid& sg) {
  const KGrid& g = sg.grid;
  RMat frac_to_cart = g.lattice().dual_basis().transpose().inverse();
  std::vector<RMat> out(g.size());
  for (int id = 0; id < g.size(); ++id) {
    auto ix = g.indices(id);
    std::vector<Mat> dP_frac;
    for (int ax = 0; ax < g.dim(); ++ax) {
      double h = 1.0 / g.counts()[ax];
      auto at = [&](int step) {
        auto jx = ix;
        jx[ax] += step;
        Mat F = sg.frame_at(jx);
        return Mat(F * F.adjoint());
      };
      dP_frac.push_back((-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h));
    }
    std::vector<Mat> dP(g.dim());
    for (int c = 0; c < g.dim(); ++c) {
      dP[c] = Mat::Zero(dP_frac[0].rows(), dP_frac[0].cols());
      for (int ax = 0; ax < g.dim(); ++ax) dP[c] += frac_to_cart(c, ax) * dP_frac[ax];
    }
    Mat P = sg.frames[id] * sg.frames[id].adjoint();
    RMat W = RMat::Zero(g.dim(), g.dim());
    for (int a = 0; a < g.dim(); ++a)
      for (int b = 0; b < g.dim(); ++b)
        W(a, b) = (-iu * (P * (dP[a] * dP[b] - dP[b] * dP[a])).trace()).real();
    out[id] = std::move(W);
  }
  return out;
}

// Poynting tensor P_nj = sum_G conj(phi_n^H(G)) x phi_j^E(G) (3-vector); the
// 1D transverse reduction embeds E along y, H along z, so the propagation
// component is -sum_G conj(phi^H) phi^E.
inline std::vector<Mat> poynting_tensor_at(const FiberProblem& prob, const Mat& frame_tilde) {
  const PlaneWaveBasis& bs = prob.basis();
  const int m = static_cast<int>(frame_tilde.cols());
  const int ncomp = bs.components() == 1 ? 1 : 3;
  std::vector<Mat> P(ncomp, Mat::Zero(m, m));
  std::vector<Vec> pw(m);
  for (int c = 0; c < m; ++c) pw[c] = prob.to_pw(frame_tilde.col(c));
  for (int n = 0; n < m; ++n)
    for (int j = 0; j < m; ++j) {
      for (int gi = 0; gi < bs.ng(); ++gi) {
        if (bs.components() == 1) {
          P[0](n, j) -= std::conj(pw[n][bs.h_index(gi, 0)]) * pw[j][bs.e_index(gi, 0)];
        } else {
          cplx hx = std::conj(pw[n][bs.h_index(gi, 0)]);
          cplx hy = std::conj(pw[n][bs.h_index(gi, 1)]);
          cplx hz = std::conj(pw[n][bs.h_index(gi, 2)]);
          cplx ex = pw[j][bs.e_index(gi, 0)];
          cplx ey = pw[j][bs.e_index(gi, 1)];
          cplx ez = pw[j][bs.e_index(gi, 2)];
          P[0](n, j) += hy * ez - hz * ey;
          P[1](n, j) += hz * ex - hx * ez;
          P[2](n, j) += hx * ey - hy * ex;
        }
      }
    }
  return P;
}

inline std::vector<std::vector<Mat>> poynting_tensor(const FiberProblem& prob,
                                                     const SubspaceGrid& sg) {
  std::vector<std::vector<Mat>> out(sg.grid.size());
  for (int id = 0; id < sg.grid.size(); ++id)
    out[id] = poynting_tensor_at(prob, sg.frames[id]);
  return out;
}

// max_k || conj(P(k)) - Xi P(-k) Xi ||_F over the grid, with Xi the G -> -G
// relabeling; < tol iff the selection supports real states (real weights).
inline double check_projection_reality(const FiberProblem& prob, const KGrid& grid,
                                       const std::vector<int>& indices, int threads = 0) {
  const PlaneWaveBasis& bs = prob.basis();
  const int n = bs.size(), cc = bs.components();
  Mat Xi = Mat::Zero(n, n);
  for (int gi = 0; gi < bs.ng(); ++gi) {
    int ni = bs.negation_index(gi);
    for (int c = 0; c < cc; ++c) {
      Xi(bs.e_index(gi, c), bs.e_index(ni, c)) = 1.0;
      Xi(bs.h_index(gi, c), bs.h_index(ni, c)) = 1.0;
    }
  }
  std::vector<double> dev(grid.size());
  parallel_for(grid.size(), [&](int id) {
    RVec f = grid.frac(id);
    Mat Pk = projection_at(prob, f, indices).P_pw;
    Mat Pm = projection_at(prob, RVec(-f), indices).P_pw;
    dev[id] = (Pk.conjugate() - Xi * Pm * Xi).norm();
  }, threads);
  return *std::max_element(dev.begin(), dev.end());
}

// max normalized overlap between the selected subspace and the analytic
// gradient modes; the discrete divergence-free condition wants < 1e-8.
inline double check_divergence_free(const FiberProblem& prob, const KGrid& grid,
                                    const std::vector<int>& indices, int threads = 0) {
  std::vector<double> dev(grid.size(), 0.0);
  parallel_for(grid.size(), [&](int id) {
    RVec f = grid.frac(id);
    NodeSpectrum ns = physical_spectrum(prob, f);
    Mat G = prob.gradient_modes_tilde(f);
    if (G.cols() == 0) return;
    for (int b : indices)
      dev[id] = std::max(dev[id], (G.adjoint() * ns.vectors.col(b)).norm());
  }, threads);
  return *std::max_element(dev.begin(), dev.end());
}

}  // namespace photonic
