#pragma once

#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "photonic/lattice.hpp"
#include "photonic/materials.hpp"

namespace photonic {

// Plane-wave basis e^{iG.y} with spherical cutoff |G| <= gmax, closed under
// negation, ordered lexicographically on the integer coordinates. Fields have
// 1 component (E,H scalars) in the 1D transverse model, 3 otherwise; dim==2
// means in-plane G with full 3-component fields (z-uniform crystal).
class PlaneWaveBasis {
public:
  PlaneWaveBasis(const Lattice& lat, double gmax) : lattice_(&lat), gmax_(gmax) {
    if (gmax <= 0.0) throw GridMismatch("gmax must be positive");
    int dim = lat.dim();
    components_ = (dim == 1) ? 1 : 3;
    // bound on integer coordinates: |n| <= gmax / min singular value of dual
    Eigen::JacobiSVD<RMat> svd(lat.dual_basis());
    int nmax = static_cast<int>(std::ceil(gmax / svd.singularValues().minCoeff())) + 1;
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int j = 0; j < dim; ++j) {
      lo[j] = -nmax;
      hi[j] = nmax;
    }
    for (int n1 = lo[0]; n1 <= hi[0]; ++n1)
      for (int n2 = lo[1]; n2 <= hi[1]; ++n2)
        for (int n3 = lo[2]; n3 <= hi[2]; ++n3) {
          GIndex g{n1, n2, n3};
          if (g_cartesian(g).norm() <= gmax + 1e-12) g_.push_back(g);
        }
    for (int i = 0; i < static_cast<int>(g_.size()); ++i) index_of_[g_[i]] = i;
  }

  const Lattice& lattice() const { return *lattice_; }
  int dim() const { return lattice_->dim(); }
  int components() const { return components_; }
  int ng() const { return static_cast<int>(g_.size()); }
  int size() const { return 2 * components_ * ng(); }  // E block then H block
  double gmax() const { return gmax_; }
  const GIndex& g(int i) const { return g_[i]; }

  RVec g_cartesian(const GIndex& g) const {
    RVec f(dim());
    for (int j = 0; j < dim(); ++j) f[j] = g[j];
    return lattice_->k_cartesian(f);
  }

  // Cartesian k + G for fractional k.
  RVec q_cartesian(const RVec& kfrac, int gi) const {
    RVec f(dim());
    for (int j = 0; j < dim(); ++j) f[j] = kfrac[j] + g_[gi][j];
    return lattice_->k_cartesian(f);
  }

  int find(const GIndex& g) const {
    auto it = index_of_.find(g);
    return it == index_of_.end() ? -1 : it->second;
  }

  int negation_index(int i) const { return find(negate(g_[i])); }

  int e_index(int gi, int c) const { return gi * components_ + c; }
  int h_index(int gi, int c) const { return components_ * ng() + gi * components_ + c; }

private:
  const Lattice* lattice_;
  double gmax_;
  int components_;
  std::vector<GIndex> g_;
  std::map<GIndex, int> index_of_;
};

inline PlaneWaveBasis build_basis(const Lattice& lat, double gmax) {
  return PlaneWaveBasis(lat, gmax);
}

inline Mat cross_matrix(const RVec& v) {
  Mat m = Mat::Zero(3, 3);
  double v1 = v[0], v2 = v.size() > 1 ? v[1] : 0.0, v3 = v.size() > 2 ? v[2] : 0.0;
  m(0, 1) = -v3; m(0, 2) = v2;
  m(1, 0) = v3;  m(1, 2) = -v1;
  m(2, 0) = -v2; m(2, 1) = v1;
  return m;
}

// Weights + basis, with the k-independent Gram matrix B (weighted inner
// product) and its Cholesky factor. All spectral computations run in the
// B-orthonormal coordinates v~ = L^H v, where adjoints are plain conjugate
// transposes; plane-wave coefficients are recovered at I/O boundaries.
class FiberProblem {
public:
  FiberProblem(const PlaneWaveBasis& basis, const MaterialWeights& weights)
      : basis_(&basis), weights_(&weights) {
    if (weights.dim() != basis.dim())
      throw GridMismatch("weights dim does not match basis dim");
    const int ng = basis.ng(), cc = basis.components(), n = basis.size();
    B_ = Mat::Zero(n, n);
    for (int a = 0; a < ng; ++a)
      for (int b = 0; b < ng; ++b) {
        GIndex d = g_sub(basis.g(a), basis.g(b));
        Mat e = weights.eps_hat(d), m = weights.mu_hat(d);
        for (int i = 0; i < cc; ++i)
          for (int j = 0; j < cc; ++j) {
            B_(basis.e_index(a, i), basis.e_index(b, j)) = e(i, j);
            B_(basis.h_index(a, i), basis.h_index(b, j)) = m(i, j);
          }
      }
    B_ = 0.5 * (B_ + B_.adjoint().eval());
    Eigen::LLT<Mat> llt(B_);
    if (llt.info() != Eigen::Success)
      throw GramNotPositive("weighted Gram matrix is not positive definite");
    L_ = llt.matrixL();
    Linv_ = L_.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  }

  const PlaneWaveBasis& basis() const { return *basis_; }
  const MaterialWeights& weights() const { return *weights_; }
  const Mat& B() const { return B_; }
  const Mat& L() const { return L_; }

  Vec to_tilde(const Vec& pw) const { return L_.adjoint() * pw; }
  Vec to_pw(const Vec& tilde) const { return Linv_.adjoint() * tilde; }
  Mat op_to_tilde(const Mat& op_pw) const { return L_.adjoint() * op_pw * Linv_.adjoint(); }
  Mat op_to_pw(const Mat& op_tilde) const { return Linv_.adjoint() * op_tilde * L_.adjoint(); }
  // tilde form of B^{-1} X for a plane-wave-coordinates operator X
  Mat weighted_op_tilde(const Mat& X_pw) const { return Linv_ * X_pw * Linv_.adjoint(); }

  // Curl block R(k): E rows couple to H with -(k+G)x, H rows to E with
  // +(k+G)x (scalar (k+G) on both in 1D); hermitian by construction.
  Mat assemble_R(const RVec& kfrac) const {
    const auto& bs = *basis_;
    const int n = bs.size(), cc = bs.components();
    Mat R = Mat::Zero(n, n);
    for (int gi = 0; gi < bs.ng(); ++gi) {
      RVec q = bs.q_cartesian(kfrac, gi);
      if (cc == 1) {
        R(bs.e_index(gi, 0), bs.h_index(gi, 0)) = q[0];
        R(bs.h_index(gi, 0), bs.e_index(gi, 0)) = q[0];
      } else {
        Mat qx = cross_matrix(q);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            R(bs.e_index(gi, i), bs.h_index(gi, j)) = -qx(i, j);
            R(bs.h_index(gi, i), bs.e_index(gi, j)) = qx(i, j);
          }
      }
    }
    return R;
  }

  // Fiber Maxwell operator in tilde coordinates: hermitian matrix whose
  // generalized-problem equivalent is R v = omega B v.
  Mat operator_tilde(const RVec& kfrac) const {
    return Linv_ * assemble_R(kfrac) * Linv_.adjoint();
  }

  // d/dk_j of the tilde fiber operator, Cartesian k-component j; exact (R is
  // linear in k).
  Mat operator_tilde_derivative(int axis) const {
    const auto& bs = *basis_;
    RVec dk = RVec::Unit(std::max(bs.dim(), axis + 1), axis);
    const int n = bs.size(), cc = bs.components();
    Mat R = Mat::Zero(n, n);
    for (int gi = 0; gi < bs.ng(); ++gi) {
      if (cc == 1) {
        R(bs.e_index(gi, 0), bs.h_index(gi, 0)) = dk[0];
        R(bs.h_index(gi, 0), bs.e_index(gi, 0)) = dk[0];
      } else {
        Mat qx = cross_matrix(dk);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            R(bs.e_index(gi, i), bs.h_index(gi, j)) = -qx(i, j);
            R(bs.h_index(gi, i), bs.e_index(gi, j)) = qx(i, j);
          }
      }
    }
    return Linv_ * R * Linv_.adjoint();
  }

  // Antiunitary conjugation C: (C v)_pw(G) = conj(v_pw(-G)), as a matrix
  // acting on conj(v~): C v~ = conj_matrix * conj(v~). Antiunitary w.r.t.
  // the weighted product iff the weights are real.
  Mat conjugation_matrix_tilde() const {
    const auto& bs = *basis_;
    const int n = bs.size(), cc = bs.components();
    Mat Xi = Mat::Zero(n, n);
    for (int gi = 0; gi < bs.ng(); ++gi) {
      int ni = bs.negation_index(gi);
      if (ni < 0) throw GridMismatch("basis not closed under negation");
      for (int c = 0; c < cc; ++c) {
        Xi(bs.e_index(gi, c), bs.e_index(ni, c)) = 1.0;
        Xi(bs.h_index(gi, c), bs.h_index(ni, c)) = 1.0;
      }
    }
    return L_.adjoint() * Xi * Linv_.transpose();
  }

  // Equivariance relabeling e^{i gamma*.y}: pw coefficients shift G -> G +
  // gamma*. On the truncated basis the raw relabeling loses boundary modes;
  // the returned matrix is its unitary polar factor (the exact map is
  // unitary in the weighted product), which keeps winding sums over wrapped
  // links exactly consistent. Low-band states are unaffected beyond the
  // truncation error either way.
  Mat shift_matrix_tilde(const GIndex& gamma) const {
    const auto& bs = *basis_;
    const int n = bs.size(), cc = bs.components();
    Mat P = Mat::Zero(n, n);
    for (int gi = 0; gi < bs.ng(); ++gi) {
      GIndex target{bs.g(gi)[0] + gamma[0], bs.g(gi)[1] + gamma[1], bs.g(gi)[2] + gamma[2]};
      int ti = bs.find(target);
      if (ti < 0) continue;
      for (int c = 0; c < cc; ++c) {
        P(bs.e_index(ti, c), bs.e_index(gi, c)) = 1.0;
        P(bs.h_index(ti, c), bs.h_index(gi, c)) = 1.0;
      }
    }
    Mat S = L_.adjoint() * P * Linv_.adjoint();
    Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().adjoint();
  }

  // B-orthonormal basis of the analytic gradient-mode space at k (empty in
  // the 1D transverse model). Columns are tilde coordinates.
  Mat gradient_modes_tilde(const RVec& kfrac) const {
    const auto& bs = *basis_;
    const int cc = bs.components(), n = bs.size();
    if (cc == 1) return Mat::Zero(n, 0);
    std::vector<Vec> cols;
    double qscale = bs.lattice().dual_basis().norm();
    for (int gi = 0; gi < bs.ng(); ++gi) {
      RVec q = bs.q_cartesian(kfrac, gi);
      RVec q3 = RVec::Zero(3);
      q3.head(q.size()) = q;
      for (int block = 0; block < 2; ++block) {
        auto put = [&](const RVec& dir) {
          Vec v = Vec::Zero(n);
          for (int c = 0; c < 3; ++c) {
            int idx = block == 0 ? bs.e_index(gi, c) : bs.h_index(gi, c);
            v[idx] = dir[c];
          }
          cols.push_back(to_tilde(v));
        };
        if (q3.norm() < 1e-9 * qscale) {
          for (int c = 0; c < 3; ++c) put(RVec::Unit(3, c));
        } else {
          put(q3 / q3.norm());
        }
      }
    }
    Mat G(n, cols.size());
    for (size_t i = 0; i < cols.size(); ++i) G.col(i) = cols[i];
    // orthonormalize (thin QR); gradient modes are linearly independent
    Eigen::HouseholderQR<Mat> qr(G);
    Mat Q = qr.householderQ() * Mat::Identity(n, static_cast<int>(cols.size()));
    return Q;
  }

private:
  const PlaneWaveBasis* basis_;
  const MaterialWeights* weights_;
  Mat B_, L_, Linv_;
};

// Weighted inner product of plane-wave coefficient vectors.
inline cplx weighted_inner(const Vec& psi, const Vec& phi, const Mat& B) {
  if (psi.size() != phi.size() || B.rows() != psi.size())
    throw GridMismatch("weighted_inner: dimension mismatch");
  return psi.adjoint() * (B * phi);
}

struct FiberOperator {
  const FiberProblem* problem;
  RVec kfrac;
  Mat R;  // hermitian curl block in plane-wave coordinates

  const Mat& B() const { return problem->B(); }
};

inline FiberOperator assemble_fiber(const RVec& kfrac, const FiberProblem& prob) {
  return FiberOperator{&prob, kfrac, prob.assemble_R(kfrac)};
}

struct FiberSpectrum {
  const FiberProblem* problem = nullptr;
  RVec kfrac;
  RVec omega;                       // ascending
  Mat vectors_tilde;                // columns, orthonormal in tilde coords
  std::vector<int> zero_mode_indices;
  std::vector<int> physical_indices;
  double zero_span_residual = 0.0;  // worst distance of a zero mode to the gradient span

  Vec vector_pw(int n) const { return problem->to_pw(vectors_tilde.col(n)); }

  std::vector<double> eigenvalues() const {
    return std::vector<double>(omega.data(), omega.data() + omega.size());
  }

  std::vector<double> physical_eigenvalues() const {
    std::vector<double> v;
    v.reserve(physical_indices.size());
    for (int i : physical_indices) v.push_back(omega[i]);
    return v;
  }
};

// Smallest nonzero vacuum frequency |k+G| at this k; sets the kernel scale.
inline double min_nonzero_vacuum_frequency(const PlaneWaveBasis& bs, const RVec& kfrac) {
  double best = std::numeric_limits<double>::infinity();
  double scale = bs.lattice().dual_basis().norm();
  for (int gi = 0; gi < bs.ng(); ++gi) {
    double q = bs.q_cartesian(kfrac, gi).norm();
    if (q > 1e-9 * scale) best = std::min(best, q);
  }
  return best;
}

inline double default_tol_zero(const PlaneWaveBasis& bs, const RVec& kfrac) {
  return 1e-6 * min_nonzero_vacuum_frequency(bs, kfrac);
}

inline FiberSpectrum solve_fiber(const FiberOperator& op) {
  const FiberProblem& prob = *op.problem;
  Mat H = prob.operator_tilde(op.kfrac);
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  if (es.info() != Eigen::Success)
    throw EigensolverFailure("fiber eigensolver did not converge");
  FiberSpectrum spec;
  spec.problem = &prob;
  spec.kfrac = op.kfrac;
  spec.omega = es.eigenvalues();
  spec.vectors_tilde = es.eigenvectors();
  spec.physical_indices.resize(spec.omega.size());
  for (int i = 0; i < spec.omega.size(); ++i) spec.physical_indices[i] = i;
  return spec;
}

// Flags |omega| < tol_zero eigenvalues, verifies they lie in the analytic
// gradient-mode span, and splits physical from zero-mode indices in place.
inline void classify_zero_modes(FiberSpectrum& spec, double tol_zero = -1.0,
                                double span_tol = 1e-8) {
  const FiberProblem& prob = *spec.problem;
  if (tol_zero <= 0.0) tol_zero = default_tol_zero(prob.basis(), spec.kfrac);
  for (int i = 0; i < spec.omega.size(); ++i) {
    double a = std::abs(spec.omega[i]);
    if (a >= tol_zero && a < 10.0 * tol_zero)
      throw AmbiguousKernel("eigenvalue " + std::to_string(spec.omega[i]) +
                            " within [tol_zero, 10 tol_zero): tolerance too coarse");
  }
  Mat G = prob.gradient_modes_tilde(spec.kfrac);
  spec.zero_mode_indices.clear();
  spec.physical_indices.clear();
  spec.zero_span_residual = 0.0;
  for (int i = 0; i < spec.omega.size(); ++i) {
    if (std::abs(spec.omega[i]) < tol_zero) {
      Vec v = spec.vectors_tilde.col(i);
      double res = G.cols() > 0 ? (v - G * (G.adjoint() * v)).norm() : v.norm();
      if (res > span_tol)
        throw AmbiguousKernel("near-zero eigenvalue not in the gradient-mode span "
                              "(residual " + std::to_string(res) + ")");
      spec.zero_span_residual = std::max(spec.zero_span_residual, res);
      spec.zero_mode_indices.push_back(i);
    } else {
      spec.physical_indices.push_back(i);
    }
  }
}

// Spectrum cache; one instance is bound to a (weights, gmax) pair, the key
// completes to (weights hash, k, gmax) through key().
class SpectrumCache {
public:
  explicit SpectrumCache(const FiberProblem& prob) : prob_(&prob) {}

  size_t key() const {
    return prob_->weights().hash() ^ std::hash<double>()(prob_->basis().gmax());
  }

  const FiberSpectrum& at(const RVec& kfrac) {
    std::vector<double> k(kfrac.data(), kfrac.data() + kfrac.size());
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    FiberSpectrum s = solve_fiber(assemble_fiber(kfrac, *prob_));
    if (prob_->basis().components() > 1) classify_zero_modes(s);
    return cache_.emplace(std::move(k), std::move(s)).first->second;
  }

private:
  const FiberProblem* prob_;
  std::map<std::vector<double>, FiberSpectrum> cache_;
};

}  // namespace photonic
