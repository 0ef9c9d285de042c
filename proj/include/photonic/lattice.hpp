#pragma once

#include <array>
#include <vector>

#include "photonic/common.hpp"

namespace photonic {

// Bravais lattice with dual basis e_j . e*_n = 2 pi delta_jn. Fractional
// coordinates (coefficients on the dual basis for k, on the basis for r) are
// canonical everywhere in the library; Cartesian vectors appear only at I/O
// boundaries and when geometric lengths are needed.
class Lattice {
public:
  Lattice(int dim, RMat basis) : dim_(dim), basis_(std::move(basis)) {
    if (dim_ < 1 || dim_ > 3) throw SingularBasis("lattice dim must be 1, 2 or 3");
    if (basis_.rows() != dim_ || basis_.cols() != dim_)
      throw SingularBasis("basis must be dim x dim (columns = e_j)");
    double scale = basis_.cwiseAbs().maxCoeff();
    double det = basis_.determinant();
    if (std::abs(det) < 1e-12 * std::pow(scale, dim_))
      throw SingularBasis("basis determinant below 1e-12 x scale");
    dual_ = 2.0 * pi * basis_.inverse().transpose();
  }

  int dim() const { return dim_; }
  // Column j is e_j.
  const RMat& basis() const { return basis_; }
  // Column j is e*_j.
  const RMat& dual_basis() const { return dual_; }

  // max_jn |e_j . e*_n - 2 pi delta_jn|, for the biorthogonality invariant.
  double biorthogonality_defect() const {
    RMat g = basis_.transpose() * dual_;
    g.diagonal().array() -= 2.0 * pi;
    return g.cwiseAbs().maxCoeff();
  }

  RVec k_cartesian(const RVec& frac) const { return dual_ * frac; }
  RVec r_cartesian(const RVec& frac) const { return basis_ * frac; }

private:
  int dim_;
  RMat basis_;
  RMat dual_;
};

inline Lattice build_lattice(const RMat& basis) {
  return Lattice(static_cast<int>(basis.rows()), basis);
}

inline Lattice cubic_lattice(int dim, double a = 1.0) {
  return Lattice(dim, RMat::Identity(dim, dim) * a);
}

// Uniform periodic k-grid, nodes k = sum_j (m_j/N_j) e*_j with the fractional
// coefficients wrapped to [-1/2, 1/2). Node 0 is the Gamma point.
class KGrid {
public:
  KGrid(const Lattice& lat, std::vector<int> counts)
      : lattice_(lat), counts_(std::move(counts)) {
    if (static_cast<int>(counts_.size()) != lat.dim())
      throw GridMismatch("counts size must equal lattice dim");
    total_ = 1;
    for (int c : counts_) {
      if (c < 1) throw GridMismatch("counts must be >= 1");
      total_ *= c;
    }
  }

  const Lattice& lattice() const { return lattice_; }
  int dim() const { return lattice_.dim(); }
  const std::vector<int>& counts() const { return counts_; }
  int size() const { return total_; }

  // Multi-index of node id, row-major with the first axis slowest.
  std::vector<int> indices(int id) const {
    std::vector<int> ix(counts_.size());
    for (int j = static_cast<int>(counts_.size()) - 1; j >= 0; --j) {
      ix[j] = id % counts_[j];
      id /= counts_[j];
    }
    return ix;
  }

  int node_id(const std::vector<int>& ix) const {
    int id = 0;
    for (size_t j = 0; j < counts_.size(); ++j)
      id = id * counts_[j] + mod_index(ix[j], counts_[j]);
    return id;
  }

  // Node id shifted by `step` along axis, with periodic wrap.
  int neighbor(int id, int axis, int step) const {
    auto ix = indices(id);
    ix[axis] += step;
    return node_id(ix);
  }

  // Fractional coordinates in [-1/2, 1/2)^dim.
  RVec frac(int id) const {
    auto ix = indices(id);
    RVec f(counts_.size());
    for (size_t j = 0; j < counts_.size(); ++j)
      f[j] = wrap_frac(static_cast<double>(ix[j]) / counts_[j]);
    return f;
  }

  // Unwrapped fractional coordinates m_j/N_j in [0,1); useful when marching
  // along an axis without jumps.
  RVec frac_unwrapped(int id) const {
    auto ix = indices(id);
    RVec f(counts_.size());
    for (size_t j = 0; j < counts_.size(); ++j)
      f[j] = static_cast<double>(ix[j]) / counts_[j];
    return f;
  }

  // Node id of -k (exact on the grid).
  int negate(int id) const {
    auto ix = indices(id);
    for (size_t j = 0; j < counts_.size(); ++j) ix[j] = -ix[j];
    return node_id(ix);
  }

private:
  Lattice lattice_;  // by value: grids outlive the lattice objects they came from
  std::vector<int> counts_;
  int total_;
};

inline KGrid make_kgrid(const Lattice& lat, std::vector<int> counts) {
  return KGrid(lat, std::move(counts));
}

// Piecewise-linear path through waypoints (fractional coordinates); samples
// per segment counts both endpoints, shared corners are deduplicated.
class KPath {
public:
  KPath(const Lattice& lat, const std::vector<RVec>& waypoints, int samples_per_segment)
      : lattice_(lat) {
    if (waypoints.size() < 2) throw EmptyPath("need at least 2 waypoints");
    if (samples_per_segment < 2) throw EmptyPath("need at least 2 samples per segment");
    for (size_t s = 0; s + 1 < waypoints.size(); ++s) {
      const RVec& a = waypoints[s];
      const RVec& b = waypoints[s + 1];
      for (int i = (s == 0 ? 0 : 1); i < samples_per_segment; ++i) {
        double t = static_cast<double>(i) / (samples_per_segment - 1);
        nodes_.push_back(a + t * (b - a));
      }
    }
    arc_.resize(nodes_.size(), 0.0);
    for (size_t i = 1; i < nodes_.size(); ++i) {
      RVec d = lat.k_cartesian(nodes_[i]) - lat.k_cartesian(nodes_[i - 1]);
      arc_[i] = arc_[i - 1] + d.norm();
    }
  }

  const Lattice& lattice() const { return lattice_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const RVec& frac(int i) const { return nodes_[i]; }
  double arc_length(int i) const { return arc_[i]; }

private:
  Lattice lattice_;
  std::vector<RVec> nodes_;
  std::vector<double> arc_;
};

inline KPath make_kpath(const Lattice& lat, const std::vector<RVec>& waypoints, int samples) {
  return KPath(lat, waypoints, samples);
}

}  // namespace photonic
