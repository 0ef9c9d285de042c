#pragma once

#include <optional>
#include <vector>

#include "photonic/fiber.hpp"
#include "photonic/lattice.hpp"

namespace photonic {

// O(n^3) Hungarian algorithm (potentials form); returns the row -> column
// assignment minimizing total cost of a square matrix.
inline std::vector<int> hungarian_assignment(const RMat& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = -1;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Physical eigenpairs at one k-node (zero modes stripped).
struct NodeSpectrum {
  RVec kfrac;
  RVec omega;   // ascending
  Mat vectors;  // tilde coordinates, columns aligned with omega
};

inline NodeSpectrum physical_spectrum(const FiberProblem& prob, const RVec& kfrac) {
  FiberSpectrum spec = solve_fiber(assemble_fiber(kfrac, prob));
  if (prob.basis().components() > 1) classify_zero_modes(spec);
  NodeSpectrum ns;
  ns.kfrac = kfrac;
  ns.omega.resize(spec.physical_indices.size());
  ns.vectors.resize(spec.vectors_tilde.rows(), spec.physical_indices.size());
  for (size_t i = 0; i < spec.physical_indices.size(); ++i) {
    ns.omega[i] = spec.omega[spec.physical_indices[i]];
    ns.vectors.col(i) = spec.vectors_tilde.col(spec.physical_indices[i]);
  }
  return ns;
}

// Band structure along a sequence of nodes: labels[i][b] is the slot (sorted
// index) of connected band b at node i, labels[0][b] = b.
struct BandStructure {
  std::vector<NodeSpectrum> nodes;
  std::vector<std::vector<int>> labels;
  double worst_overlap = 1.0;  // smallest matched |gram| along the connection

  double omega_of_band(int node, int band) const {
    return nodes[node].omega[labels[node][band]];
  }
};

// Assignment between adjacent nodes maximizing sum |<v_a, v_b>|^2. Both
// vector sets are orthonormal in tilde coordinates, where the weighted
// cross-Gram is the plain matrix product.
inline std::vector<int> match_bands(const Mat& va, const Mat& vb, double* worst = nullptr) {
  Mat gram = va.adjoint() * vb;
  RMat cost = -gram.cwiseAbs2();
  std::vector<int> asg = hungarian_assignment(cost);
  double w = 1.0;
  for (int i = 0; i < gram.rows(); ++i) w = std::min(w, std::abs(gram(i, asg[i])));
  if (w < 0.5)
    throw AmbiguousConnection("best assignment overlap " + std::to_string(w) +
                              " < 0.5 (grid too coarse or band crossing at node)");
  if (worst) *worst = std::min(*worst, w);
  return asg;
}

inline BandStructure connect_bands(std::vector<NodeSpectrum> nodes) {
  if (nodes.empty()) throw EmptyPath("no nodes to connect");
  BandStructure bs;
  bs.nodes = std::move(nodes);
  const int nb = static_cast<int>(bs.nodes.front().omega.size());
  bs.labels.resize(bs.nodes.size());
  bs.labels[0].resize(nb);
  for (int b = 0; b < nb; ++b) bs.labels[0][b] = b;
  for (size_t i = 0; i + 1 < bs.nodes.size(); ++i) {
    auto asg = match_bands(bs.nodes[i].vectors, bs.nodes[i + 1].vectors, &bs.worst_overlap);
    bs.labels[i + 1].resize(nb);
    for (int b = 0; b < nb; ++b) bs.labels[i + 1][b] = asg[bs.labels[i][b]];
  }
  return bs;
}

inline BandStructure connect_bands(const FiberProblem& prob, const KPath& path,
                                   int threads = 0) {
  std::vector<NodeSpectrum> nodes(path.size());
  parallel_for(path.size(), [&](int i) { nodes[i] = physical_spectrum(prob, path.frac(i)); },
               threads);
  return connect_bands(std::move(nodes));
}

// Physical spectra over a periodic k-grid; owns its grid.
struct GridSpectra {
  std::optional<KGrid> grid;
  const FiberProblem* problem = nullptr;
  std::vector<RVec> omega;
  std::vector<Mat> vectors;

  int bands() const { return static_cast<int>(omega.front().size()); }
};

inline GridSpectra solve_grid(const FiberProblem& prob, const KGrid& grid, int threads = 0) {
  GridSpectra gs;
  gs.grid = grid;
  gs.problem = &prob;
  gs.omega.resize(grid.size());
  gs.vectors.resize(grid.size());
  parallel_for(grid.size(), [&](int id) {
    NodeSpectrum ns = physical_spectrum(prob, grid.frac(id));
    gs.omega[id] = std::move(ns.omega);
    gs.vectors[id] = std::move(ns.vectors);
  }, threads);
  return gs;
}

struct BandSelection {
  std::vector<int> indices;                      // sorted band slots
  std::vector<std::pair<int, int>> families;     // contiguous [lo, hi] runs
  std::vector<double> cg_family;                 // gap constant per family
  double cg = 0.0;                               // min over families
  bool symmetric_flag = false;
  double symmetry_deviation = 0.0;
  double spectral_scale = 0.0;
};

// Gap-checked selection of relevant bands over a grid of spectra.
inline BandSelection select_relevant(const GridSpectra& gs, std::vector<int> indices,
                                     double tol_gs_rel = 1e-3) {
  if (indices.empty()) throw GapViolation("empty selection");
  std::sort(indices.begin(), indices.end());
  const int nb = gs.bands();
  for (int i : indices)
    if (i < 0 || i >= nb) throw GapViolation("band index out of range");

  BandSelection sel;
  sel.indices = indices;
  for (size_t i = 0; i < indices.size();) {
    size_t j = i;
    while (j + 1 < indices.size() && indices[j + 1] == indices[j] + 1) ++j;
    sel.families.push_back({indices[i], indices[j]});
    i = j + 1;
  }

  for (int id = 0; id < gs.grid->size(); ++id)
    for (int b : indices)
      sel.spectral_scale = std::max(sel.spectral_scale, std::abs(gs.omega[id][b]));

  // ground-state exclusion at the Gamma node first (Gap Condition iii: the
  // specific diagnosis for bands reaching omega = 0)
  double min_gamma = std::numeric_limits<double>::infinity();
  for (int b : indices) min_gamma = std::min(min_gamma, std::abs(gs.omega[0][b]));
  if (min_gamma <= tol_gs_rel * sel.spectral_scale)
    throw GroundStateBand("selected band reaches |omega(0)| = " + std::to_string(min_gamma));

  sel.cg_family.assign(sel.families.size(), std::numeric_limits<double>::infinity());
  for (int id = 0; id < gs.grid->size(); ++id) {
    const RVec& om = gs.omega[id];
    for (size_t f = 0; f < sel.families.size(); ++f) {
      auto [lo, hi] = sel.families[f];
      double d = std::numeric_limits<double>::infinity();
      for (int b = lo; b <= hi; ++b)
        for (int o = 0; o < nb; ++o) {
          if (o >= lo && o <= hi) continue;
          d = std::min(d, std::abs(om[b] - om[o]));
        }
      if (d <= 1e-12 * sel.spectral_scale) {
        std::string kstr;
        RVec k = gs.grid->frac(id);
        for (int j = 0; j < k.size(); ++j) kstr += (j ? "," : "") + std::to_string(k[j]);
        throw GapViolation("selected family touches its complement at k = (" + kstr + ")");
      }
      sel.cg_family[f] = std::min(sel.cg_family[f], d);
    }
  }
  sel.cg = *std::min_element(sel.cg_family.begin(), sel.cg_family.end());

  // spectral symmetry sigma_rel(-k) vs -sigma_rel(k), nodewise multisets
  sel.symmetry_deviation = 0.0;
  for (int id = 0; id < gs.grid->size(); ++id) {
    int nid = gs.grid->negate(id);
    std::vector<double> a, b;
    for (int s : indices) {
      a.push_back(gs.omega[nid][s]);
      b.push_back(-gs.omega[id][s]);
    }
    sel.symmetry_deviation = std::max(sel.symmetry_deviation, multiset_distance(a, b));
  }
  sel.symmetric_flag = sel.symmetry_deviation < 1e-8;
  return sel;
}

struct RealityCheck {
  bool symmetric = false;
  double deviation = 0.0;
};

// Quantitative version of the spectral reality criterion; real weights only.
inline RealityCheck check_reality_condition(const GridSpectra& gs, const BandSelection& sel) {
  if (!gs.problem->weights().real_flag())
    throw NotReal("reality condition is only meaningful for real weights; "
                  "gyrotropic crystals break the particle-hole symmetry");
  return RealityCheck{sel.symmetric_flag, sel.symmetry_deviation};
}

// Index of the symmetric twin band: the slot at -k whose value is closest to
// -omega_n(k), resolved at the first node where the match is unambiguous.
inline int twin_band_index(const GridSpectra& gs, int band) {
  for (int id = 0; id < gs.grid->size(); ++id) {
    int nid = gs.grid->negate(id);
    double target = -gs.omega[id][band];
    int best = -1, second = -1;
    double bd = std::numeric_limits<double>::infinity(), sd = bd;
    for (int s = 0; s < gs.bands(); ++s) {
      double d = std::abs(gs.omega[nid][s] - target);
      if (d < bd) {
        second = best; sd = bd;
        best = s; bd = d;
      } else if (d < sd) {
        second = s; sd = d;
      }
    }
    (void)second;
    if (sd > 1e-6 + 2.0 * bd) return best;
  }
  throw AmbiguousConnection("twin band could not be resolved unambiguously");
}

}  // namespace photonic
