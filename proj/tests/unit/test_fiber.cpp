#include <catch2/catch.hpp>

#include <random>

#include "photonic/fiber.hpp"

using namespace photonic;

namespace {

std::vector<double> expected_vacuum_3d(const PlaneWaveBasis& bs, const RVec& k) {
  std::vector<double> e;
  for (int gi = 0; gi < bs.ng(); ++gi) {
    double q = bs.q_cartesian(k, gi).norm();
    e.push_back(q);
    e.push_back(q);
    e.push_back(-q);
    e.push_back(-q);
    e.push_back(0.0);
    e.push_back(0.0);
  }
  return e;
}

}  // namespace

TEST_CASE("basis counting", "[fiber]") {
  Lattice l1 = cubic_lattice(1, 1.0);
  REQUIRE(build_basis(l1, 2.5 * 2 * pi).ng() == 5);
  Lattice l3 = cubic_lattice(3, 1.0);
  REQUIRE(build_basis(l3, 1.5 * 2 * pi).ng() == 19);
  REQUIRE(build_basis(l3, 1e-3).ng() == 1);
  // closed under negation
  PlaneWaveBasis bs = build_basis(l3, 1.5 * 2 * pi);
  for (int i = 0; i < bs.ng(); ++i) REQUIRE(bs.negation_index(i) >= 0);
}

TEST_CASE("vacuum fiber: B = I, R singular values |k+G|", "[fiber]") {
  Lattice lat = cubic_lattice(3, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 1.5 * 2 * pi);
  MaterialWeights w = vacuum_weights(3);
  FiberProblem prob(bs, w);
  RVec k(3);
  k << 0.3, -0.21, 0.11;
  FiberOperator op = assemble_fiber(k, prob);
  REQUIRE((op.B() - Mat::Identity(bs.size(), bs.size())).norm() < 1e-12);
  REQUIRE(hermiticity_defect(op.R) < 1e-12);
}

TEST_CASE("vacuum 3D dispersion with transverse multiplicity 2", "[fiber]") {
  Lattice lat = cubic_lattice(3, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 1.5 * 2 * pi);
  MaterialWeights w = vacuum_weights(3);
  FiberProblem prob(bs, w);
  RVec k(3);
  k << 0.3, 0.0, 0.0;
  FiberSpectrum spec = solve_fiber(assemble_fiber(k, prob));
  auto expect = expected_vacuum_3d(bs, k);
  double scale = spec.omega.cwiseAbs().maxCoeff();
  REQUIRE(multiset_distance(spec.eigenvalues(), expect) < 1e-9 * scale);
}

TEST_CASE("vacuum 1D dispersion is exactly +-(k+G)", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 2.5 * 2 * pi);
  MaterialWeights w = vacuum_weights(1);
  FiberProblem prob(bs, w);
  RVec k = RVec::Constant(1, 0.17);
  FiberSpectrum spec = solve_fiber(assemble_fiber(k, prob));
  std::vector<double> expect;
  for (int gi = 0; gi < bs.ng(); ++gi) {
    double q = bs.q_cartesian(k, gi)[0];
    expect.push_back(q);
    expect.push_back(-q);
  }
  REQUIRE(multiset_distance(spec.eigenvalues(), expect) < 1e-10);
}

TEST_CASE("layered 1D Gram is the Toeplitz {1/2, 2, 1/2}", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 3.5 * 2 * pi);
  MaterialWeights w = layered_weights_1d(2.0, 0.5);
  FiberProblem prob(bs, w);
  const Mat& B = prob.B();
  // E block: entries eps_hat(G-G')
  for (int a = 0; a < bs.ng(); ++a)
    for (int b = 0; b < bs.ng(); ++b) {
      int d = bs.g(a)[0] - bs.g(b)[0];
      double expect = d == 0 ? 2.0 : (std::abs(d) == 1 ? 0.5 : 0.0);
      REQUIRE(std::abs(B(bs.e_index(a, 0), bs.e_index(b, 0)) - expect) < 1e-14);
      double mu_expect = d == 0 ? 1.0 : 0.0;
      REQUIRE(std::abs(B(bs.h_index(a, 0), bs.h_index(b, 0)) - mu_expect) < 1e-14);
    }
}

TEST_CASE("eigen residual and B-orthonormality", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 6.5 * 2 * pi);
  MaterialWeights w = layered_weights_1d(2.0, 0.5);
  FiberProblem prob(bs, w);
  RVec k = RVec::Constant(1, 0.23);
  FiberOperator op = assemble_fiber(k, prob);
  FiberSpectrum spec = solve_fiber(op);
  Mat V_pw(bs.size(), bs.size());
  for (int n = 0; n < bs.size(); ++n) V_pw.col(n) = spec.vector_pw(n);
  Mat gram = V_pw.adjoint() * op.B() * V_pw;
  REQUIRE((gram - Mat::Identity(bs.size(), bs.size())).norm() < 1e-10);
  double rnorm = op.R.norm();
  for (int n = 0; n < bs.size(); ++n) {
    Vec resid = op.R * V_pw.col(n) - spec.omega[n] * (op.B() * V_pw.col(n));
    REQUIRE(resid.norm() <= 1e-9 * rnorm);
  }
}

TEST_CASE("equivariance: spectra at k and k - e*1 agree", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 10.5 * 2 * pi);
  MaterialWeights w = layered_weights_1d(2.0, 0.5);
  FiberProblem prob(bs, w);
  RVec k = RVec::Constant(1, 0.31);
  RVec ks = RVec::Constant(1, 0.31 - 1.0);
  auto sa = solve_fiber(assemble_fiber(k, prob));
  auto sb = solve_fiber(assemble_fiber(ks, prob));
  // the relabeling permutation is exact away from the cutoff boundary, so
  // low bands agree to machine precision; compare the 6 smallest |omega|
  auto low = [&](const FiberSpectrum& s) {
    std::vector<double> v = s.eigenvalues();
    std::sort(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    v.resize(6);
    std::sort(v.begin(), v.end());
    return v;
  };
  REQUIRE(multiset_distance(low(sa), low(sb)) < 1e-10);
}

TEST_CASE("zero-mode census in vacuum 3D", "[fiber]") {
  Lattice lat = cubic_lattice(3, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 1.5 * 2 * pi);
  MaterialWeights w = vacuum_weights(3);
  FiberProblem prob(bs, w);

  RVec k(3);
  k << 0.21, 0.13, -0.09;
  FiberSpectrum spec = solve_fiber(assemble_fiber(k, prob));
  classify_zero_modes(spec);
  REQUIRE(static_cast<int>(spec.zero_mode_indices.size()) == 2 * bs.ng());
  REQUIRE(spec.zero_span_residual < 1e-8);

  FiberSpectrum g = solve_fiber(assemble_fiber(RVec::Zero(3), prob));
  classify_zero_modes(g);
  REQUIRE(static_cast<int>(g.zero_mode_indices.size()) == 2 * bs.ng() + 4);
}

TEST_CASE("1D reduced model has no zero modes at k != 0", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 3.5 * 2 * pi);
  MaterialWeights w = layered_weights_1d(2.0, 0.5);
  FiberProblem prob(bs, w);
  FiberSpectrum spec = solve_fiber(assemble_fiber(RVec::Constant(1, 0.2), prob));
  classify_zero_modes(spec);
  REQUIRE(spec.zero_mode_indices.empty());
}

TEST_CASE("weighted inner product: conjugate symmetry and Cauchy-Schwarz", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 3.5 * 2 * pi);
  MaterialWeights w = layered_weights_1d(2.0, 0.5);
  FiberProblem prob(bs, w);
  std::mt19937 rng(1234);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 8; ++trial) {
    Vec a(bs.size()), b(bs.size());
    for (int i = 0; i < bs.size(); ++i) {
      a[i] = cplx(dist(rng), dist(rng));
      b[i] = cplx(dist(rng), dist(rng));
    }
    cplx ab = weighted_inner(a, b, prob.B());
    cplx ba = weighted_inner(b, a, prob.B());
    REQUIRE(std::abs(ab - std::conj(ba)) < 1e-14 * std::abs(ab) + 1e-12);
    double na = std::sqrt(weighted_inner(a, a, prob.B()).real());
    double nb = std::sqrt(weighted_inner(b, b, prob.B()).real());
    REQUIRE(std::abs(ab) <= na * nb * (1 + 1e-13));
  }
  // vacuum unit vector norm
  FiberProblem vac(bs, vacuum_weights(1));
  Vec e1 = Vec::Zero(bs.size());
  e1[0] = 1.0;
  REQUIRE(weighted_inner(e1, e1, vac.B()).real() == Approx(1.0));
}

TEST_CASE("particle-hole symmetry for real weights; broken by gyrotropy", "[fiber]") {
  // real 1D crystal: sigma(-k) = -sigma(k)
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 5.5 * 2 * pi);
  FiberProblem prob(bs, layered_weights_1d(2.0, 0.5));
  for (double kf : {0.11, 0.27, 0.44}) {
    auto sp = solve_fiber(assemble_fiber(RVec::Constant(1, kf), prob));
    auto sm = solve_fiber(assemble_fiber(RVec::Constant(1, -kf), prob));
    std::vector<double> neg;
    for (double x : sm.eigenvalues()) neg.push_back(-x);
    REQUIRE(multiset_distance(sp.eigenvalues(), neg) < 1e-9 * sp.omega.cwiseAbs().maxCoeff());
  }

  // symmetric twin eigenvector: conj(phi(-k)) is an eigenvector at k with -omega(-k)
  RVec k = RVec::Constant(1, 0.31);
  auto sp = solve_fiber(assemble_fiber(k, prob));
  auto sm = solve_fiber(assemble_fiber(-k, prob));
  Mat C = prob.conjugation_matrix_tilde();
  Mat H = prob.operator_tilde(k);
  for (int n : {3, 4, 5}) {
    Vec twin = C * sm.vectors_tilde.col(n).conjugate();
    Vec resid = H * twin + sm.omega[n] * twin;
    REQUIRE(resid.norm() < 1e-9 * H.norm());
  }
}

TEST_CASE("layered low bands are Cauchy in the cutoff", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  MaterialWeights w = layered_weights_1d(2.0, 0.5);
  RVec k = RVec::Constant(1, 0.19);
  std::vector<double> gaps;
  double prev[4];
  bool have_prev = false;
  double change_prev = 0.0;
  for (double cut : {5.5, 10.5, 20.5}) {
    PlaneWaveBasis bs = build_basis(lat, cut * 2 * pi);
    FiberProblem prob(bs, w);
    auto spec = solve_fiber(assemble_fiber(k, prob));
    // four lowest positive bands
    double cur[4];
    int j = 0;
    for (int i = 0; i < spec.omega.size() && j < 4; ++i)
      if (spec.omega[i] > 1e-9) cur[j++] = spec.omega[i];
    if (have_prev) {
      double change = 0.0;
      for (int t = 0; t < 4; ++t) change = std::max(change, std::abs(cur[t] - prev[t]));
      if (change_prev > 0.0) REQUIRE(change < change_prev);
      change_prev = std::max(change, 1e-16);
    }
    for (int t = 0; t < 4; ++t) prev[t] = cur[t];
    have_prev = true;
  }
}

TEST_CASE("spectrum cache returns identical data", "[fiber]") {
  Lattice lat = cubic_lattice(1, 1.0);
  PlaneWaveBasis bs = build_basis(lat, 3.5 * 2 * pi);
  FiberProblem prob(bs, layered_weights_1d(2.0, 0.5));
  SpectrumCache cache(prob);
  const auto& a = cache.at(RVec::Constant(1, 0.2));
  const auto& b = cache.at(RVec::Constant(1, 0.2));
  REQUIRE(&a == &b);
}
