#include <catch2/catch.hpp>

#include "photonic/harper.hpp"

using namespace photonic;

namespace {

double model_band(double k) { return 2.0 - std::cos(k); }

HarperSymbol twin_cosine(double delta, double L = 1.0) {
  return HarperSymbol::twin_band(model_band,
                                 {{0, 1.0}, {1, 0.5 * delta}, {-1, 0.5 * delta}}, L);
}

// brute-force mid-point operator from explicit shift and diagonal matrices;
// requires an even flux integer so half-shifts are exact node shifts
Mat shift_matrix_oracle(const HarperSymbol& sym, double lambda, int nk) {
  int p = static_cast<int>(std::lround(lambda * nk / sym.L));
  REQUIRE(p % 2 == 0);
  int ms = sym.msize;
  auto T = [&](int s) {  // (T_s psi)(k_j) = psi(k_{j-s})
    Mat t = Mat::Zero(nk * ms, nk * ms);
    for (int j = 0; j < nk; ++j)
      t.block(j * ms, mod_index(j - s, nk) * ms, ms, ms) = Mat::Identity(ms, ms);
    return t;
  };
  Mat H = Mat::Zero(nk * ms, nk * ms);
  double dk = sym.k_period / nk;
  for (const auto& mode : sym.modes) {
    Mat D = Mat::Zero(nk * ms, nk * ms);
    for (int j = 0; j < nk; ++j) D.block(j * ms, j * ms, ms, ms) = mode.f(dk * j);
    Mat half = T(mode.m * p / 2);
    H += half * D * half;
  }
  return H;
}

}  // namespace

TEST_CASE("m=0 symbol quantizes to a multiplication operator", "[harper]") {
  HarperSymbol sym = HarperSymbol::twin_band(model_band, {{0, 1.0}}, 1.0);
  int nk = 32;
  HarperOperator op = quantize(sym, 0.25, nk);
  RVec spec = harper_spectrum(op);
  std::vector<double> expect;
  for (int j = 0; j < nk; ++j) {
    double k = 2 * pi * j / nk;
    expect.push_back(model_band(k));
    expect.push_back(-model_band(-k));
  }
  REQUIRE(multiset_distance(std::vector<double>(spec.data(), spec.data() + spec.size()),
                            expect) < 1e-12);
}

TEST_CASE("shift-matrix oracle agrees with the midpoint quantization", "[harper]") {
  HarperSymbol sym = twin_cosine(0.2);
  int nk = 64;
  double lambda = 1.0 / 8.0;  // flux 1/8, p = 8 (even)
  HarperOperator op = quantize(sym, lambda, nk);
  Mat oracle = shift_matrix_oracle(sym, lambda, nk);
  REQUIRE((op.H - oracle).norm() < 1e-12);
  RVec sa = harper_spectrum(op);
  Eigen::SelfAdjointEigenSolver<Mat> es(oracle, Eigen::EigenvaluesOnly);
  REQUIRE((sa - es.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("twin-band Harper spectrum is particle-hole symmetric", "[harper]") {
  HarperSymbol sym = twin_cosine(0.3);
  RVec spec = harper_spectrum(quantize(sym, 0.125, 64));
  std::vector<double> plain(spec.data(), spec.data() + spec.size());
  std::vector<double> negated;
  for (double x : plain) negated.push_back(-x);
  REQUIRE(multiset_distance(plain, negated) < 1e-10);
}

TEST_CASE("incommensurate flux and non-hermitian symbols are rejected", "[harper]") {
  HarperSymbol sym = twin_cosine(0.2);
  REQUIRE_THROWS_AS(quantize(sym, 1.0 / 3.0, 64), IncommensurateFlux);

  HarperSymbol bad = HarperSymbol::twin_band(model_band, {{1, 0.5}}, 1.0);  // no -1 partner
  REQUIRE_THROWS_AS(quantize(bad, 0.125, 64), SymbolNotHermitian);
}

TEST_CASE("flux p/q spectrum splits into at most q |I| clusters", "[harper]") {
  HarperSymbol sym = twin_cosine(0.25);
  for (int q : {3, 4}) {
    int nk = 12 * q;
    RVec spec = harper_spectrum(quantize(sym, 1.0 / q, nk));
    std::vector<double> v(spec.data(), spec.data() + spec.size());
    std::sort(v.begin(), v.end());
    std::vector<double> gaps;
    for (size_t i = 1; i < v.size(); ++i) gaps.push_back(v[i] - v[i - 1]);
    std::vector<double> sorted_gaps = gaps;
    std::sort(sorted_gaps.begin(), sorted_gaps.end());
    double median = sorted_gaps[sorted_gaps.size() / 2];
    int clusters = 1;
    for (double g : gaps)
      if (g > 10.0 * median + 1e-12) ++clusters;
    REQUIRE(clusters <= 2 * q);
  }
}

TEST_CASE("gauge transform leaves the spectrum invariant", "[harper]") {
  HarperSymbol sym = twin_cosine(0.2);
  int nk = 64;
  double lambda = 0.125;
  RVec base = harper_spectrum(quantize(sym, lambda, nk));
  std::vector<std::function<double(double)>> theta{
      [](double k) { return 0.7 * std::sin(k) - 0.2 * std::cos(2 * k); },
      [](double k) { return -0.4 * std::sin(k); }};
  HarperSymbol gauged = gauge_transform(sym, theta, lambda);
  RVec trans = harper_spectrum(quantize(gauged, lambda, nk));
  REQUIRE((base - trans).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("lambda -> 0: spectrum approaches the symbol range", "[harper]") {
  HarperSymbol sym = twin_cosine(0.2);
  int nk = 64;
  // range of Meff,0 over the (r,k) grid
  std::vector<double> range;
  for (int j = 0; j < nk; ++j)
    for (int ir = 0; ir < 64; ++ir) {
      double k = 2 * pi * j / nk, tau = 1.0 + 0.2 * std::cos(2 * pi * ir / 64.0);
      range.push_back(tau * model_band(k));
      range.push_back(-tau * model_band(-k));
    }
  double prev = std::numeric_limits<double>::infinity();
  for (double lam : {0.25, 0.125, 0.0625}) {
    RVec spec = harper_spectrum(quantize(sym, lam, nk));
    double d = hausdorff(std::vector<double>(spec.data(), spec.data() + spec.size()), range);
    REQUIRE(d < prev);
    prev = d;
  }
}

TEST_CASE("delta -> 0 limit recovers the unperturbed band values", "[harper]") {
  int nk = 64;
  double lambda = 0.125;
  std::vector<double> bare;
  for (int j = 0; j < nk; ++j) {
    double k = 2 * pi * j / nk;
    bare.push_back(model_band(k));
    bare.push_back(-model_band(-k));
  }
  // perturbation-scale bound: ||H(delta) - H(0)|| <= delta max|band| = 3 delta
  double d_prev = 0.0;
  for (double delta : {0.1, 0.02}) {
    RVec spec = harper_spectrum(quantize(twin_cosine(delta), lambda, nk));
    double d =
        multiset_distance(std::vector<double>(spec.data(), spec.data() + spec.size()), bare);
    REQUIRE(d < 3.5 * delta);
    if (d_prev > 0.0) REQUIRE(d < d_prev);
    d_prev = d;
  }
}

TEST_CASE("flux and 1-flux spectra coincide for cosine-band symbols", "[harper]") {
  // the shift-conjugation duality holds for tau(r) cos(k)-type symbols; the
  // offset tau(r) (2 - cos k) twin symbol genuinely breaks it (the
  // tau-multiplied constant has no dual partner), verified by measurement
  HarperSymbol sc = HarperSymbol::single_band([](double k) { return -std::cos(k); },
                                              {{0, 1.0}, {1, 0.1}, {-1, 0.1}}, 1.0);
  int nk = 64;
  RVec a = harper_spectrum(quantize(sc, 1.0 / 8.0, nk));
  RVec b = harper_spectrum(quantize(sc, 7.0 / 8.0, nk));
  REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-10);

  HarperSymbol twin = twin_cosine(0.2);
  RVec c = harper_spectrum(quantize(twin, 1.0 / 8.0, nk));
  RVec d = harper_spectrum(quantize(twin, 7.0 / 8.0, nk));
  REQUIRE((c - d).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("operator-mean convention differs from midpoint at O(lambda^2)", "[harper]") {
  HarperSymbol sym = twin_cosine(0.2);
  int nk = 64;
  auto opmean = [&](double lambda) {
    int p = static_cast<int>(std::lround(lambda * nk / sym.L));
    int ms = sym.msize;
    Mat A = Mat::Zero(nk * ms, nk * ms);
    double dk = sym.k_period / nk;
    for (const auto& mode : sym.modes)
      for (int j = 0; j < nk; ++j) {
        int jj = mod_index(j - mode.m * p, nk);
        A.block(j * ms, jj * ms, ms, ms) += mode.f(dk * jj);  // tau(i lambda d/dk) D
      }
    return Mat(0.5 * (A + A.adjoint()));
  };
  double d1 = (quantize(sym, 0.25, nk).H - opmean(0.25)).norm();
  double d2 = (quantize(sym, 0.125, nk).H - opmean(0.125)).norm();
  REQUIRE(d1 > 1e-6);
  double ratio = d1 / d2;
  REQUIRE(ratio > 2.5);
  REQUIRE(ratio < 6.0);
}

TEST_CASE("symbol from a grid round-trips through quantization", "[harper]") {
  // tau(r) (2 - cos k) sampled on a grid, reconstructed, and compared with
  // the closed-form symbol's quantization
  HarperSymbol closed = HarperSymbol::single_band(
      model_band, {{0, 1.0}, {1, 0.1}, {-1, 0.1}}, 2.0);
  SymbolGrid g = SymbolGrid::sample(16, 2.0, 64, 2 * pi, 0, 1, [](double r, double k) {
    double tau = 1.0 + 0.2 * std::cos(2 * pi * r / 2.0);
    return Mat::Constant(1, 1, tau * model_band(k));
  });
  HarperSymbol from_grid = HarperSymbol::from_grid(g);
  HarperOperator a = quantize(closed, 0.25, 64);
  HarperOperator b = quantize(from_grid, 0.25, 64);
  REQUIRE((a.H - b.H).norm() < 1e-10);
}
