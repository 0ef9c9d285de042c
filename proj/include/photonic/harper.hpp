#pragma once

#include <functional>
#include <vector>

#include <Eigen/Eigenvalues>

#include <memory>

#include "photonic/symbol_grid.hpp"

namespace photonic {

// (r,k)-periodic matrix symbol in the quantization-friendly form f(r,k) =
// sum_m f_m(k) exp(i m (2 pi / L) r) with each r-mode evaluable at arbitrary
// k (closed form or trigonometric interpolation of grid data).
class HarperSymbol {
public:
  struct Mode {
    int m;
    std::function<Mat(double)> f;
  };

  double L = 1.0;          // macroscopic period, lattice constants
  double k_period = 2 * pi;
  int msize = 1;
  std::vector<Mode> modes;

  // Trigonometric interpolation of a periodic symbol grid: FFT in r for the
  // modes, FFT in k per mode for arbitrary-k evaluation.
  static HarperSymbol from_grid(const SymbolGrid& g, double threshold = 1e-12) {
    HarperSymbol s;
    s.L = g.r_period();
    s.k_period = g.k_period();
    s.msize = g.msize();
    const int nr = g.nr(), nk = g.nk();
    for (int m = -(nr - 1) / 2; m <= nr / 2; ++m) {
      // r-mode m on each k node
      std::vector<Mat> fm(nk, Mat::Zero(g.msize(), g.msize()));
      double weight = 0.0;
      for (int ik = 0; ik < nk; ++ik) {
        for (int ir = 0; ir < nr; ++ir)
          fm[ik] += g.at(ir, ik) * std::exp(-iu * (2 * pi * m * ir / static_cast<double>(nr)));
        fm[ik] /= static_cast<double>(nr);
        weight = std::max(weight, fm[ik].norm());
      }
      if (weight < threshold && m != 0) continue;
      // k-Fourier coefficients of the mode
      auto coeffs = std::make_shared<std::vector<Mat>>(nk, Mat::Zero(g.msize(), g.msize()));
      for (int q = 0; q < nk; ++q) {
        for (int ik = 0; ik < nk; ++ik)
          (*coeffs)[q] += fm[ik] * std::exp(-iu * (2 * pi * q * ik / static_cast<double>(nk)));
        (*coeffs)[q] /= static_cast<double>(nk);
      }
      double K = s.k_period;
      int nq = nk;
      int ms = s.msize;
      s.modes.push_back({m, [coeffs, K, nq, ms](double k) {
                           Mat v = Mat::Zero(ms, ms);
                           for (int q = 0; q < nq; ++q) {
                             int qc = q <= nq / 2 ? q : q - nq;  // centered harmonics
                             v += (*coeffs)[q] * std::exp(iu * (2 * pi * qc * k / K));
                           }
                           return v;
                         }});
    }
    return s;
  }

  // Twin-band symbol tau(r) diag(w(k), -w(-k)) from a band function and the
  // macroscopic Fourier modes of tau.
  static HarperSymbol twin_band(std::function<double(double)> band,
                                const std::vector<std::pair<int, cplx>>& tau_modes,
                                double L) {
    HarperSymbol s;
    s.L = L;
    s.msize = 2;
    for (auto [m, c] : tau_modes) {
      s.modes.push_back({m, [band, c](double k) {
                           Mat v = Mat::Zero(2, 2);
                           v(0, 0) = c * band(k);
                           v(1, 1) = -c * band(-k);
                           return v;
                         }});
    }
    return s;
  }

  static HarperSymbol single_band(std::function<double(double)> band,
                                  const std::vector<std::pair<int, cplx>>& tau_modes,
                                  double L) {
    HarperSymbol s;
    s.L = L;
    s.msize = 1;
    for (auto [m, c] : tau_modes)
      s.modes.push_back({m, [band, c](double k) { return Mat::Constant(1, 1, c * band(k)); }});
    return s;
  }
};

// Discrete Weyl quantization at rational flux lambda/L on an N_k-node k-grid:
// (Op psi)(k) = sum_m f_m(k - lambda pi m / L) psi(k - lambda 2 pi m / L),
// realized exactly when p = lambda N_k / L is an integer.
struct HarperOperator {
  Mat H;
  int nk = 0;
  int msize = 1;
  double lambda = 0.0;
  double L = 1.0;
  int p = 0;  // flux integer lambda N_k / L
  double hermiticity_defect = 0.0;
};

inline HarperOperator quantize(const HarperSymbol& sym, double lambda, int nk,
                               double herm_tol = 1e-10) {
  double p_real = lambda * nk / sym.L;
  int p = static_cast<int>(std::lround(p_real));
  if (std::abs(p_real - p) > 1e-9)
    throw IncommensurateFlux("lambda N_k / L = " + std::to_string(p_real) +
                             " is not an integer");
  const int ms = sym.msize;
  HarperOperator op;
  op.nk = nk;
  op.msize = ms;
  op.lambda = lambda;
  op.L = sym.L;
  op.p = p;
  op.H = Mat::Zero(nk * ms, nk * ms);
  double dk = sym.k_period / nk;
  for (const auto& mode : sym.modes) {
    int shift = mode.m * p;
    for (int j = 0; j < nk; ++j) {
      double k_mid = dk * (j - 0.5 * shift);
      Mat f = mode.f(k_mid);
      int jj = mod_index(j - shift, nk);
      op.H.block(j * ms, jj * ms, ms, ms) += f;
    }
  }
  op.hermiticity_defect = hermiticity_defect(op.H);
  if (op.hermiticity_defect > herm_tol * std::max(1.0, op.H.norm()))
    throw SymbolNotHermitian("quantized operator hermiticity defect " +
                             std::to_string(op.hermiticity_defect));
  op.H = 0.5 * (op.H + op.H.adjoint().eval());
  return op;
}

inline RVec harper_spectrum(const HarperOperator& op) {
  Eigen::SelfAdjointEigenSolver<Mat> es(op.H, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw EigensolverFailure("Harper eigensolver did not converge");
  return es.eigenvalues();
}

struct ButterflyPoint {
  double flux = 0.0;
  RVec eigenvalues;
};

// Spectrum against rational flux p/N_k (lambda = flux * L), monotone in flux.
inline std::vector<ButterflyPoint> butterfly_scan(const HarperSymbol& sym,
                                                  std::vector<int> flux_numerators, int nk,
                                                  int threads = 0) {
  std::sort(flux_numerators.begin(), flux_numerators.end());
  std::vector<ButterflyPoint> out(flux_numerators.size());
  parallel_for(static_cast<int>(flux_numerators.size()), [&](int i) {
    double flux = static_cast<double>(flux_numerators[i]) / nk;
    out[i].flux = flux;
    out[i].eigenvalues = harper_spectrum(quantize(sym, flux * sym.L, nk));
  }, threads);
  return out;
}

// Exact diagonal-phase gauge transform of quantization data: the discrete
// phase-increment rule that makes the quantized operators exactly unitarily
// equivalent (conjugation by diag(exp(i theta_n(k_j)))).
inline HarperSymbol gauge_transform(const HarperSymbol& sym,
                                    std::vector<std::function<double(double)>> theta,
                                    double lambda) {
  HarperSymbol out = sym;
  out.modes.clear();
  for (const auto& mode : sym.modes) {
    double half_shift = lambda * pi * mode.m / sym.L;
    auto th = theta;
    auto f = mode.f;
    int ms = sym.msize;
    out.modes.push_back({mode.m, [f, th, half_shift, ms](double k) {
                           Mat v = f(k);
                           for (int n = 0; n < ms; ++n)
                             for (int l = 0; l < ms; ++l)
                               v(n, l) *= std::exp(
                                   iu * (th[l](k - half_shift) - th[n](k + half_shift)));
                           return v;
                         }});
  }
  return out;
}

}  // namespace photonic
