#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace photonic {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx iu{0.0, 1.0};

// Base for all module errors; carries the spec-level error name so the CLI
// can report "exit 3: <name>" without string parsing.
class Error : public std::runtime_error {
public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

private:
  std::string name_;
};

#define PHOTONIC_DEFINE_ERROR(NAME)                          \
  class NAME : public Error {                                \
  public:                                                    \
    explicit NAME(const std::string& what) : Error(#NAME, what) {} \
  }

PHOTONIC_DEFINE_ERROR(SingularBasis);
PHOTONIC_DEFINE_ERROR(EmptyPath);
PHOTONIC_DEFINE_ERROR(NotPositive);
PHOTONIC_DEFINE_ERROR(NotReal);
PHOTONIC_DEFINE_ERROR(GramNotPositive);
PHOTONIC_DEFINE_ERROR(EigensolverFailure);
PHOTONIC_DEFINE_ERROR(AmbiguousKernel);
PHOTONIC_DEFINE_ERROR(AmbiguousConnection);
PHOTONIC_DEFINE_ERROR(GapViolation);
PHOTONIC_DEFINE_ERROR(GroundStateBand);
PHOTONIC_DEFINE_ERROR(NontrivialBundle);
PHOTONIC_DEFINE_ERROR(HolonomyTooLarge);
PHOTONIC_DEFINE_ERROR(PlaquetteSingular);
PHOTONIC_DEFINE_ERROR(GridMismatch);
PHOTONIC_DEFINE_ERROR(ContourTooClose);
PHOTONIC_DEFINE_ERROR(QuadratureUnconverged);
PHOTONIC_DEFINE_ERROR(IncommensurateFlux);
PHOTONIC_DEFINE_ERROR(SymbolNotHermitian);
PHOTONIC_DEFINE_ERROR(DegenerateBand);
PHOTONIC_DEFINE_ERROR(SingularSymplecticForm);
PHOTONIC_DEFINE_ERROR(BandNotIsolated);
PHOTONIC_DEFINE_ERROR(TooLarge);
PHOTONIC_DEFINE_ERROR(ConfigError);

#undef PHOTONIC_DEFINE_ERROR

// Fractional coordinate wrapped to the fundamental cell [-1/2, 1/2).
inline double wrap_frac(double x) {
  double w = x - std::floor(x + 0.5);
  if (w >= 0.5) w -= 1.0;  // guard against floor rounding at the boundary
  return w;
}

inline int mod_index(long i, int n) {
  long m = i % n;
  if (m < 0) m += n;
  return static_cast<int>(m);
}

inline double sq(double x) { return x * x; }

// Worker pool over [0, n). Thread count 0/1 runs inline; jobs write to
// disjoint output slots so results are deterministic regardless of pool size.
inline void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  int workers = std::min(threads, n);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline double frobenius(const Mat& m) { return m.norm(); }

inline double hermiticity_defect(const Mat& m) { return (m - m.adjoint()).norm(); }

// Hausdorff distance between two finite point sets on the real line.
inline double hausdorff(const std::vector<double>& a, const std::vector<double>& b) {
  auto one_sided = [](const std::vector<double>& u, const std::vector<double>& v) {
    double worst = 0.0;
    for (double x : u) {
      double best = std::numeric_limits<double>::infinity();
      for (double y : v) best = std::min(best, std::abs(x - y));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

// Distance between two eigenvalue multisets (sorted L-inf pairing).
inline double multiset_distance(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace photonic
