#pragma once
// Independent reference computations used by unit and acceptance tests.
// Plain std::vector arithmetic only: nothing here shares code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // row-major
using Vector = std::vector<double>;

// Gaussian elimination with partial pivoting on a dense square system.
inline Vector solve(Matrix a, Vector b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-300) throw std::runtime_error("singular system");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// (X'WX) beta = X'Wy
inline Vector normal_equations(const Matrix& x, const Vector& y, const Vector& w) {
  const std::size_t p = x.front().size();
  Matrix a(p, Vector(p, 0.0));
  Vector b(p, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    for (std::size_t j = 0; j < p; ++j) {
      b[j] += wi * x[i][j] * y[i];
      for (std::size_t k = 0; k < p; ++k) a[j][k] += wi * x[i][j] * x[i][k];
    }
  }
  return solve(a, b);
}

inline double logistic_loglik(const Matrix& x, const Vector& y, const Vector& w, const Vector& beta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) eta += x[i][j] * beta[j];
    const double wi = w.empty() ? 1.0 : w[i];
    // y*eta - log(1+e^eta)
    const double soft = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    ll += wi * (y[i] * eta - soft);
  }
  return ll;
}

// Newton-Raphson on the full likelihood, with the full Hessian formed explicitly.
inline Vector newton_logistic(const Matrix& x, const Vector& y, const Vector& w, int iters = 200) {
  const std::size_t p = x.front().size();
  Vector beta(p, 0.0);
  for (int it = 0; it < iters; ++it) {
    Matrix h(p, Vector(p, 0.0));
    Vector g(p, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < p; ++j) eta += x[i][j] * beta[j];
      const double mu = 1.0 / (1.0 + std::exp(-eta));
      const double wi = w.empty() ? 1.0 : w[i];
      for (std::size_t j = 0; j < p; ++j) {
        g[j] += wi * (y[i] - mu) * x[i][j];
        for (std::size_t k = 0; k < p; ++k) h[j][k] += wi * mu * (1 - mu) * x[i][j] * x[i][k];
      }
    }
    const Vector step = solve(h, g);
    double size = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      beta[j] += step[j];
      size = std::max(size, std::abs(step[j]));
    }
    if (size < 1e-13) break;
  }
  return beta;
}

// kq_n = sum_{j<n} a^{n-1-j} r_j / (gamma + sum_{j<n} a^{n-1-j}), summed directly.
inline Vector direct_rolling_quality(const Vector& r, double gamma, double alpha) {
  Vector out(r.size(), 0.0);
  for (std::size_t n = 0; n < r.size(); ++n) {
    double num = 0.0, den = gamma;
    for (std::size_t j = 0; j < n; ++j) {
      const double wt = std::pow(alpha, static_cast<double>(n - 1 - j));
      num += wt * r[j];
      den += wt;
    }
    out[n] = n == 0 ? 0.0 : num / den;
  }
  return out;
}

// Cox-de Boor recursion evaluated directly from its definition.
inline double cox_de_boor(const Vector& knots, std::size_t i, int degree, double x, bool last_interval) {
  if (degree == 0) {
    if (knots[i] <= x && x < knots[i + 1]) return 1.0;
    // close the final non-empty interval on the right
    if (last_interval && x == knots[i + 1] && knots[i] < knots[i + 1]) return 1.0;
    return 0.0;
  }
  double v = 0.0;
  const double d1 = knots[i + degree] - knots[i];
  const double d2 = knots[i + degree + 1] - knots[i + 1];
  if (d1 > 0) v += (x - knots[i]) / d1 * cox_de_boor(knots, i, degree - 1, x, last_interval);
  if (d2 > 0) v += (knots[i + degree + 1] - x) / d2 * cox_de_boor(knots, i + 1, degree - 1, x, last_interval);
  return v;
}

}  // namespace oracle
