#pragma once

// Reference implementations used to check the library. They are written
// from the defining formulas and deliberately share no code with it.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "deeppet/geometry.hpp"

namespace oracle {

/// Row-major dense matrix.
struct Dense {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Dense(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(rows), 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) y[i] += at(i, j) * x[j];
    return y;
  }
  std::vector<double> apply_t(const std::vector<double>& y) const {
    std::vector<double> x(static_cast<std::size_t>(cols), 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) x[j] += at(i, j) * y[i];
    return x;
  }
  Dense times(const Dense& o) const {
    Dense m(rows, o.cols);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < cols; ++k) {
        const double v = at(i, k);
        if (v == 0.0) continue;
        for (int j = 0; j < o.cols; ++j) m.at(i, j) += v * o.at(k, j);
      }
    return m;
  }
};

inline double tent(double t) { return std::max(0.0, 1.0 - std::abs(t)); }

/// Joseph-method system matrix written as a sum of tent functions: for each
/// LOR the line is sampled once per pixel row (or column, whichever axis the
/// line is closer to perpendicular to) and each sample spreads to pixels by
/// the linear-interpolation tent, times the path length per step.
inline Dense joseph_matrix(const deeppet::ImageGrid& grid, const deeppet::SinogramGeometry& geom) {
  const int n = grid.n;
  const double px = grid.fov_mm / n;
  const double mid = (n - 1) / 2.0;
  Dense m(geom.n_angles * geom.n_radial, n * n);
  for (int a = 0; a < geom.n_angles; ++a) {
    const double th = std::numbers::pi * a / geom.n_angles;
    const double c = std::cos(th);
    const double s = std::sin(th);
    for (int r = 0; r < geom.n_radial; ++r) {
      const double off = (r - (geom.n_radial - 1) / 2.0) * geom.radial_spacing_mm;
      const int bin = a * geom.n_radial + r;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double x = (j - mid) * px;
          const double y = (mid - i) * px;
          double w = 0.0;
          if (std::abs(c) >= std::abs(s)) {
            // Line crosses row i at column coordinate (off - y s) / (c px) + mid.
            w = tent((off - y * s) / (c * px) + mid - j) * px / std::abs(c);
          } else {
            w = tent(mid - (off - x * c) / (s * px) - i) * px / std::abs(s);
          }
          m.at(bin, i * n + j) = w;
        }
      }
    }
  }
  return m;
}

/// Truncated (+-4 sigma), unit-sum sampled Gaussian.
inline std::vector<double> gaussian_taps(double sigma) {
  const int rad = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k;
  double total = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    k.push_back(std::exp(-(i * i) / (2.0 * sigma * sigma)));
    total += k.back();
  }
  for (double& v : k) v /= total;
  return k;
}

/// Dense 2D Gaussian blur operator on an n x n image with zero boundary.
inline Dense blur_matrix(int n, double fwhm_mm, double px) {
  Dense m(n * n, n * n);
  if (fwhm_mm == 0.0) {
    for (int i = 0; i < n * n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  const double sigma = fwhm_mm / (2.0 * std::sqrt(2.0 * std::log(2.0))) / px;
  const auto k = gaussian_taps(sigma);
  const int rad = static_cast<int>(k.size() / 2);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      for (int dr = -rad; dr <= rad; ++dr)
        for (int dc = -rad; dc <= rad; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
          m.at(r * n + c, rr * n + cc) = k[dr + rad] * k[dc + rad];
        }
  return m;
}

inline Dense system_matrix(const deeppet::ImageGrid& grid, const deeppet::SinogramGeometry& geom, double psf_fwhm_mm) {
  const Dense a = joseph_matrix(grid, geom);
  if (psf_fwhm_mm == 0.0) return a;
  return a.times(blur_matrix(grid.n, psf_fwhm_mm, grid.fov_mm / grid.n));
}

/// Dense EM iteration: f <- f / (A^T 1) * A^T (g / (A f + gamma)), with the
/// divisions guarded at eps * max and zero pixels left at zero.
inline std::vector<double> mlem(const Dense& a, const std::vector<double>& g, const std::vector<double>& gamma,
                                std::vector<double> f, int iterations, double eps = 1e-12) {
  const std::vector<double> sens = a.apply_t(std::vector<double>(g.size(), 1.0));
  double smax = 0.0;
  for (double v : sens) smax = std::max(smax, std::abs(v));
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> e = a.apply(f);
    double emax = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      e[i] += gamma[i];
      emax = std::max(emax, std::abs(e[i]));
    }
    const double fl = emax > 0.0 ? eps * emax : eps;
    std::vector<double> ratio(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) ratio[i] = g[i] / std::max(e[i], fl);
    const std::vector<double> back = a.apply_t(ratio);
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = f[p] == 0.0 ? 0.0 : f[p] / sens[p] * back[p];
  }
  return f;
}

/// sum_i g_i log m_i - m_i.
inline double poisson_loglik(const std::vector<double>& mean, const std::vector<double>& g) {
  double l = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) l += (g[i] > 0.0 ? g[i] * std::log(mean[i]) : 0.0) - mean[i];
  return l;
}

/// Chord length of a centred disc of radius R at signed offset s.
inline double disc_chord(double radius, double s) {
  return std::abs(s) < radius ? 2.0 * std::sqrt(radius * radius - s * s) : 0.0;
}

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

inline double norm(const std::vector<double>& x) { return std::sqrt(dot(x, x)); }

}  // namespace oracle
