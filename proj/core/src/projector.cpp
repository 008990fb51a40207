#include "deeppet/projector.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace deeppet {

namespace {

std::vector<double> gaussian_kernel(double sigma_samples) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_samples));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma_samples * sigma_samples));
  }
  const double total = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= total;
  return k;
}

// out[i] = sum_k in[i + k - radius] * kernel[k], zero outside [0, n).
void convolve_line(const double* in, double* out, int n, std::ptrdiff_t stride, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const int lo = std::max(0, i - radius);
    const int hi = std::min(n - 1, i + radius);
    for (int j = lo; j <= hi; ++j) acc += in[j * stride] * kernel[j - i + radius];
    out[i * stride] = acc;
  }
}

void check_fwhm(double fwhm_mm, double spacing) {
  if (!(fwhm_mm >= 0.0)) throw DomainError("gaussian blur needs fwhm >= 0");
  if (!(spacing > 0.0)) throw DomainError("gaussian blur needs positive sample spacing");
}

}  // namespace

Image gaussian_blur(const Image& img, double fwhm_mm, double pixel_mm) {
  check_fwhm(fwhm_mm, pixel_mm);
  if (fwhm_mm == 0.0) return img;
  const auto kernel = gaussian_kernel(fwhm_mm * kFwhmToSigma / pixel_mm);
  Image tmp(img.rows(), img.cols());
  Image out(img.rows(), img.cols());
  for (int r = 0; r < img.rows(); ++r) convolve_line(img.row(r).data(), &tmp(r, 0), img.cols(), 1, kernel);
  for (int c = 0; c < img.cols(); ++c) convolve_line(&tmp(0, c), &out(0, c), img.rows(), img.cols(), kernel);
  return out;
}

Sinogram gaussian_blur_radial(const Sinogram& sino, double fwhm_mm, double bin_mm) {
  check_fwhm(fwhm_mm, bin_mm);
  if (fwhm_mm == 0.0) return sino;
  const auto kernel = gaussian_kernel(fwhm_mm * kFwhmToSigma / bin_mm);
  Sinogram out(sino.rows(), sino.cols());
  for (int a = 0; a < sino.rows(); ++a) convolve_line(sino.row(a).data(), &out(a, 0), sino.cols(), 1, kernel);
  return out;
}

SystemOperator::SystemOperator(ImageGrid grid, SinogramGeometry geom, double psf_fwhm_mm)
    : grid_(grid), geom_(geom), psf_fwhm_mm_(psf_fwhm_mm), all_angles_(static_cast<std::size_t>(geom.n_angles)) {
  grid_.validate();
  geom_.validate();
  if (!(psf_fwhm_mm >= 0.0)) throw DomainError("psf_fwhm_mm must be >= 0");
  std::iota(all_angles_.begin(), all_angles_.end(), 0);
}

void SystemOperator::check_image(const Image& f) const {
  if (f.rows() != grid_.n || f.cols() != grid_.n) throw DomainError("image does not match the operator's grid");
}

void SystemOperator::check_sinogram(const Sinogram& g) const {
  if (g.rows() != geom_.n_angles || g.cols() != geom_.n_radial) {
    throw DomainError("sinogram does not match the operator's geometry");
  }
}

// Both traversals below enumerate, for every bin (a, r), the same ordered list
// of (pixel, weight) samples, so backproject_rows is the exact transpose of
// project_rows.
void SystemOperator::project_rows(const Image& f, Sinogram& out, std::span<const int> angles) const {
  const int n = grid_.n;
  const double px = grid_.pixel_mm();
  const double centre = 0.5 * (n - 1);
  for (int a : angles) {
    if (a < 0 || a >= geom_.n_angles) throw DomainError("angle index out of range");
    const double theta = geom_.angle(a);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const bool row_major = std::abs(cs) >= std::abs(sn);
    const double step = px / (row_major ? std::abs(cs) : std::abs(sn));
    for (int r = 0; r < geom_.n_radial; ++r) {
      const double s = geom_.offset_mm(r);
      double acc = 0.0;
      if (row_major) {
        for (int i = 0; i < n; ++i) {
          const double y = grid_.y_of_row(i);
          const double u = (s - y * sn) / (cs * px) + centre;
          const int c0 = static_cast<int>(std::floor(u));
          const double w = u - c0;
          if (c0 >= 0 && c0 < n) acc += (1.0 - w) * f(i, c0);
          if (c0 + 1 >= 0 && c0 + 1 < n) acc += w * f(i, c0 + 1);
        }
      } else {
        for (int j = 0; j < n; ++j) {
          const double x = grid_.x_of_col(j);
          const double v = centre - (s - x * cs) / (sn * px);
          const int r0 = static_cast<int>(std::floor(v));
          const double w = v - r0;
          if (r0 >= 0 && r0 < n) acc += (1.0 - w) * f(r0, j);
          if (r0 + 1 >= 0 && r0 + 1 < n) acc += w * f(r0 + 1, j);
        }
      }
      out(a, r) = acc * step;
    }
  }
}

void SystemOperator::backproject_rows(const Sinogram& g, Image& out, std::span<const int> angles) const {
  const int n = grid_.n;
  const double px = grid_.pixel_mm();
  const double centre = 0.5 * (n - 1);
  for (int a : angles) {
    if (a < 0 || a >= geom_.n_angles) throw DomainError("angle index out of range");
    const double theta = geom_.angle(a);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const bool row_major = std::abs(cs) >= std::abs(sn);
    const double step = px / (row_major ? std::abs(cs) : std::abs(sn));
    for (int r = 0; r < geom_.n_radial; ++r) {
      const double val = g(a, r) * step;
      if (val == 0.0) continue;
      const double s = geom_.offset_mm(r);
      if (row_major) {
        for (int i = 0; i < n; ++i) {
          const double y = grid_.y_of_row(i);
          const double u = (s - y * sn) / (cs * px) + centre;
          const int c0 = static_cast<int>(std::floor(u));
          const double w = u - c0;
          if (c0 >= 0 && c0 < n) out(i, c0) += (1.0 - w) * val;
          if (c0 + 1 >= 0 && c0 + 1 < n) out(i, c0 + 1) += w * val;
        }
      } else {
        for (int j = 0; j < n; ++j) {
          const double x = grid_.x_of_col(j);
          const double v = centre - (s - x * cs) / (sn * px);
          const int r0 = static_cast<int>(std::floor(v));
          const double w = v - r0;
          if (r0 >= 0 && r0 < n) out(r0, j) += (1.0 - w) * val;
          if (r0 + 1 >= 0 && r0 + 1 < n) out(r0 + 1, j) += w * val;
        }
      }
    }
  }
}

Sinogram SystemOperator::forward(const Image& f) const { return forward(f, all_angles_); }

Image SystemOperator::adjoint(const Sinogram& g) const { return adjoint(g, all_angles_); }

Sinogram SystemOperator::forward(const Image& f, std::span<const int> angles) const {
  check_image(f);
  Sinogram out = blank_sinogram(geom_);
  if (psf_fwhm_mm_ > 0.0) {
    project_rows(gaussian_blur(f, psf_fwhm_mm_, grid_.pixel_mm()), out, angles);
  } else {
    project_rows(f, out, angles);
  }
  return out;
}

Image SystemOperator::adjoint(const Sinogram& g, std::span<const int> angles) const {
  check_sinogram(g);
  Image out = blank_image(grid_);
  backproject_rows(g, out, angles);
  if (psf_fwhm_mm_ > 0.0) return gaussian_blur(out, psf_fwhm_mm_, grid_.pixel_mm());
  return out;
}

std::vector<double> SystemOperator::dense_matrix() const {
  const std::size_t pixels = static_cast<std::size_t>(grid_.n) * grid_.n;
  const std::size_t bins = static_cast<std::size_t>(geom_.n_angles) * geom_.n_radial;
  std::vector<double> m(bins * pixels, 0.0);
  Image unit = blank_image(grid_);
  for (std::size_t p = 0; p < pixels; ++p) {
    unit[p] = 1.0;
    const Sinogram col = forward(unit);
    for (std::size_t b = 0; b < bins; ++b) m[b * pixels + p] = col[b];
    unit[p] = 0.0;
  }
  return m;
}

void SystemOperator::dump_dense_matrix(const std::filesystem::path& path) const {
  const auto m = dense_matrix();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

}  // namespace deeppet
