#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "deeppet/geometry.hpp"

namespace deeppet {

/// Converts a full-width-at-half-maximum into a Gaussian standard deviation.
constexpr double kFwhmToSigma = 1.0 / 2.3548200450309493;

/// Separable Gaussian convolution of an image (zero boundary). The kernel is
/// truncated at +-4 sigma and renormalised to unit sum; fwhm_mm == 0 returns
/// the input unchanged.
Image gaussian_blur(const Image& img, double fwhm_mm, double pixel_mm);
/// Same kernel applied along the radial axis of every angular row.
Sinogram gaussian_blur_radial(const Sinogram& sino, double fwhm_mm, double bin_mm);

/// Parallel-beam projection matrix A (and its transpose) between an image grid
/// and a sinogram geometry.
///
/// Rays are traced with Joseph's method: the line is stepped one pixel at a
/// time along its dominant axis and the image is linearly interpolated across
/// the other axis. The adjoint walks exactly the same samples and scatters
/// instead of gathering, so it is the transpose of the discrete forward to
/// rounding. An optional image-space Gaussian PSF is applied before
/// projection (and after back-projection in the adjoint).
class SystemOperator {
 public:
  SystemOperator(ImageGrid grid, SinogramGeometry geom, double psf_fwhm_mm = 0.0);

  const ImageGrid& grid() const { return grid_; }
  const SinogramGeometry& geometry() const { return geom_; }
  double psf_fwhm_mm() const { return psf_fwhm_mm_; }

  Sinogram forward(const Image& f) const;
  Image adjoint(const Sinogram& g) const;

  /// Forward projection restricted to the listed angle rows; other rows are zero.
  Sinogram forward(const Image& f, std::span<const int> angles) const;
  /// Back-projection of only the listed angle rows of g.
  Image adjoint(const Sinogram& g, std::span<const int> angles) const;

  /// Explicit row-major matrix (bins x pixels), built column by column by
  /// projecting unit images. Only sensible for tiny grids.
  std::vector<double> dense_matrix() const;
  /// Writes dense_matrix() as little-endian float64, rows = bins.
  void dump_dense_matrix(const std::filesystem::path& path) const;

 private:
  void check_image(const Image& f) const;
  void check_sinogram(const Sinogram& g) const;
  void project_rows(const Image& f, Sinogram& out, std::span<const int> angles) const;
  void backproject_rows(const Sinogram& g, Image& out, std::span<const int> angles) const;

  ImageGrid grid_;
  SinogramGeometry geom_;
  double psf_fwhm_mm_;
  std::vector<int> all_angles_;
};

}  // namespace deeppet
