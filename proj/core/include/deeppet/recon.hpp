#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "deeppet/projector.hpp"

namespace deeppet {

/// Raised when a reconstruction cannot be set up (e.g. zero sensitivity
/// inside the support, subsets that do not divide the angles).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FbpConfig {
  double postfilter_fwhm_mm = 6.4;
};

struct OsemConfig {
  int iterations = 5;
  int subsets = 16;
  double postfilter_fwhm_mm = 6.4;
  /// Relative floor (times the largest value) guarding every division.
  double epsilon = 1e-12;

  void validate(const SinogramGeometry& geom) const;
};

/// Ram-Lak kernel h[k], k = -(len-1)..(len-1), band-limited at Nyquist for
/// sample spacing tau: h[0] = 1/(4 tau^2), h[odd] = -1/(pi k tau)^2, h[even] = 0.
std::vector<double> ramp_kernel(int len, double tau);

/// Filtered back-projection of a precorrected, cropped sinogram.
Image fbp(const Sinogram& g_hat, const FbpConfig& cfg, const SystemOperator& opr);

/// The emission model used by MLEM/OSEM: mean = atten * A f + gamma.
/// A null attenuation sinogram means no attenuation.
class EmissionModel {
 public:
  EmissionModel(const SystemOperator& opr, const Sinogram* atten = nullptr);

  const SystemOperator& op() const { return *op_; }
  Sinogram forward(const Image& f, std::span<const int> angles) const;
  Image adjoint(const Sinogram& g, std::span<const int> angles) const;
  Sinogram forward(const Image& f) const;
  Image adjoint(const Sinogram& g) const;

 private:
  const SystemOperator* op_;
  const Sinogram* atten_;
  std::vector<int> all_;
};

/// One EM step restricted to `angles`:
///   f <- f / (A_S^T 1) * A_S^T( g / (A_S f + gamma) ).
/// Zero pixels of f stay zero; every other pixel needs positive sensitivity.
Image em_update(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model,
                std::span<const int> angles, double epsilon = 1e-12);

/// Full-data MLEM step.
Image mlem_update(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model,
                  double epsilon = 1e-12);

/// Interleaved subsets: subset j holds the angles a with a % subsets == j.
std::vector<std::vector<int>> interleaved_subsets(int n_angles, int subsets);

/// Uniform start image on the support, scaled so that its sensitivity-weighted
/// sum equals the total counts.
Image em_initial_image(const Sinogram& g, const EmissionModel& model);

struct OsemOptions {
  /// Visit order of subsets within an iteration; identity when empty.
  std::vector<int> subset_order;
  /// Called after every sub-iteration with (iteration, subset, image).
  std::function<void(int, int, const Image&)> observer;
};

/// Unregularised OSEM on uncorrected data with the additive mean in the
/// model, followed by the Gaussian post-filter.
Image osem(const Sinogram& g, const Sinogram& gamma, const OsemConfig& cfg, const EmissionModel& model,
           const OsemOptions& options = {});

}  // namespace deeppet
