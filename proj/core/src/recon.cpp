#include "deeppet/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace deeppet {

void OsemConfig::validate(const SinogramGeometry& geom) const {
  if (iterations < 1) throw ConfigError("OSEM needs at least one iteration");
  if (subsets < 1 || geom.n_angles % subsets != 0) {
    throw ConfigError("OSEM subsets (" + std::to_string(subsets) + ") must divide the number of angles (" +
                      std::to_string(geom.n_angles) + ")");
  }
  if (!(epsilon > 0.0)) throw ConfigError("OSEM epsilon must be positive");
  if (!(postfilter_fwhm_mm >= 0.0)) throw ConfigError("post-filter FWHM must be >= 0");
}

std::vector<double> ramp_kernel(int len, double tau) {
  std::vector<double> h(static_cast<std::size_t>(2 * len - 1), 0.0);
  for (int k = -(len - 1); k <= len - 1; ++k) {
    double v = 0.0;
    if (k == 0) {
      v = 1.0 / (4.0 * tau * tau);
    } else if (k % 2 != 0) {
      const double d = std::numbers::pi * k * tau;
      v = -1.0 / (d * d);
    }
    h[static_cast<std::size_t>(k + len - 1)] = v;
  }
  return h;
}

Image fbp(const Sinogram& g_hat, const FbpConfig& cfg, const SystemOperator& opr) {
  const SinogramGeometry& geom = opr.geometry();
  if (g_hat.rows() != geom.n_angles || g_hat.cols() != geom.kept_radial()) {
    throw DomainError("fbp: sinogram does not match the cropped geometry");
  }
  const int len = geom.kept_radial();
  const double tau = geom.radial_spacing_mm;
  const auto h = ramp_kernel(len, tau);

  // Linear (zero-padded) convolution with the band-limited ramp; identical to
  // filtering in the radial frequency domain with padding to 2*len.
  Sinogram filtered = blank_cropped(geom);
  for (int a = 0; a < geom.n_angles; ++a) {
    const auto in = g_hat.row(a);
    auto out = filtered.row(a);
    for (int i = 0; i < len; ++i) {
      double acc = 0.0;
      for (int j = 0; j < len; ++j) acc += in[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(i - j + len - 1)];
      out[static_cast<std::size_t>(i)] = acc * tau;
    }
  }

  // The matched back-projector weights each angle by roughly pixel^2 / tau per
  // pixel; rescale to the continuous back-projection integral over [0, pi).
  const SystemOperator bp(opr.grid(), geom, 0.0);
  Image img = bp.adjoint(uncrop_sinogram(filtered, geom));
  const double px = opr.grid().pixel_mm();
  img *= std::numbers::pi / geom.n_angles * tau / (px * px);
  clip_to_support(img, opr.grid());
  img = gaussian_blur(img, cfg.postfilter_fwhm_mm, px);
  clip_to_support(img, opr.grid());
  return img;
}

EmissionModel::EmissionModel(const SystemOperator& opr, const Sinogram* atten)
    : op_(&opr), atten_(atten), all_(static_cast<std::size_t>(opr.geometry().n_angles)) {
  if (atten_ && (atten_->rows() != opr.geometry().n_angles || atten_->cols() != opr.geometry().n_radial)) {
    throw DomainError("attenuation sinogram does not match the operator geometry");
  }
  std::iota(all_.begin(), all_.end(), 0);
}

Sinogram EmissionModel::forward(const Image& f, std::span<const int> angles) const {
  Sinogram s = op_->forward(f, angles);
  if (atten_)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= (*atten_)[i];
  return s;
}

Image EmissionModel::adjoint(const Sinogram& g, std::span<const int> angles) const {
  if (!atten_) return op_->adjoint(g, angles);
  Sinogram w = g;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= (*atten_)[i];
  return op_->adjoint(w, angles);
}

Sinogram EmissionModel::forward(const Image& f) const { return forward(f, all_); }
Image EmissionModel::adjoint(const Sinogram& g) const { return adjoint(g, all_); }

namespace {

Image sensitivity(const EmissionModel& model, std::span<const int> angles) {
  return model.adjoint(blank_sinogram(model.op().geometry(), 1.0), angles);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Guard value epsilon * max|v|, or epsilon itself for an all-zero vector.
double guard(const std::vector<double>& v, double epsilon) {
  const double m = max_abs(v);
  return m > 0.0 ? epsilon * m : epsilon;
}

// Multiplicative update; pixels at zero stay at zero, so the support of f is
// preserved.
Image em_step(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model,
              std::span<const int> angles, const Image& sens, double epsilon) {
  const ImageGrid& grid = model.op().grid();
  const Sinogram expected = model.forward(f, angles) + gamma;
  const double floor_sino = guard(expected.values(), epsilon);
  Sinogram ratio = blank_sinogram(model.op().geometry());
  for (int a : angles) {
    for (int r = 0; r < ratio.cols(); ++r) {
      ratio(a, r) = g(a, r) / std::max(expected(a, r), floor_sino);
    }
  }
  const Image back = model.adjoint(ratio, angles);
  const double floor_sens = guard(sens.values(), epsilon);
  Image next = blank_image(grid);
  for (std::size_t p = 0; p < next.size(); ++p) {
    if (f[p] == 0.0) continue;
    if (!(sens[p] > floor_sens)) throw ConfigError("sensitivity is zero inside the support");
    next[p] = f[p] / sens[p] * back[p];
  }
  return next;
}

void check_inputs(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model) {
  const auto& grid = model.op().grid();
  const auto& geom = model.op().geometry();
  if (f.rows() != grid.n || f.cols() != grid.n) throw DomainError("EM image does not match the grid");
  if (g.rows() != geom.n_angles || g.cols() != geom.n_radial) throw DomainError("EM data does not match geometry");
  g.require_same(gamma);
  for (double v : g.values())
    if (v < 0.0) throw DomainError("EM data must be nonnegative");
  for (double v : f.values())
    if (v < 0.0) throw DomainError("EM image must be nonnegative");
}

}  // namespace

Image em_update(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model,
                std::span<const int> angles, double epsilon) {
  check_inputs(f, g, gamma, model);
  return em_step(f, g, gamma, model, angles, sensitivity(model, angles), epsilon);
}

Image mlem_update(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model,
                  double epsilon) {
  std::vector<int> all(static_cast<std::size_t>(model.op().geometry().n_angles));
  std::iota(all.begin(), all.end(), 0);
  return em_update(f, g, gamma, model, all, epsilon);
}

std::vector<std::vector<int>> interleaved_subsets(int n_angles, int subsets) {
  if (subsets < 1 || n_angles % subsets != 0) throw ConfigError("subsets must divide the number of angles");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(subsets));
  for (int a = 0; a < n_angles; ++a) out[static_cast<std::size_t>(a % subsets)].push_back(a);
  return out;
}

Image em_initial_image(const Sinogram& g, const EmissionModel& model) {
  const ImageGrid& grid = model.op().grid();
  const Image sens = model.adjoint(blank_sinogram(model.op().geometry(), 1.0));
  double sens_sum = 0.0;
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c)
      if (grid.in_support(r, c)) sens_sum += sens(r, c);
  if (!(sens_sum > 0.0)) throw ConfigError("sensitivity is zero on the support");
  const double level = std::max(g.sum(), 1.0) / sens_sum;
  Image f = blank_image(grid);
  for (int r = 0; r < grid.n; ++r)
    for (int c = 0; c < grid.n; ++c)
      if (grid.in_support(r, c)) f(r, c) = level;
  return f;
}

Image osem(const Sinogram& g, const Sinogram& gamma, const OsemConfig& cfg, const EmissionModel& model,
           const OsemOptions& options) {
  const auto& geom = model.op().geometry();
  cfg.validate(geom);
  const auto subsets = interleaved_subsets(geom.n_angles, cfg.subsets);
  std::vector<int> order = options.subset_order;
  if (order.empty()) {
    order.resize(subsets.size());
    std::iota(order.begin(), order.end(), 0);
  }
  {
    std::vector<int> check = order;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < check.size(); ++i)
      if (check[i] != static_cast<int>(i) || check.size() != subsets.size())
        throw ConfigError("subset order must be a permutation of the subsets");
  }

  Image f = em_initial_image(g, model);
  check_inputs(f, g, gamma, model);
  std::vector<Image> sens;
  sens.reserve(subsets.size());
  for (const auto& s : subsets) sens.push_back(sensitivity(model, s));

  for (int it = 0; it < cfg.iterations; ++it) {
    for (int j : order) {
      const auto& s = subsets[static_cast<std::size_t>(j)];
      f = em_step(f, g, gamma, model, s, sens[static_cast<std::size_t>(j)], cfg.epsilon);
      if (options.observer) options.observer(it, j, f);
    }
  }
  const ImageGrid& grid = model.op().grid();
  f = gaussian_blur(f, cfg.postfilter_fwhm_mm, grid.pixel_mm());
  clip_to_support(f, grid);
  return f;
}

}  // namespace deeppet
