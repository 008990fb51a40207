#include "deeppet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deeppet/random.hpp"

namespace deeppet {

namespace {
constexpr int kSuper = 4;

template <class Op>
void rasterise(Image& img, const ImageGrid& grid, const Ellipse& e, Op&& op) {
  const double px = grid.pixel_mm();
  const double reach = std::max(e.a_mm, e.b_mm) + px;
  for (int r = 0; r < grid.n; ++r) {
    const double yc = grid.y_of_row(r);
    if (std::abs(yc - e.cy_mm) > reach) continue;
    for (int c = 0; c < grid.n; ++c) {
      const double xc = grid.x_of_col(c);
      if (std::abs(xc - e.cx_mm) > reach) continue;
      int hits = 0;
      for (int i = 0; i < kSuper; ++i) {
        for (int j = 0; j < kSuper; ++j) {
          const double x = xc + ((j + 0.5) / kSuper - 0.5) * px;
          const double y = yc - ((i + 0.5) / kSuper - 0.5) * px;
          hits += e.contains(x, y) ? 1 : 0;
        }
      }
      if (hits > 0) op(img(r, c), static_cast<double>(hits) / (kSuper * kSuper));
    }
  }
}
}  // namespace

bool Ellipse::contains(double x, double y) const {
  const double cs = std::cos(angle_rad);
  const double sn = std::sin(angle_rad);
  const double u = cs * (x - cx_mm) + sn * (y - cy_mm);
  const double v = -sn * (x - cx_mm) + cs * (y - cy_mm);
  return (u * u) / (a_mm * a_mm) + (v * v) / (b_mm * b_mm) <= 1.0;
}

void paint_ellipse(Image& img, const ImageGrid& grid, const Ellipse& e, double value) {
  rasterise(img, grid, e, [value](double& px, double cover) { px += value * cover; });
}

void fill_ellipse(Image& img, const ImageGrid& grid, const Ellipse& e, double value) {
  rasterise(img, grid, e, [value](double& px, double cover) { px = (1.0 - cover) * px + cover * value; });
}

Image uniform_disc(const ImageGrid& grid, double radius_mm, double value) {
  grid.validate();
  Image img = blank_image(grid);
  paint_ellipse(img, grid, Ellipse{0.0, 0.0, radius_mm, radius_mm, 0.0}, value);
  clip_to_support(img, grid);
  return img;
}

Phantom generate_phantom(const ImageGrid& grid, int id, std::uint64_t seed) {
  grid.validate();
  Rng rng(derive_seed(seed, 0x7068616eULL, static_cast<std::uint64_t>(id)));
  const double radius = grid.support_radius_px() * grid.pixel_mm();

  Phantom ph;
  ph.id = id;
  ph.activity = blank_image(grid);
  ph.mu = blank_image(grid);

  // Leave headroom for the +-25 px (at 128) translations used in augmentation.
  Ellipse body;
  body.a_mm = rng.uniform(0.50, 0.68) * radius;
  body.b_mm = rng.uniform(0.38, 0.55) * radius;
  body.cx_mm = rng.uniform(-0.05, 0.05) * radius;
  body.cy_mm = rng.uniform(-0.05, 0.05) * radius;
  body.angle_rad = rng.uniform(-0.25, 0.25);
  const double background = rng.uniform(0.5, 1.5);
  fill_ellipse(ph.activity, grid, body, background);
  fill_ellipse(ph.mu, grid, body, kMuWater);

  auto inside_body = [&](double a, double b) {
    Ellipse e;
    const double cs = std::cos(body.angle_rad);
    const double sn = std::sin(body.angle_rad);
    // Sample a centre in body coordinates far enough from the rim.
    const double rho = std::sqrt(rng.uniform()) * 0.75;
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double u = rho * (body.a_mm - std::max(a, b)) * std::cos(phi);
    const double v = rho * (body.b_mm - std::max(a, b)) * std::sin(phi);
    e.cx_mm = body.cx_mm + cs * u - sn * v;
    e.cy_mm = body.cy_mm + sn * u + cs * v;
    e.a_mm = a;
    e.b_mm = b;
    e.angle_rad = rng.uniform(0.0, std::numbers::pi);
    return e;
  };

  if (rng.uniform() < 0.5) {
    const double a = rng.uniform(0.14, 0.24) * body.a_mm;
    const Ellipse lung = inside_body(a, a * rng.uniform(0.5, 0.9));
    fill_ellipse(ph.activity, grid, lung, background * rng.uniform(0.1, 0.3));
    fill_ellipse(ph.mu, grid, lung, kMuLung);
  }

  const int features = 3 + static_cast<int>(rng.below(8));
  for (int k = 0; k < features; ++k) {
    const double a = rng.uniform(0.05, 0.22) * body.b_mm;
    const Ellipse spot = inside_body(a, a * rng.uniform(0.5, 1.0));
    const double level = rng.uniform() < 0.8 ? background * rng.uniform(1.5, 6.0) : background * rng.uniform(0.0, 0.5);
    fill_ellipse(ph.activity, grid, spot, level);
  }

  clip_to_support(ph.activity, grid);
  clip_to_support(ph.mu, grid);
  return ph;
}

}  // namespace deeppet
