#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "deeppet/geometry.hpp"
#include "deeppet/phantom.hpp"
#include "deeppet/projector.hpp"
#include "helpers.hpp"

using namespace deeppet;

TEST_CASE("lor at the centre bin passes through the origin") {
  const SinogramGeometry g = toy_preset().sino;
  const int centre = (g.n_radial - 1) / 2;

  const Lor l0 = lor_of(g, 0, centre);
  CHECK(l0.theta == 0.0);
  CHECK(l0.offset_mm == doctest::Approx(0.0));
  CHECK(l0.nx == doctest::Approx(1.0));
  CHECK(l0.ny == doctest::Approx(0.0));

  const Lor l90 = lor_of(g, g.n_angles / 2, centre);
  CHECK(l90.theta == doctest::Approx(std::numbers::pi / 2));
  CHECK(l90.offset_mm == doctest::Approx(0.0));
  CHECK(l90.nx == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(l90.ny == doctest::Approx(1.0));

  const Lor l1 = lor_of(g, 0, centre + 1);
  CHECK(l1.offset_mm == doctest::Approx(g.radial_spacing_mm));
}

TEST_CASE("lor_of rejects out-of-range indices") {
  const SinogramGeometry g = toy_preset().sino;
  CHECK_THROWS_AS(lor_of(g, -1, 0), DomainError);
  CHECK_THROWS_AS(lor_of(g, g.n_angles, 0), DomainError);
  CHECK_THROWS_AS(lor_of(g, 0, g.n_radial), DomainError);
  CHECK_THROWS_AS(lor_of(g, 0, -1), DomainError);
}

TEST_CASE("lor_of is injective on index pairs") {
  const SinogramGeometry g = toy_preset().sino;
  std::set<std::pair<double, double>> seen;
  for (int a = 0; a < g.n_angles; ++a)
    for (int r = 0; r < g.n_radial; ++r) {
      const Lor l = lor_of(g, a, r);
      CHECK(l.angle_index == a);
      CHECK(l.radial_index == r);
      seen.insert({l.theta, l.offset_mm});
    }
  CHECK(seen.size() == static_cast<std::size_t>(g.n_angles * g.n_radial));
}

TEST_CASE("presets") {
  const GeometryPreset p = paper_preset();
  CHECK(p.grid.n == 128);
  CHECK(p.grid.fov_mm == 700.0);
  CHECK(p.sino.n_angles == 288);
  CHECK(p.sino.n_radial == 381);
  CHECK(p.sino.crop == 56);
  CHECK(p.sino.kept_radial() == 269);
  // Cropped radial extent equals the image width.
  CHECK(p.sino.kept_radial() * p.sino.radial_spacing_mm == doctest::Approx(p.grid.fov_mm));

  const GeometryPreset t = toy_preset();
  CHECK(t.grid.n == 64);
  CHECK(t.sino.n_angles == 96);
  CHECK(t.sino.n_radial == 127);
  CHECK(t.sino.kept_radial() == 95);
  CHECK(preset_by_name("toy").grid == t.grid);
  CHECK_THROWS_AS(preset_by_name("huge"), DomainError);
}

TEST_CASE("grid and sinogram validation") {
  CHECK_THROWS_AS((ImageGrid{1, 10.0}.validate()), DomainError);
  CHECK_THROWS_AS((ImageGrid{8, 0.0}.validate()), DomainError);
  CHECK_THROWS_AS((SinogramGeometry{4, 10, 1.0, 5}.validate()), DomainError);
  CHECK_NOTHROW((SinogramGeometry{4, 11, 1.0, 5}.validate()));
}

TEST_CASE("crop to the paper preset's network input size") {
  const SinogramGeometry g = paper_preset().sino;
  const Sinogram s = testing::random_sinogram(288, 381, 3);
  const Sinogram c = crop_sinogram(s, g);
  CHECK(c.rows() == 288);
  CHECK(c.cols() == 269);
  CHECK(c(5, 0) == s(5, 56));
  CHECK(c(287, 268) == s(287, 324));
  CHECK_THROWS_AS(crop_sinogram(c, g), DomainError);
  CHECK_THROWS_AS(uncrop_sinogram(s, g), DomainError);
}

TEST_CASE("crop with zero width is the identity") {
  const SinogramGeometry g{6, 9, 1.0, 0};
  const Sinogram s = testing::random_sinogram(6, 9, 4);
  CHECK(crop_sinogram(s, g) == s);
  CHECK(uncrop_sinogram(s, g) == s);
}

TEST_CASE("crop and uncrop are inverse on the right domains") {
  const GeometryPreset p = toy_preset();
  const Sinogram c = testing::random_sinogram(p.sino.n_angles, p.sino.kept_radial(), 5);
  CHECK(crop_sinogram(uncrop_sinogram(c, p.sino), p.sino) == c);

  // A disc-supported phantom projects to zero in the cropped bins.
  const SystemOperator opr(p.grid, p.sino);
  const Sinogram s = opr.forward(generate_phantom(p.grid, 0, 11).activity);
  CHECK(uncrop_sinogram(crop_sinogram(s, p.sino), p.sino) == s);
}

TEST_CASE("support mask is the inscribed circle") {
  const ImageGrid g{64, 350.0};
  const Image m = support_mask(g);
  CHECK(m(32, 32) == 1.0);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(0, 63) == 0.0);
  CHECK(m(32, 1) == 1.0);
  // Almost the whole inscribed disc.
  CHECK(m.sum() > 0.95 * std::numbers::pi * 32 * 32);
  CHECK(m.sum() < std::numbers::pi * 32 * 32);
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) CHECK(m(r, c) == m(c, r));
}

TEST_CASE("identity augmentation is bit-exact") {
  const ImageGrid g = toy_preset().grid;
  const Image img = generate_phantom(g, 3, 9).activity;
  CHECK(augment(img, g, Augmentation{}) == img);
}

TEST_CASE("flipping twice is the identity") {
  const ImageGrid g = toy_preset().grid;
  const Image img = generate_phantom(g, 4, 9).activity;
  Augmentation flip;
  flip.flip = true;
  const Image once = augment(img, g, flip);
  CHECK_FALSE(once == img);
  CHECK(once(20, 10) == img(20, 53));
  CHECK(augment(once, g, flip) == img);
}

TEST_CASE("augmentation preserves the activity of a centred disc") {
  const ImageGrid g = toy_preset().grid;
  const Image disc = uniform_disc(g, 80.0);
  for (const Augmentation a : {Augmentation{5, -3, 0, false}, Augmentation{0, 0, 10, false}, Augmentation{-12, 7, -7.5, true},
                               Augmentation{12.5, 12.5, 10, true}}) {
    const Image out = augment(disc, g, a);
    CHECK(out.sum() == doctest::Approx(disc.sum()).epsilon(0.02));
    for (double v : out.values()) CHECK(v >= 0.0);
  }
}

namespace {

double rotation_round_trip_mae(const ImageGrid& g, const Image& disc, double deg) {
  const Image back = augment(augment(disc, g, {0, 0, deg, false}), g, {0, 0, -deg, false});
  double mae = 0.0;
  double peak = 0.0;
  for (std::size_t i = 0; i < disc.size(); ++i) {
    mae += std::abs(back[i] - disc[i]);
    peak = std::max(peak, disc[i]);
  }
  return mae / static_cast<double>(disc.size()) / peak;
}

}  // namespace

TEST_CASE("rotating there and back restores a disc") {
  // Bilinear resampling smooths a step edge by up to half a pixel each way,
  // so the tight bound applies to a disc with a smooth rim.
  const ImageGrid g = paper_preset().grid;
  const Image smooth = gaussian_blur(uniform_disc(g, 80.0), 10.0, g.pixel_mm());
  CHECK(rotation_round_trip_mae(g, smooth, 10.0) < 1e-3);
  CHECK(rotation_round_trip_mae(g, smooth, -7.0) < 1e-3);

  const Image sharp = uniform_disc(g, 80.0);
  CHECK(rotation_round_trip_mae(g, sharp, 10.0) < 2e-3);
  const ImageGrid t = toy_preset().grid;
  CHECK(rotation_round_trip_mae(t, uniform_disc(t, 80.0), 10.0) < 1e-2);
}

TEST_CASE("translation moves mass in the stated direction") {
  const ImageGrid g{32, 320.0};
  Image img = blank_image(g);
  img(16, 16) = 1.0;
  const Image right = augment(img, g, {2, 0, 0, false});
  CHECK(right(16, 18) == doctest::Approx(1.0));
  const Image down = augment(img, g, {0, 3, 0, false});
  CHECK(down(19, 16) == doctest::Approx(1.0));
}

TEST_CASE("augmentation ranges are enforced") {
  const ImageGrid g = toy_preset().grid;
  const Image img = blank_image(g, 1.0);
  CHECK(max_translation_px(g) == doctest::Approx(12.5));
  CHECK(max_translation_px(paper_preset().grid) == doctest::Approx(25.0));
  CHECK_THROWS_AS(augment(img, g, {13, 0, 0, false}), DomainError);
  CHECK_THROWS_AS(augment(img, g, {0, -13, 0, false}), DomainError);
  CHECK_THROWS_AS(augment(img, g, {0, 0, 10.5, false}), DomainError);
  CHECK_NOTHROW(augment(img, g, {12.5, -12.5, -10, true}));
}

TEST_CASE("augmented images stay inside the support") {
  const ImageGrid g = toy_preset().grid;
  const Image img = blank_image(g, 1.0);
  const Image out = augment(img, g, {3, 4, 6, true});
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c)
      if (!g.in_support(r, c)) CHECK(out(r, c) == 0.0);
}

TEST_CASE("random augmentation is seeded and in range") {
  const ImageGrid g = toy_preset().grid;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Augmentation a = random_augmentation(g, s % 2 == 0, s);
    CHECK(a == random_augmentation(g, s % 2 == 0, s));
    CHECK(std::abs(a.dx_px) <= max_translation_px(g));
    CHECK(std::abs(a.dy_px) <= max_translation_px(g));
    CHECK(std::abs(a.rot_deg) <= 10.0);
    CHECK(a.flip == (s % 2 == 0));
  }
}
