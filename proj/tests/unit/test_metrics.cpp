#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "deeppet/metrics.hpp"
#include "deeppet/nn/layers.hpp"
#include "deeppet/phantom.hpp"
#include "helpers.hpp"

using namespace deeppet;

namespace {

std::string first_line(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  return line;
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("mse examples") {
  Image x(1, 2), y(1, 2);
  x[0] = 1.0;
  x[1] = 2.0;
  CHECK(mse(x, y) == 2.5);
  CHECK(mse(x, x) == 0.0);

  const Image a = testing::random_image(7, 9, 1);
  const Image b = testing::random_image(7, 9, 2);
  CHECK(mse(a, b) == mse(b, a));
  CHECK_THROWS_AS(mse(a, testing::random_image(9, 7, 3)), DomainError);
}

TEST_CASE("mse agrees with the network loss") {
  const Image a = testing::random_image(11, 13, 4, 0.0, 5.0);
  const Image b = testing::random_image(11, 13, 5, 0.0, 5.0);
  nn::Tensor<double> ta({1, 1, 11, 13}, std::vector<double>(a.values().begin(), a.values().end()));
  nn::Tensor<double> tb({1, 1, 11, 13}, std::vector<double>(b.values().begin(), b.values().end()));
  CHECK(std::abs(mse(a, b) - nn::mse_loss<double>(ta, tb, nullptr)) <= 1e-12 * mse(a, b));
}

TEST_CASE("rrmse examples") {
  const Image truth = testing::random_image(8, 8, 6, 0.5, 1.5);
  CHECK(rrmse(truth, truth) == 0.0);

  // Truth mean 2, error of 1 everywhere.
  Image t(4, 4), x(4, 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = i % 2 ? 1.0 : 3.0;
    x[i] = t[i] + (i % 3 ? 1.0 : -1.0);
  }
  CHECK(rrmse(x, t) == doctest::Approx(0.5).epsilon(1e-14));

  // Zero reconstruction: sqrt(mean(c^2)) / mean(c). For an indicator of value c
  // on a fraction p of the pixels this is 1 / sqrt(p).
  const ImageGrid g{64, 350.0};
  Image ind = blank_image(g);
  double on = 0.0;
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c)
      if (g.in_support(r, c)) {
        ind(r, c) = 3.0;
        on += 1.0;
      }
  CHECK(rrmse(blank_image(g), ind) == doctest::Approx(1.0 / std::sqrt(on / ind.size())).epsilon(1e-12));

  const Image disc = uniform_disc(g, 120.0, 3.0);
  double m1 = 0.0, m2 = 0.0;
  for (double v : disc.values()) {
    m1 += v;
    m2 += v * v;
  }
  m1 /= disc.size();
  m2 /= disc.size();
  CHECK(rrmse(blank_image(g), disc) == doctest::Approx(std::sqrt(m2) / m1).epsilon(1e-12));

  CHECK_THROWS_AS(rrmse(x, Image(4, 4)), DomainError);
}

TEST_CASE("rrmse is invariant under joint scaling") {
  const Image x = testing::random_image(9, 9, 7, 0.0, 2.0);
  const Image y = testing::random_image(9, 9, 8, 0.1, 2.0);
  for (double alpha : {0.01, 3.0, 1e4}) {
    Image ax = x, ay = y;
    for (auto& v : ax.values()) v *= alpha;
    for (auto& v : ay.values()) v *= alpha;
    CHECK(rrmse(ax, ay) == doctest::Approx(rrmse(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("poisson log-likelihood examples") {
  const Sinogram mean = testing::random_sinogram(5, 6, 9, 0.1, 4.0);
  CHECK(poisson_loglik(mean, Sinogram(5, 6)) == doctest::Approx(-mean.sum()).epsilon(1e-14));

  Sinogram m1(1, 1), g1(1, 1);
  m1[0] = 2.0;
  g1[0] = 2.0;
  CHECK(poisson_loglik(m1, g1) == doctest::Approx(2.0 * std::log(2.0) - 2.0).epsilon(1e-14));

  m1[0] = 0.0;
  CHECK_THROWS_AS(poisson_loglik(m1, g1), DomainError);
  g1[0] = 0.0;
  CHECK(poisson_loglik(m1, g1) == 0.0);
}

TEST_CASE("log-likelihood peaks at the maximum-likelihood scale") {
  const GeometryPreset p = testing::small_preset(8, 12, 11, 0);
  const SystemOperator opr(p.grid, p.sino);
  const EmissionModel model(opr);
  const Image f = testing::random_image(8, 8, 10, 0.2, 1.0);
  Sinogram g = opr.forward(f);
  Rng rng(11);
  for (auto& v : g.values()) v = static_cast<double>(rng.poisson(3.0 * v));
  const Sinogram gamma(g.rows(), g.cols());

  // With no background the optimum scale is sum(g) / sum(Af).
  const double best = g.sum() / opr.forward(f).sum();
  auto at = [&](double a) {
    Image s = f;
    for (auto& v : s.values()) v *= a;
    return poisson_loglik(s, g, gamma, model);
  };
  // One-dimensional scan: the finite-difference slope changes sign exactly once, at the optimum.
  int sign_changes = 0;
  double prev_slope = 0.0;
  double argmax = 0.0, top = -1e300;
  for (int k = 1; k <= 400; ++k) {
    const double a = best * k / 200.0;
    const double l = at(a);
    if (l > top) {
      top = l;
      argmax = a;
    }
    const double slope = at(a * (1 + 1e-6)) - at(a * (1 - 1e-6));
    if (k > 1 && (slope > 0) != (prev_slope > 0)) {
      ++sign_changes;
      CHECK(a == doctest::Approx(best).epsilon(0.01));
    }
    prev_slope = slope;
  }
  CHECK(sign_changes == 1);
  CHECK(argmax == doctest::Approx(best).epsilon(0.005));
}

TEST_CASE("median timing skips the warm-up calls") {
  int calls = 0;
  const double t = median_time_ms([&] { ++calls; }, 5, 2);
  CHECK(calls == 7);
  CHECK(t >= 0.0);
  CHECK_THROWS(median_time_ms([] {}, 0));
}

TEST_CASE("bench rows, summary and count bins") {
  std::vector<Image> truths;
  for (int i = 0; i < 8; ++i) truths.push_back(testing::random_image(6, 6, 20 + i, 0.5, 1.5));
  std::vector<BenchCase> cases;
  for (int i = 0; i < 8; ++i) {
    BenchCase c;
    c.image_id = "img" + std::to_string(i);
    c.counts = 1000.0 * (8 - i);
    c.truth = &truths[i];
    const Image* t = &truths[i];
    // "exact" is perfect; "noisy" error shrinks as counts rise.
    c.methods["exact"] = [t] { return *t; };
    const double err = 1.0 / (8 - i);
    c.methods["noisy"] = [t, err] {
      Image out = *t;
      for (auto& v : out.values()) v += err;
      return out;
    };
    cases.push_back(std::move(c));
  }
  const EvalReport rep = bench(cases, {"exact", "noisy"}, {3, 1, 4});
  REQUIRE(rep.rows.size() == 16);
  REQUIRE(rep.summary.size() == 2);
  CHECK(rep.find("exact")->mean_rrmse == 0.0);
  CHECK(rep.find("exact")->images == 8);
  CHECK(rep.find("noisy")->mean_rrmse > 0.0);
  CHECK(rep.find("missing") == nullptr);

  REQUIRE(rep.count_bins.size() == 4);
  for (std::size_t b = 0; b < 4; ++b) {
    CHECK(rep.count_bins[b].images.at("noisy") == 2);
    CHECK(rep.count_bins[b].lo_counts <= rep.count_bins[b].hi_counts);
    if (b > 0) {
      CHECK(rep.count_bins[b].lo_counts > rep.count_bins[b - 1].hi_counts);
      CHECK(rep.count_bins[b].mean_rrmse.at("noisy") < rep.count_bins[b - 1].mean_rrmse.at("noisy"));
    }
  }

  // Summary statistics recomputed by hand.
  double sum = 0.0, sum2 = 0.0;
  for (const auto& r : rep.rows)
    if (r.method == "noisy") {
      sum += r.rrmse;
      sum2 += r.rrmse * r.rrmse;
    }
  const double mean = sum / 8;
  CHECK(rep.find("noisy")->mean_rrmse == doctest::Approx(mean));
  CHECK(rep.find("noisy")->std_rrmse == doctest::Approx(std::sqrt(sum2 / 8 - mean * mean)));

  const auto dir = testing::scratch_dir("bench_csv");
  rep.write_rows_csv(dir / "rows.csv");
  rep.write_summary_csv(dir / "summary.csv");
  rep.write_bins_csv(dir / "bins.csv");
  CHECK(first_line(dir / "rows.csv") == "method,image_id,counts,rrmse,time_ms");
  CHECK(first_line(dir / "summary.csv") == "method,mean_rrmse,std_rrmse,mean_time_ms");
  CHECK(lines(dir / "rows.csv").size() == 17);
  CHECK(lines(dir / "summary.csv").size() == 3);
  CHECK(lines(dir / "bins.csv").size() == 9);
}

TEST_CASE("bench rejects empty input and missing methods") {
  CHECK_THROWS_AS(bench({}, {"fbp"}, {}), DomainError);
  Image t = testing::random_image(3, 3, 1, 1.0, 2.0);
  BenchCase c;
  c.image_id = "a";
  c.truth = &t;
  CHECK_THROWS_AS(bench({c}, {"fbp"}, {}), DomainError);
}
