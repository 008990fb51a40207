#include "deeppet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "deeppet/random.hpp"
#include "deeppet/raster_io.hpp"

namespace deeppet {

namespace fs = std::filesystem;
using nlohmann::json;

Sinogram attenuation_factors(const Image& mu_map, const SystemOperator& opr) {
  for (double v : mu_map.values()) {
    if (v < 0.0) throw DomainError("attenuation map has negative values");
  }
  const SystemOperator ray(opr.grid(), opr.geometry(), 0.0);
  Sinogram factors = ray.forward(mu_map);
  for (double& v : factors.values()) v = std::exp(-v);
  return factors;
}

AcquisitionRecord simulate(const Image& truth, const Image& mu_map, const SystemOperator& opr,
                           const SimulationParams& params, std::uint64_t seed) {
  const double sf = params.scatter_fraction;
  const double rf = params.randoms_fraction;
  if (!(sf >= 0.0) || !(rf >= 0.0) || !(sf + rf < 1.0)) throw DomainError("scatter/randoms fractions out of range");
  if (!(params.target_counts > 0.0)) throw DomainError("target counts must be positive");
  double activity = 0.0;
  for (double v : truth.values()) {
    if (v < 0.0) throw DomainError("activity image has negative values");
    activity += v;
  }
  if (activity <= 0.0) throw DomainError("activity image is all zero");

  const SinogramGeometry& geom = opr.geometry();
  AcquisitionRecord rec;
  rec.params = params;
  rec.seed = seed;
  rec.atten = attenuation_factors(mu_map, opr);

  Sinogram shape = opr.forward(truth);
  for (std::size_t i = 0; i < shape.size(); ++i) shape[i] *= rec.atten[i];
  const double shape_sum = shape.sum();
  if (!(shape_sum > 0.0)) throw DomainError("activity projects to an empty sinogram");
  rec.activity_scale = (1.0 - sf - rf) * params.target_counts / shape_sum;
  rec.trues = shape * rec.activity_scale;
  rec.ground_truth = truth * rec.activity_scale;

  rec.scatter = blank_sinogram(geom);
  if (sf > 0.0) {
    const double fwhm = params.scatter_fwhm_fraction * geom.kept_radial() * geom.radial_spacing_mm;
    rec.scatter = gaussian_blur_radial(rec.trues, fwhm, geom.radial_spacing_mm);
    rec.scatter *= sf * params.target_counts / rec.scatter.sum();
  }

  rec.randoms = blank_sinogram(geom);
  if (rf > 0.0) {
    const double per_bin = rf * params.target_counts / (static_cast<double>(geom.n_angles) * geom.kept_radial());
    for (int a = 0; a < geom.n_angles; ++a)
      for (int r = geom.crop; r < geom.n_radial - geom.crop; ++r) rec.randoms(a, r) = per_bin;
  }

  Rng rng(seed);
  rec.total = blank_sinogram(geom);
  double counts = 0.0;
  for (std::size_t i = 0; i < rec.total.size(); ++i) {
    const double mean = rec.trues[i] + rec.scatter[i] + rec.randoms[i];
    rec.total[i] = static_cast<double>(rng.poisson(mean));
    counts += rec.total[i];
  }
  rec.total_counts = counts;
  rec.discarded = counts < kMinRetainedCounts || counts > kMaxRetainedCounts;
  return rec;
}

Sinogram precorrect(const Sinogram& total, const Sinogram& gamma, const Sinogram& atten, const SinogramGeometry& geom) {
  total.require_same(gamma);
  total.require_same(atten);
  if (total.rows() != geom.n_angles || total.cols() != geom.n_radial) {
    throw DomainError("precorrect: sinogram does not match geometry");
  }
  Sinogram out = blank_cropped(geom);
  for (int a = 0; a < geom.n_angles; ++a) {
    for (int k = 0; k < geom.kept_radial(); ++k) {
      const int r = k + geom.crop;
      const double mu = atten(a, r);
      if (!(mu > 0.0)) throw DomainError("zero attenuation factor in a kept bin");
      out(a, k) = (total(a, r) - gamma(a, r)) / mu;
    }
  }
  return out;
}

Sinogram precorrect(const AcquisitionRecord& rec, const Sinogram& gamma, const SinogramGeometry& geom) {
  return precorrect(rec.total, gamma, rec.atten, geom);
}

void NoiseLevelPlan::validate() const {
  if (realizations < 1) throw DomainError("plan needs at least one realization");
  if (augmented < 0 || augmented > realizations) throw DomainError("plan: augmented count out of range");
  if (flipped < 0 || flipped > augmented) throw DomainError("plan: flipped count out of range");
  // Targets outside the retention window are allowed; such records are
  // simulated and then discarded.
  if (!(min_target_counts > 0.0) || !(min_target_counts <= max_target_counts)) {
    throw DomainError("plan: target count range must be positive and ordered");
  }
  if (!(fraction_lo >= 0.0) || !(fraction_hi >= fraction_lo) || !(2.0 * fraction_hi < 1.0)) {
    throw DomainError("plan: fraction clip range invalid");
  }
}

std::vector<RealizationSpec> plan_realizations(const NoiseLevelPlan& plan, const ImageGrid& grid, int phantom_id,
                                               std::uint64_t master_seed) {
  plan.validate();
  Rng rng(derive_seed(master_seed, static_cast<std::uint64_t>(phantom_id), 0x706c616eULL));

  std::vector<int> order(static_cast<std::size_t>(plan.realizations));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const double log_lo = std::log(plan.min_target_counts);
  const double log_hi = std::log(plan.max_target_counts);
  std::vector<RealizationSpec> specs(static_cast<std::size_t>(plan.realizations));
  for (int i = 0; i < plan.realizations; ++i) {
    RealizationSpec& s = specs[static_cast<std::size_t>(i)];
    s.index = i;
    s.params.target_counts = std::exp(rng.uniform(log_lo, log_hi));
    s.params.scatter_fraction =
        std::clamp(rng.normal(plan.scatter_mean, plan.scatter_sd), plan.fraction_lo, plan.fraction_hi);
    s.params.randoms_fraction =
        std::clamp(rng.normal(plan.randoms_mean, plan.randoms_sd), plan.fraction_lo, plan.fraction_hi);
    s.seed = derive_seed(master_seed, static_cast<std::uint64_t>(phantom_id), static_cast<std::uint64_t>(i) + 1);
  }
  for (int k = 0; k < plan.augmented; ++k) {
    RealizationSpec& s = specs[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    s.augment = true;
    s.augmentation = random_augmentation(grid, k < plan.flipped, derive_seed(s.seed, 0x61756721ULL));
  }
  return specs;
}

std::vector<AcquisitionRecord> simulate_phantom(const Phantom& phantom, const NoiseLevelPlan& plan,
                                                const SystemOperator& opr, std::uint64_t master_seed) {
  std::vector<AcquisitionRecord> out;
  for (const RealizationSpec& spec : plan_realizations(plan, opr.grid(), phantom.id, master_seed)) {
    AcquisitionRecord rec;
    if (spec.augment) {
      const Image act = augment(phantom.activity, opr.grid(), spec.augmentation);
      const Image mu = augment(phantom.mu, opr.grid(), spec.augmentation);
      rec = simulate(act, mu, opr, spec.params, spec.seed);
      rec.augmentation = spec.augmentation;
    } else {
      rec = simulate(phantom.activity, phantom.mu, opr, spec.params, spec.seed);
    }
    rec.phantom_id = phantom.id;
    rec.realization = spec.index;
    out.push_back(std::move(rec));
  }
  return out;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw DataError("unknown split '" + s + "'");
}

std::vector<std::pair<int, Split>> assign_splits(std::vector<int> phantom_ids, const SplitFractions& fractions,
                                                 std::uint64_t seed) {
  if (phantom_ids.empty()) throw DomainError("no phantoms to split");
  if (fractions.train < 0.0 || fractions.validation < 0.0 || fractions.test < 0.0 ||
      std::abs(fractions.train + fractions.validation + fractions.test - 1.0) > 1e-9) {
    throw DomainError("split fractions must be nonnegative and sum to 1");
  }
  std::sort(phantom_ids.begin(), phantom_ids.end());
  if (std::adjacent_find(phantom_ids.begin(), phantom_ids.end()) != phantom_ids.end()) {
    throw DomainError("duplicate phantom id");
  }
  const int n = static_cast<int>(phantom_ids.size());
  if (n < 3) throw DomainError("at least 3 phantoms are needed for three splits");
  Rng rng(derive_seed(seed, 0x73706c74ULL));
  for (std::size_t i = phantom_ids.size(); i > 1; --i) std::swap(phantom_ids[i - 1], phantom_ids[rng.below(i)]);

  const int n_val = std::max(1, static_cast<int>(std::lround(fractions.validation * n)));
  const int n_test = std::max(1, static_cast<int>(std::lround(fractions.test * n)));
  const int n_train = n - n_val - n_test;
  if (n_train < 1) throw DomainError("split fractions leave no training phantoms");

  std::vector<std::pair<int, Split>> out;
  for (int i = 0; i < n; ++i) {
    const Split s = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Validation : Split::Test);
    out.emplace_back(phantom_ids[static_cast<std::size_t>(i)], s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(&e);
  return out;
}

namespace {

json grid_json(const ImageGrid& g) { return {{"n", g.n}, {"fov_mm", g.fov_mm}}; }
json geom_json(const SinogramGeometry& g) {
  return {{"n_angles", g.n_angles}, {"n_radial", g.n_radial}, {"radial_spacing_mm", g.radial_spacing_mm}, {"crop", g.crop}};
}
json aug_json(const Augmentation& a) {
  return {{"dx_px", a.dx_px}, {"dy_px", a.dy_px}, {"rot_deg", a.rot_deg}, {"flip", a.flip}};
}

}  // namespace

DatasetManifest build_dataset(const std::vector<Phantom>& phantoms, const GeometryPreset& preset,
                              const DatasetOptions& options, const fs::path& root) {
  if (phantoms.empty()) throw DomainError("empty phantom source");
  options.plan.validate();
  std::vector<int> ids;
  for (const auto& p : phantoms) ids.push_back(p.id);
  const auto splits = assign_splits(ids, options.fractions, options.seed);
  auto split_of = [&](int id) {
    return std::lower_bound(splits.begin(), splits.end(), std::make_pair(id, Split::Train))->second;
  };

  const SystemOperator sim_op(preset.grid, preset.sino, options.psf_fwhm_mm);
  DatasetManifest m;
  m.preset = preset.name;
  m.grid = preset.grid;
  m.geometry = preset.sino;
  m.psf_fwhm_mm = options.psf_fwhm_mm;
  m.seed = options.seed;
  m.phantoms = static_cast<int>(phantoms.size());

  std::vector<const Phantom*> sorted;
  for (const auto& p : phantoms) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const Phantom* a, const Phantom* b) { return a->id < b->id; });

  for (const Phantom* ph : sorted) {
    const Split split = split_of(ph->id);
    for (const AcquisitionRecord& rec : simulate_phantom(*ph, options.plan, sim_op, options.seed)) {
      if (rec.discarded) {
        ++m.discarded;
        continue;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "p%05d_r%d", rec.phantom_id, rec.realization);
      ManifestEntry e;
      e.record_id = buf;
      e.phantom_id = rec.phantom_id;
      e.realization = rec.realization;
      e.split = split;
      e.total_counts = rec.total_counts;
      e.seed = rec.seed;
      e.augmented = !rec.augmentation.is_identity();
      e.augmentation = rec.augmentation;
      const std::string base = "records/" + e.record_id;
      e.truth_path = base + "_truth.f32";
      e.total_path = base + "_total.f32";
      e.trues_path = base + "_trues.f32";
      e.scatter_path = base + "_scatter.f32";
      e.randoms_path = base + "_randoms.f32";
      e.atten_path = base + "_atten.f32";
      e.precorrected_path = base + "_precorrected.f32";

      const json common = {{"record_id", e.record_id},  {"phantom_id", e.phantom_id}, {"realization", e.realization},
                           {"preset", preset.name},     {"seed", e.seed},             {"total_counts", e.total_counts},
                           {"split", to_string(split)}, {"augmentation", aug_json(e.augmentation)},
                           {"grid", grid_json(preset.grid)}, {"geometry", geom_json(preset.sino)}};
      auto with = [&](const char* kind, const char* units) {
        json j = common;
        j["kind"] = kind;
        j["units"] = units;
        return j;
      };
      write_raster(root / e.truth_path, rec.ground_truth, with("ground_truth", "counts/mm per pixel (activity-level scaled)"));
      write_raster(root / e.total_path, rec.total, with("total", "counts"));
      write_raster(root / e.trues_path, rec.trues, with("trues_mean", "counts"));
      write_raster(root / e.scatter_path, rec.scatter, with("scatter_mean", "counts"));
      write_raster(root / e.randoms_path, rec.randoms, with("randoms_mean", "counts"));
      write_raster(root / e.atten_path, rec.atten, with("attenuation_factors", "unitless"));
      json pc = with("precorrected", "counts (attenuation corrected)");
      pc["cropped"] = true;
      write_raster(root / e.precorrected_path, precorrect(rec, rec.additive(), preset.sino), pc);
      m.entries.push_back(std::move(e));
    }
  }
  save_manifest(m, root / "manifest.json");
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"record_id", e.record_id},
                       {"phantom_id", e.phantom_id},
                       {"realization", e.realization},
                       {"split", to_string(e.split)},
                       {"total_counts", e.total_counts},
                       {"seed", e.seed},
                       {"augmented", e.augmented},
                       {"augmentation", aug_json(e.augmentation)},
                       {"files",
                        {{"truth", e.truth_path},
                         {"total", e.total_path},
                         {"trues", e.trues_path},
                         {"scatter", e.scatter_path},
                         {"randoms", e.randoms_path},
                         {"atten", e.atten_path},
                         {"precorrected", e.precorrected_path}}}});
  }
  const json doc = {{"preset", m.preset},       {"grid", grid_json(m.grid)},  {"geometry", geom_json(m.geometry)},
                    {"psf_fwhm_mm", m.psf_fwhm_mm}, {"seed", m.seed},         {"phantoms", m.phantoms},
                    {"discarded", m.discarded}, {"records", entries}};
  write_json(path, doc);
}

DatasetManifest load_manifest(const fs::path& path) {
  const json doc = read_json(path);
  DatasetManifest m;
  try {
    m.preset = doc.at("preset").get<std::string>();
    m.grid = {doc.at("grid").at("n").get<int>(), doc.at("grid").at("fov_mm").get<double>()};
    const auto& g = doc.at("geometry");
    m.geometry = {g.at("n_angles").get<int>(), g.at("n_radial").get<int>(), g.at("radial_spacing_mm").get<double>(),
                  g.at("crop").get<int>()};
    m.psf_fwhm_mm = doc.at("psf_fwhm_mm").get<double>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.phantoms = doc.at("phantoms").get<int>();
    m.discarded = doc.at("discarded").get<int>();
    for (const auto& r : doc.at("records")) {
      ManifestEntry e;
      e.record_id = r.at("record_id").get<std::string>();
      e.phantom_id = r.at("phantom_id").get<int>();
      e.realization = r.at("realization").get<int>();
      e.split = split_from_string(r.at("split").get<std::string>());
      e.total_counts = r.at("total_counts").get<double>();
      e.seed = r.at("seed").get<std::uint64_t>();
      e.augmented = r.at("augmented").get<bool>();
      const auto& a = r.at("augmentation");
      e.augmentation = {a.at("dx_px").get<double>(), a.at("dy_px").get<double>(), a.at("rot_deg").get<double>(),
                        a.at("flip").get<bool>()};
      const auto& f = r.at("files");
      e.truth_path = f.at("truth").get<std::string>();
      e.total_path = f.at("total").get<std::string>();
      e.trues_path = f.at("trues").get<std::string>();
      e.scatter_path = f.at("scatter").get<std::string>();
      e.randoms_path = f.at("randoms").get<std::string>();
      e.atten_path = f.at("atten").get<std::string>();
      e.precorrected_path = f.at("precorrected").get<std::string>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw DataError("malformed manifest " + path.string() + ": " + ex.what());
  }
  return m;
}

LoadedRecord load_record(const ManifestEntry& entry, const fs::path& root) {
  LoadedRecord rec;
  rec.entry = &entry;
  rec.truth = read_raster<ImageTag>(root / entry.truth_path);
  rec.total = read_raster<SinogramTag>(root / entry.total_path);
  rec.additive = read_raster<SinogramTag>(root / entry.scatter_path) + read_raster<SinogramTag>(root / entry.randoms_path);
  rec.atten = read_raster<SinogramTag>(root / entry.atten_path);
  rec.precorrected = read_raster<SinogramTag>(root / entry.precorrected_path);
  return rec;
}

}  // namespace deeppet
