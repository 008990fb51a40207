#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "deeppet/nn/checkpoint.hpp"
#include "deeppet/random.hpp"
#include "deeppet/raster_io.hpp"

namespace deeppet::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void take(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

json grid_json(const ImageGrid& g) { return {{"n", g.n}, {"fov_mm", g.fov_mm}, {"pixel_mm", g.pixel_mm()}}; }

std::string phantom_stem(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom_%05d", id);
  return buf;
}

/// Writes PGM and PNG viewables next to `raster`, each with a sidecar that
/// records the min-max scaling.
void write_viewables(const fs::path& raster, const Image& img) {
  for (const char* ext : {".pgm", ".png"}) {
    fs::path p = raster;
    p.replace_extension(ext);
    const auto [lo, hi] = std::string(ext) == ".pgm" ? write_pgm16(p, img) : write_png16(p, img);
    write_json(sidecar_path(p), {{"source", raster.filename().string()},
                                 {"bit_depth", 16},
                                 {"scaling", "min-max"},
                                 {"min", lo},
                                 {"max", hi},
                                 {"shape", {img.rows(), img.cols()}}});
  }
}

void check_manifest_geometry(const DatasetManifest& m, const RunConfig& cfg) {
  const GeometryPreset p = cfg.geometry();
  if (!(m.grid == p.grid) || !(m.geometry == p.sino)) {
    throw DataError("dataset geometry (" + m.preset + ") does not match the configured preset " + cfg.preset);
  }
}

nn::CedModel<float> load_model(const RunConfig& cfg, const fs::path& checkpoint) {
  if (checkpoint.empty()) throw UsageError("method deeppet requires --checkpoint");
  if (!fs::exists(checkpoint)) throw DataError("checkpoint not found: " + checkpoint.string());
  nn::CedModel<float> model = nn::load_checkpoint(checkpoint);
  const GeometryPreset p = cfg.geometry();
  const nn::CedSpec& s = model.spec();
  if (s.input_h != p.sino.n_angles || s.input_w != p.sino.kept_radial() || s.output_h != p.grid.n ||
      s.output_w != p.grid.n) {
    throw DataError("checkpoint input/output shape does not match the " + cfg.preset + " geometry");
  }
  return model;
}

DatasetManifest open_dataset(const RunConfig& cfg, const fs::path& dataset) {
  const fs::path mpath = dataset / "manifest.json";
  if (!fs::exists(mpath)) throw DataError("no manifest.json in " + dataset.string());
  DatasetManifest m = load_manifest(mpath);
  check_manifest_geometry(m, cfg);
  return m;
}

}  // namespace

nn::CedSpec RunConfig::model_spec() const {
  const GeometryPreset p = geometry();
  return nn::with_io(nn::ced_preset(model), p.sino.n_angles, p.sino.kept_radial(), p.grid.n, p.grid.n);
}

void RunConfig::validate() const {
  try {
    const GeometryPreset p = geometry();
    p.grid.validate();
    p.sino.validate();
    plan.validate();
    osem.validate(p.sino);
    train.validate();
    model_spec().validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (psf_fwhm_mm < 0.0 || fbp.postfilter_fwhm_mm < 0.0) throw UsageError("FWHM values must be non-negative");
  if (phantom_count < 1) throw UsageError("phantom count must be at least 1");
  if (fractions.train <= 0.0 || fractions.validation <= 0.0 || fractions.test <= 0.0) {
    throw UsageError("split fractions must be positive");
  }
  if (bench.repetitions < 1 || bench.warmup < 0 || bench.count_bins < 1) throw UsageError("invalid bench settings");
  if (threads < 1) throw UsageError("threads must be at least 1");
}

json to_json(const RunConfig& c) {
  const nn::CedSpec spec = c.model_spec();
  return {
      {"preset", c.preset},
      {"seed", c.seed},
      {"psf_fwhm_mm", c.psf_fwhm_mm},
      {"phantom_count", c.phantom_count},
      {"simulation",
       {{"realizations", c.plan.realizations},
        {"augmented", c.plan.augmented},
        {"flipped", c.plan.flipped},
        {"min_target_counts", c.plan.min_target_counts},
        {"max_target_counts", c.plan.max_target_counts},
        {"scatter_mean", c.plan.scatter_mean},
        {"scatter_sd", c.plan.scatter_sd},
        {"randoms_mean", c.plan.randoms_mean},
        {"randoms_sd", c.plan.randoms_sd},
        {"fraction_lo", c.plan.fraction_lo},
        {"fraction_hi", c.plan.fraction_hi}}},
      {"splits", {{"train", c.fractions.train}, {"validation", c.fractions.validation}, {"test", c.fractions.test}}},
      {"fbp", {{"postfilter_fwhm_mm", c.fbp.postfilter_fwhm_mm}}},
      {"osem",
       {{"iterations", c.osem.iterations},
        {"subsets", c.osem.subsets},
        {"postfilter_fwhm_mm", c.osem.postfilter_fwhm_mm},
        {"epsilon", c.osem.epsilon}}},
      {"model", c.model},
      {"model_spec", nn::spec_to_json(spec)},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"bn_momentum", c.train.bn_momentum},
        {"lr_halving_epochs", c.train.lr_halving_epochs},
        {"sgd_momentum", c.train.sgd_momentum},
        {"epochs", c.train.epochs},
        {"validate_every", c.train.validate_every},
        {"seed", c.train.seed}}},
      {"bench", {{"repetitions", c.bench.repetitions}, {"warmup", c.bench.warmup}, {"count_bins", c.bench.count_bins}}},
      {"threads", c.threads},
      {"deterministic", c.deterministic},
  };
}

RunConfig from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  take(j, "preset", c.preset);
  if (c.preset == "paper" && !j.contains("model")) c.model = "deeppet";
  take(j, "seed", c.seed);
  take(j, "psf_fwhm_mm", c.psf_fwhm_mm);
  take(j, "phantom_count", c.phantom_count);
  if (j.contains("simulation")) {
    const json& s = j["simulation"];
    take(s, "realizations", c.plan.realizations);
    take(s, "augmented", c.plan.augmented);
    take(s, "flipped", c.plan.flipped);
    take(s, "min_target_counts", c.plan.min_target_counts);
    take(s, "max_target_counts", c.plan.max_target_counts);
    take(s, "scatter_mean", c.plan.scatter_mean);
    take(s, "scatter_sd", c.plan.scatter_sd);
    take(s, "randoms_mean", c.plan.randoms_mean);
    take(s, "randoms_sd", c.plan.randoms_sd);
    take(s, "fraction_lo", c.plan.fraction_lo);
    take(s, "fraction_hi", c.plan.fraction_hi);
  }
  if (j.contains("splits")) {
    take(j["splits"], "train", c.fractions.train);
    take(j["splits"], "validation", c.fractions.validation);
    take(j["splits"], "test", c.fractions.test);
  }
  if (j.contains("fbp")) take(j["fbp"], "postfilter_fwhm_mm", c.fbp.postfilter_fwhm_mm);
  if (j.contains("osem")) {
    take(j["osem"], "iterations", c.osem.iterations);
    take(j["osem"], "subsets", c.osem.subsets);
    take(j["osem"], "postfilter_fwhm_mm", c.osem.postfilter_fwhm_mm);
    take(j["osem"], "epsilon", c.osem.epsilon);
  }
  take(j, "model", c.model);
  if (j.contains("train")) {
    const json& t = j["train"];
    take(t, "learning_rate", c.train.learning_rate);
    take(t, "batch_size", c.train.batch_size);
    take(t, "bn_momentum", c.train.bn_momentum);
    take(t, "lr_halving_epochs", c.train.lr_halving_epochs);
    take(t, "sgd_momentum", c.train.sgd_momentum);
    take(t, "epochs", c.train.epochs);
    take(t, "validate_every", c.train.validate_every);
    take(t, "seed", c.train.seed);
  }
  if (j.contains("bench")) {
    take(j["bench"], "repetitions", c.bench.repetitions);
    take(j["bench"], "warmup", c.bench.warmup);
    take(j["bench"], "count_bins", c.bench.count_bins);
  }
  take(j, "threads", c.threads);
  take(j, "deterministic", c.deterministic);
  return c;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("config not found: " + path.string());
  return from_json(read_json(path));
}

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(dir / "run_config.json", to_json(cfg));
}

std::vector<fs::path> cmd_phantom(const RunConfig& cfg, int count, const fs::path& out) {
  if (count < 1) throw UsageError("--count must be at least 1");
  const GeometryPreset p = cfg.geometry();
  fs::create_directories(out);
  std::vector<fs::path> written;
  for (int id = 0; id < count; ++id) {
    const std::uint64_t seed = derive_seed(cfg.seed, 0x7068ULL, static_cast<std::uint64_t>(id));
    const Phantom ph = generate_phantom(p.grid, id, seed);
    const json meta = {{"phantom_id", id}, {"seed", seed}, {"preset", p.name}, {"grid", grid_json(p.grid)}};
    json a = meta;
    a["kind"] = "activity";
    json m = meta;
    m["kind"] = "mu";
    m["units"] = "1/mm";
    const fs::path pa = out / (phantom_stem(id) + "_activity.f32");
    const fs::path pm = out / (phantom_stem(id) + "_mu.f32");
    write_raster(pa, ph.activity, a);
    write_raster(pm, ph.mu, m);
    written.push_back(pa);
    written.push_back(pm);
  }
  return written;
}

std::vector<Phantom> load_phantoms(const fs::path& dir, const GeometryPreset& preset) {
  if (!fs::is_directory(dir)) throw DataError("phantom directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.starts_with("phantom_") && name.ends_with("_activity.f32")) files.push_back(e.path());
  }
  if (files.empty()) throw DataError("no phantoms in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<Phantom> out;
  for (const auto& pa : files) {
    json meta;
    Phantom ph;
    ph.activity = read_raster<ImageTag>(pa, &meta);
    std::string mu_name = pa.filename().string();
    mu_name.replace(mu_name.size() - std::string("_activity.f32").size(), std::string::npos, "_mu.f32");
    const fs::path pm = pa.parent_path() / mu_name;
    if (!fs::exists(pm)) throw DataError("missing attenuation map " + pm.string());
    ph.mu = read_raster<ImageTag>(pm);
    ph.id = meta.value("phantom_id", -1);
    if (ph.id < 0) throw DataError("phantom sidecar without phantom_id: " + pa.string());
    if (ph.activity.rows() != preset.grid.n || ph.activity.cols() != preset.grid.n || !ph.mu.same_shape(ph.activity)) {
      throw DataError("phantom " + pa.filename().string() + " does not match the " + preset.name + " grid");
    }
    out.push_back(std::move(ph));
  }
  return out;
}

DatasetManifest cmd_simulate(const RunConfig& cfg, const fs::path& phantom_dir, const fs::path& out) {
  const GeometryPreset p = cfg.geometry();
  const std::vector<Phantom> phantoms = load_phantoms(phantom_dir, p);
  DatasetOptions opt;
  opt.preset = cfg.preset;
  opt.psf_fwhm_mm = cfg.psf_fwhm_mm;
  opt.plan = cfg.plan;
  opt.fractions = cfg.fractions;
  opt.seed = cfg.seed;
  return build_dataset(phantoms, p, opt, out);
}

Image reconstruct_classical(const std::string& method, const RunConfig& cfg, const LoadedRecord& rec,
                            const SystemOperator& opr) {
  if (method == "fbp") return fbp(rec.precorrected, cfg.fbp, opr);
  if (method == "osem") {
    const EmissionModel model(opr, &rec.atten);
    return osem(rec.total, rec.additive, cfg.osem, model);
  }
  throw UsageError("unknown classical method: " + method);
}

std::vector<ReconOutput> cmd_recon(const RunConfig& cfg, const ReconRequest& req, const fs::path& out) {
  if (req.method != "fbp" && req.method != "osem" && req.method != "deeppet") {
    throw UsageError("--method must be fbp, osem or deeppet");
  }
  if (req.input.empty() == req.dataset.empty()) throw UsageError("give exactly one of --dataset or --input");
  const GeometryPreset p = cfg.geometry();
  const SystemOperator opr(p.grid, p.sino, cfg.psf_fwhm_mm);
  std::optional<nn::CedModel<float>> model;
  if (req.method == "deeppet") model.emplace(load_model(cfg, req.checkpoint));
  fs::create_directories(out);

  std::vector<ReconOutput> results;
  auto emit = [&](const std::string& id, const Image& img, const Image* truth, json meta) {
    ReconOutput r{id, out / (id + "_" + req.method + ".f32"), std::nullopt};
    if (truth) r.rrmse = rrmse(img, *truth);
    meta["method"] = req.method;
    meta["preset"] = p.name;
    meta["grid"] = grid_json(p.grid);
    meta["psf_fwhm_mm"] = cfg.psf_fwhm_mm;
    if (r.rrmse) meta["rrmse"] = *r.rrmse;
    write_raster(r.path, img, meta);
    write_viewables(r.path, img);
    results.push_back(r);
  };

  if (!req.input.empty()) {
    if (!fs::exists(req.input)) throw DataError("input not found: " + req.input.string());
    const Sinogram g = read_raster<SinogramTag>(req.input);
    const std::string id = req.input.stem().string();
    const json meta = {{"input", req.input.string()}};
    if (req.method == "osem") {
      if (g.rows() != p.sino.n_angles || g.cols() != p.sino.n_radial) {
        throw DataError("osem input must be a full " + std::to_string(p.sino.n_angles) + "x" +
                        std::to_string(p.sino.n_radial) + " sinogram");
      }
      const Sinogram gamma = req.additive.empty() ? blank_sinogram(p.sino) : read_raster<SinogramTag>(req.additive);
      std::optional<Sinogram> atten;
      if (!req.atten.empty()) atten = read_raster<SinogramTag>(req.atten);
      if (!gamma.same_shape(g) || (atten && !atten->same_shape(g))) throw DataError("sinogram shapes differ");
      const EmissionModel em(opr, atten ? &*atten : nullptr);
      emit(id, osem(g, gamma, cfg.osem, em), nullptr, meta);
    } else {
      if (g.rows() != p.sino.n_angles || g.cols() != p.sino.kept_radial()) {
        throw DataError("fbp/deeppet input must be a cropped " + std::to_string(p.sino.n_angles) + "x" +
                        std::to_string(p.sino.kept_radial()) + " precorrected sinogram");
      }
      emit(id, req.method == "fbp" ? fbp(g, cfg.fbp, opr) : nn::infer(*model, g), nullptr, meta);
    }
    return results;
  }

  const DatasetManifest m = open_dataset(cfg, req.dataset);
  std::vector<const ManifestEntry*> entries;
  if (req.records.empty()) {
    entries = m.split(split_from_string(req.split));
  } else {
    for (const auto& id : req.records) {
      auto it = std::find_if(m.entries.begin(), m.entries.end(), [&](const ManifestEntry& e) { return e.record_id == id; });
      if (it == m.entries.end()) throw DataError("record not in manifest: " + id);
      entries.push_back(&*it);
    }
  }
  if (entries.empty()) throw DataError("no records selected");
  for (const ManifestEntry* e : entries) {
    const LoadedRecord rec = load_record(*e, req.dataset);
    const Image img = req.method == "deeppet" ? nn::infer(*model, rec.precorrected)
                                              : reconstruct_classical(req.method, cfg, rec, opr);
    emit(e->record_id, img, &rec.truth, {{"record_id", e->record_id}, {"total_counts", e->total_counts}});
  }
  std::ofstream csv(out / ("recon_" + req.method + ".csv"));
  csv.precision(9);
  csv << "image_id,rrmse\n";
  for (const auto& r : results) csv << r.id << ',' << r.rrmse.value_or(0.0) << '\n';
  return results;
}

nn::TrainHistory cmd_train(const RunConfig& cfg, const fs::path& dataset, const fs::path& out) {
  const DatasetManifest m = open_dataset(cfg, dataset);
  const nn::Samples train_set = nn::load_split(m, dataset, Split::Train);
  const nn::Samples val_set = nn::load_split(m, dataset, Split::Validation);
  nn::TrainConfig tc = cfg.train;
  if (static_cast<std::size_t>(tc.batch_size) > train_set.size()) {
    throw UsageError("batch size " + std::to_string(tc.batch_size) + " exceeds the " +
                     std::to_string(train_set.size()) + " training samples");
  }
  nn::CedModel<float> model(cfg.model_spec(), cfg.train.seed);
  const nn::TrainHistory hist = nn::train(model, train_set, val_set, tc);
  fs::create_directories(out);
  nn::save_checkpoint(out / "model.ckpt", model,
                      {hist.best_epoch, std::isfinite(hist.best_val_mse) ? hist.best_val_mse : 0.0, cfg.train.seed});
  hist.write_csv(out / "history.csv");
  return hist;
}

EvalReport cmd_eval(const RunConfig& cfg, const fs::path& dataset, const fs::path& checkpoint, const fs::path& out,
                    const std::string& prefix, const BenchOptions& options) {
  const GeometryPreset p = cfg.geometry();
  const DatasetManifest m = open_dataset(cfg, dataset);
  const std::vector<const ManifestEntry*> test = m.split(Split::Test);
  if (test.empty()) throw DataError("empty test split");
  const SystemOperator opr(p.grid, p.sino, cfg.psf_fwhm_mm);
  std::optional<nn::CedModel<float>> model;
  if (!checkpoint.empty()) model.emplace(load_model(cfg, checkpoint));

  std::vector<LoadedRecord> recs;
  recs.reserve(test.size());
  for (const ManifestEntry* e : test) recs.push_back(load_record(*e, dataset));
  std::vector<std::string> methods = {"fbp", "osem"};
  if (model) methods.push_back("deeppet");

  std::vector<BenchCase> cases;
  for (const LoadedRecord& r : recs) {
    BenchCase c;
    c.image_id = r.entry->record_id;
    c.counts = r.entry->total_counts;
    c.truth = &r.truth;
    c.methods["fbp"] = [&cfg, &r, &opr] { return reconstruct_classical("fbp", cfg, r, opr); };
    c.methods["osem"] = [&cfg, &r, &opr] { return reconstruct_classical("osem", cfg, r, opr); };
    if (model) c.methods["deeppet"] = [&model, &r] { return nn::infer(*model, r.precorrected); };
    cases.push_back(std::move(c));
  }
  EvalReport rep = bench(cases, methods, options);
  fs::create_directories(out);
  rep.write_rows_csv(out / (prefix + "_rows.csv"));
  rep.write_summary_csv(out / (prefix + "_summary.csv"));
  rep.write_bins_csv(out / (prefix + "_bins.csv"));
  return rep;
}

}  // namespace deeppet::pipeline
