#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <string>

#include "deeppet/raster_io.hpp"
#include "deeppet/recon.hpp"
#include "helpers.hpp"
#include "pipeline.hpp"

using namespace deeppet;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(DEEPPET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

// Five phantoms, two realizations each, two short epochs.
const char* kTinyConfig = R"({
  "preset": "toy",
  "seed": 3,
  "simulation": {"realizations": 2, "augmented": 1, "flipped": 0},
  "train": {"batch_size": 2, "epochs": 2, "validate_every": 1, "seed": 4},
  "bench": {"repetitions": 1, "warmup": 0}
})";

struct TinyRun {
  fs::path root;
  fs::path config;
  fs::path phantoms;
  fs::path dataset;
  fs::path model;
};

// Built once and shared by the tests below.
const TinyRun& tiny_run() {
  static const TinyRun r = [] {
    TinyRun t;
    t.root = testing::scratch_dir("cli");
    t.config = t.root / "config.json";
    std::ofstream(t.config) << kTinyConfig;
    t.phantoms = t.root / "phantoms";
    t.dataset = t.root / "dataset";
    t.model = t.root / "model";
    const std::string cfg = "--config " + t.config.string() + " --deterministic --threads 1";
    REQUIRE(run(cfg + " --out " + t.phantoms.string() + " phantom --count 5") == 0);
    REQUIRE(run(cfg + " --out " + t.dataset.string() + " simulate --phantoms " + t.phantoms.string()) == 0);
    REQUIRE(run(cfg + " --out " + t.model.string() + " train --dataset " + t.dataset.string()) == 0);
    return t;
  }();
  return r;
}

std::string cfg_flags() { return "--config " + tiny_run().config.string() + " --deterministic --threads 1"; }

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("phantom") == 2);
  CHECK(run("--preset huge phantom --count 1") == 2);
  const fs::path out = testing::scratch_dir("cli_usage");
  CHECK(run("--out " + out.string() + " phantom --count 0") == 2);
  CHECK(run("--out " + out.string() + " --threads 0 phantom --count 1") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("phantom writes one raster pair with sidecars") {
  const fs::path out = testing::scratch_dir("cli_phantom");
  REQUIRE(run("--seed 9 --out " + out.string() + " phantom --count 1") == 0);
  std::set<std::string> rasters, sidecars;
  for (const auto& e : fs::directory_iterator(out)) {
    const std::string name = e.path().filename().string();
    if (e.path().extension() == ".f32") rasters.insert(name);
  }
  for (const auto& r : rasters)
    if (fs::exists(sidecar_path(out / r))) sidecars.insert(r);
  CHECK(rasters == std::set<std::string>{"phantom_00000_activity.f32", "phantom_00000_mu.f32"});
  CHECK(sidecars.size() == 2);
  // The resolved configuration is echoed next to the outputs.
  CHECK(fs::exists(out / "run_config.json"));
  CHECK(std::distance(fs::directory_iterator(out), fs::directory_iterator{}) == 5);

  nlohmann::json meta;
  const Image a = read_raster<ImageTag>(out / "phantom_00000_activity.f32", &meta);
  CHECK(a.rows() == 64);
  CHECK(meta["phantom_id"] == 0);
}

TEST_CASE("phantom output depends only on the seed") {
  const fs::path a = testing::scratch_dir("cli_seed_a");
  const fs::path b = testing::scratch_dir("cli_seed_b");
  const fs::path c = testing::scratch_dir("cli_seed_c");
  REQUIRE(run("--seed 5 --out " + a.string() + " phantom --count 2") == 0);
  REQUIRE(run("--seed 5 --out " + b.string() + " phantom --count 2") == 0);
  REQUIRE(run("--seed 6 --out " + c.string() + " phantom --count 2") == 0);
  for (const char* f : {"phantom_00001_activity.f32", "phantom_00001_mu.f32.json", "phantom_00000_mu.f32"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "phantom_00001_activity.f32") != slurp(c / "phantom_00001_activity.f32"));
}

TEST_CASE("data errors exit with code 3") {
  const fs::path out = testing::scratch_dir("cli_data");
  CHECK(run("--out " + out.string() + " simulate --phantoms " + (out / "missing").string()) == 3);
  CHECK(run("--out " + out.string() + " train --dataset " + out.string()) == 3);
  CHECK(run("--out " + out.string() + " recon --method fbp --input " + (out / "none.f32").string()) == 3);
  CHECK(run("--out " + out.string() + " --config " + (out / "nope.json").string() + " phantom --count 1") == 3);
}

TEST_CASE("simulate writes a manifest with disjoint splits") {
  const TinyRun& t = tiny_run();
  const DatasetManifest m = load_manifest(t.dataset / "manifest.json");
  CHECK(m.entries.size() + static_cast<std::size_t>(m.discarded) == 10);
  std::set<int> train, val, test;
  for (const auto& e : m.entries) {
    CHECK(e.total_counts >= 1e5);
    CHECK(e.total_counts <= 5e7);
    (e.split == Split::Train ? train : e.split == Split::Validation ? val : test).insert(e.phantom_id);
  }
  for (int id : test) CHECK((train.count(id) + val.count(id)) == 0);
  for (int id : val) CHECK(train.count(id) == 0);
}

TEST_CASE("osem from the command line matches the library bit for bit") {
  const TinyRun& t = tiny_run();
  const DatasetManifest m = load_manifest(t.dataset / "manifest.json");
  const ManifestEntry& e = *m.split(Split::Test).front();
  const fs::path out = testing::scratch_dir("cli_osem");
  REQUIRE(run(cfg_flags() + " --out " + out.string() + " recon --method osem --dataset " + t.dataset.string() +
              " --records " + e.record_id) == 0);

  const pipeline::RunConfig cfg = pipeline::load_config(t.config);
  const GeometryPreset p = cfg.geometry();
  const SystemOperator opr(p.grid, p.sino, cfg.psf_fwhm_mm);
  const LoadedRecord rec = load_record(e, t.dataset);
  const Image lib = osem(rec.total, rec.additive, cfg.osem, EmissionModel(opr, &rec.atten));
  const Image cli = read_raster<ImageTag>(out / (e.record_id + "_osem.f32"));
  REQUIRE(cli.same_shape(lib));
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < lib.size(); ++i) mismatches += static_cast<double>(static_cast<float>(lib[i])) != cli[i];
  CHECK(mismatches == 0);
  CHECK(fs::exists(out / (e.record_id + "_osem.png")));
  CHECK(fs::exists(out / (e.record_id + "_osem.pgm")));
}

TEST_CASE("fbp of a zero sinogram is a zero image") {
  const fs::path out = testing::scratch_dir("cli_fbp");
  const GeometryPreset p = toy_preset();
  write_raster(out / "zero.f32", Sinogram(p.sino.n_angles, p.sino.kept_radial()));
  REQUIRE(run("--out " + out.string() + " recon --method fbp --input " + (out / "zero.f32").string()) == 0);
  const Image img = read_raster<ImageTag>(out / "zero_fbp.f32");
  CHECK(img.rows() == 64);
  CHECK(img.cols() == 64);
  for (double v : img.values()) CHECK(v == 0.0);
  // A full-size sinogram is the wrong input for fbp.
  write_raster(out / "full.f32", Sinogram(p.sino.n_angles, p.sino.n_radial));
  CHECK(run("--out " + out.string() + " recon --method fbp --input " + (out / "full.f32").string()) == 3);
}

TEST_CASE("train writes a checkpoint and loss curves") {
  const TinyRun& t = tiny_run();
  CHECK(fs::exists(t.model / "model.ckpt"));
  const auto hist = csv_lines(t.model / "history.csv");
  REQUIRE(hist.size() == 3);
  CHECK(hist[0] == "epoch,train_mse,val_mse,lr");
}

TEST_CASE("deeppet recon needs a matching checkpoint") {
  const TinyRun& t = tiny_run();
  const fs::path out = testing::scratch_dir("cli_deeppet");
  const std::string base = cfg_flags() + " --out " + out.string() + " recon --method deeppet --dataset " + t.dataset.string();
  CHECK(run(base) == 2);
  CHECK(run(base + " --checkpoint " + (out / "missing.ckpt").string()) == 3);
  REQUIRE(run(base + " --checkpoint " + (t.model / "model.ckpt").string()) == 0);

  const DatasetManifest m = load_manifest(t.dataset / "manifest.json");
  for (const ManifestEntry* e : m.split(Split::Test)) {
    const Image img = read_raster<ImageTag>(out / (e->record_id + "_deeppet.f32"));
    CHECK(img.rows() == 64);
    CHECK(img.cols() == 64);
    for (double v : img.values()) CHECK(v >= 0.0);
  }
}

TEST_CASE("eval and bench report every method") {
  const TinyRun& t = tiny_run();
  const DatasetManifest m = load_manifest(t.dataset / "manifest.json");
  const std::size_t n_test = m.split(Split::Test).size();
  const fs::path out = testing::scratch_dir("cli_eval");
  const std::string ckpt = " --checkpoint " + (t.model / "model.ckpt").string();
  REQUIRE(run(cfg_flags() + " --out " + out.string() + " eval --dataset " + t.dataset.string()) == 0);
  CHECK(csv_lines(out / "eval_rows.csv").size() == 1 + 2 * n_test);

  REQUIRE(run(cfg_flags() + " --out " + out.string() + " bench --dataset " + t.dataset.string() + ckpt) == 0);
  const auto summary = csv_lines(out / "bench_summary.csv");
  REQUIRE(summary.size() == 4);
  std::set<std::string> methods;
  for (std::size_t i = 1; i < summary.size(); ++i) methods.insert(summary[i].substr(0, summary[i].find(',')));
  CHECK(methods == std::set<std::string>{"fbp", "osem", "deeppet"});
  CHECK(csv_lines(out / "bench_rows.csv").size() == 1 + 3 * n_test);
}

TEST_CASE("a diverging run exits with code 4") {
  const TinyRun& t = tiny_run();
  const fs::path out = testing::scratch_dir("cli_nan");
  std::ofstream(out / "config.json") << R"({"seed": 3, "train": {"batch_size": 2, "epochs": 2, "learning_rate": 1e30}})";
  CHECK(run("--config " + (out / "config.json").string() + " --out " + out.string() + " train --dataset " +
            t.dataset.string()) == 4);
}

TEST_CASE("dataset and configured preset must agree") {
  const TinyRun& t = tiny_run();
  const fs::path out = testing::scratch_dir("cli_mismatch");
  CHECK(run("--preset paper --out " + out.string() + " recon --method fbp --dataset " + t.dataset.string()) == 3);
}
