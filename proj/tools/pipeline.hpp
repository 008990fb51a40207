#pragma once

// Command implementations shared by the deeppet executable and the tests.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deeppet/geometry.hpp"
#include "deeppet/metrics.hpp"
#include "deeppet/nn/ced.hpp"
#include "deeppet/nn/train.hpp"
#include "deeppet/phantom.hpp"
#include "deeppet/recon.hpp"
#include "deeppet/simulator.hpp"

namespace deeppet::pipeline {

/// Bad flag or config value. Maps to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BenchSettings {
  int repetitions = 3;
  int warmup = 1;
  int count_bins = 4;
};

/// Everything that determines the artifacts of a run.
struct RunConfig {
  std::string preset = "toy";
  std::uint64_t seed = 1;
  double psf_fwhm_mm = 5.0;
  int phantom_count = 60;
  NoiseLevelPlan plan;
  SplitFractions fractions;
  FbpConfig fbp;
  OsemConfig osem;
  std::string model = "toy";
  nn::TrainConfig train;
  BenchSettings bench;
  int threads = 1;
  bool deterministic = true;

  GeometryPreset geometry() const { return preset_by_name(preset); }
  /// Network preset with its input and output adapted to the geometry.
  nn::CedSpec model_spec() const;
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Keys absent from `j` keep the values already in `base`.
RunConfig from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);
/// Writes `<dir>/run_config.json`.
void echo_config(const RunConfig& cfg, const std::filesystem::path& dir);

/// Writes phantom_<id>_activity.f32 and phantom_<id>_mu.f32 (with sidecars)
/// for ids 0..count-1.
std::vector<std::filesystem::path> cmd_phantom(const RunConfig& cfg, int count, const std::filesystem::path& out);
std::vector<Phantom> load_phantoms(const std::filesystem::path& dir, const GeometryPreset& preset);

DatasetManifest cmd_simulate(const RunConfig& cfg, const std::filesystem::path& phantom_dir,
                             const std::filesystem::path& out);

struct ReconRequest {
  std::string method;  // fbp | osem | deeppet
  std::filesystem::path dataset;
  std::string split = "test";
  std::vector<std::string> records;  // empty means the whole split
  std::filesystem::path input;       // single sinogram instead of a dataset
  std::filesystem::path additive;    // optional, osem with --input
  std::filesystem::path atten;       // optional, osem with --input
  std::filesystem::path checkpoint;
};

struct ReconOutput {
  std::string id;
  std::filesystem::path path;
  std::optional<double> rrmse;
};

std::vector<ReconOutput> cmd_recon(const RunConfig& cfg, const ReconRequest& req, const std::filesystem::path& out);

nn::TrainHistory cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out);

/// Evaluates fbp and osem (plus deeppet when a checkpoint is given) on the
/// test split. Writes rows, summary and count-bin CSVs with the given prefix.
EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& dataset,
                    const std::filesystem::path& checkpoint, const std::filesystem::path& out,
                    const std::string& prefix, const BenchOptions& options);

/// Reconstruction of one loaded record with a classical method.
Image reconstruct_classical(const std::string& method, const RunConfig& cfg, const LoadedRecord& rec,
                            const SystemOperator& opr);

}  // namespace deeppet::pipeline
