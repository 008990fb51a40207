#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deeppet/geometry.hpp"
#include "deeppet/phantom.hpp"
#include "deeppet/projector.hpp"

namespace deeppet {

/// Records whose noisy total count falls outside this window are discarded.
constexpr double kMinRetainedCounts = 1e5;
constexpr double kMaxRetainedCounts = 5e7;

/// Survival probability exp(-line integral of mu) for every LOR. The PSF of
/// `opr` is ignored: attenuation is a property of the ray, not of the detector.
Sinogram attenuation_factors(const Image& mu_map, const SystemOperator& opr);

struct SimulationParams {
  double target_counts = 1e6;
  double scatter_fraction = 0.25;
  double randoms_fraction = 0.20;
  /// Scatter kernel FWHM as a fraction of the kept radial extent.
  double scatter_fwhm_fraction = 0.4;
};

/// One simulated acquisition. Component sinograms hold expected values; only
/// `total` is a noisy (Poisson) realisation.
struct AcquisitionRecord {
  int phantom_id = 0;
  int realization = 0;
  /// Activity rescaled to this realisation's activity level, so that
  /// forward(ground_truth) is the expected unattenuated trues sinogram.
  Image ground_truth;
  Sinogram trues;
  Sinogram scatter;
  Sinogram randoms;
  Sinogram total;
  Sinogram atten;
  double total_counts = 0.0;
  double activity_scale = 0.0;
  SimulationParams params;
  Augmentation augmentation;
  std::uint64_t seed = 0;
  bool discarded = false;

  /// gamma = scatter + randoms (expected additive background).
  Sinogram additive() const { return scatter + randoms; }
};

/// Simulates Poisson{ atten * A(k * truth) + scatter + randoms }. `opr` is the
/// simulation operator, normally carrying a detector PSF.
AcquisitionRecord simulate(const Image& truth, const Image& mu_map, const SystemOperator& opr,
                           const SimulationParams& params, std::uint64_t seed);

/// (g - gamma) / atten, cropped to the kept radial bins. Negative values are kept.
Sinogram precorrect(const Sinogram& total, const Sinogram& gamma, const Sinogram& atten, const SinogramGeometry& geom);
Sinogram precorrect(const AcquisitionRecord& rec, const Sinogram& gamma, const SinogramGeometry& geom);

/// Per-phantom realisation schedule.
struct NoiseLevelPlan {
  int realizations = 9;
  int augmented = 3;
  int flipped = 1;
  double min_target_counts = 2e5;
  double max_target_counts = 2e7;
  double scatter_mean = 0.25;
  double scatter_sd = 0.05;
  double randoms_mean = 0.20;
  double randoms_sd = 0.05;
  double fraction_lo = 0.05;
  double fraction_hi = 0.45;

  void validate() const;
};

struct RealizationSpec {
  int index = 0;
  SimulationParams params;
  bool augment = false;
  Augmentation augmentation;
  std::uint64_t seed = 0;
};

/// Deterministic draw of every realisation of one phantom.
std::vector<RealizationSpec> plan_realizations(const NoiseLevelPlan& plan, const ImageGrid& grid, int phantom_id,
                                               std::uint64_t master_seed);

/// All realisations of one phantom, including discarded ones (flagged).
std::vector<AcquisitionRecord> simulate_phantom(const Phantom& phantom, const NoiseLevelPlan& plan,
                                                const SystemOperator& opr, std::uint64_t master_seed);

enum class Split { Train, Validation, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitFractions {
  double train = 0.66;
  double validation = 0.14;
  double test = 0.20;
};

/// Phantom-level split assignment. Depends only on the set of ids and the seed,
/// never on input order. Every split receives at least one phantom.
std::vector<std::pair<int, Split>> assign_splits(std::vector<int> phantom_ids, const SplitFractions& fractions,
                                                 std::uint64_t seed);

struct ManifestEntry {
  std::string record_id;
  int phantom_id = 0;
  int realization = 0;
  Split split = Split::Train;
  double total_counts = 0.0;
  std::uint64_t seed = 0;
  bool augmented = false;
  Augmentation augmentation;
  /// Paths relative to the dataset root.
  std::string truth_path;
  std::string total_path;
  std::string trues_path;
  std::string scatter_path;
  std::string randoms_path;
  std::string atten_path;
  std::string precorrected_path;
};

struct DatasetManifest {
  std::string preset;
  ImageGrid grid;
  SinogramGeometry geometry;
  double psf_fwhm_mm = 0.0;
  std::uint64_t seed = 0;
  int phantoms = 0;
  int discarded = 0;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(Split s) const;
};

struct DatasetOptions {
  std::string preset = "toy";
  double psf_fwhm_mm = 5.0;
  NoiseLevelPlan plan;
  SplitFractions fractions;
  std::uint64_t seed = 1;
};

/// Simulates every phantom, writes the retained records under `root` and
/// returns the manifest (also written to root/manifest.json).
DatasetManifest build_dataset(const std::vector<Phantom>& phantoms, const GeometryPreset& preset,
                              const DatasetOptions& options, const std::filesystem::path& root);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// A record as needed by reconstruction and training, loaded from disk.
struct LoadedRecord {
  const ManifestEntry* entry = nullptr;
  Image truth;
  Sinogram total;
  Sinogram additive;
  Sinogram atten;
  Sinogram precorrected;
};
LoadedRecord load_record(const ManifestEntry& entry, const std::filesystem::path& root);

}  // namespace deeppet
