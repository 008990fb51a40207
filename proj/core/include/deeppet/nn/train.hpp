#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "deeppet/nn/ced.hpp"
#include "deeppet/simulator.hpp"

namespace deeppet::nn {

/// Raised when the loss stops being finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.005;
  int batch_size = 30;
  double bn_momentum = 0.2;
  int lr_halving_epochs = 20;
  double sgd_momentum = 0.9;
  int epochs = 100;
  int validate_every = 5;
  std::uint64_t seed = 1;

  void validate() const;
  /// Learning rate in effect during (1-based) epoch e.
  double lr_at(int epoch) const;
};

/// Input/target pairs held in memory: cropped precorrected sinograms and
/// ground-truth images.
struct Samples {
  std::vector<Sinogram> inputs;
  std::vector<Image> targets;
  std::vector<double> counts;
  std::vector<std::string> ids;

  std::size_t size() const { return inputs.size(); }
};

Samples load_split(const DatasetManifest& manifest, const std::filesystem::path& root, Split split);

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = std::numeric_limits<double>::quiet_NaN();  ///< NaN when not evaluated
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  /// Epoch (1-based) with the lowest validation MSE; 0 if never validated.
  int best_epoch = 0;
  double best_val_mse = std::numeric_limits<double>::infinity();
  double initial_train_mse = 0.0;

  void write_csv(const std::filesystem::path& path) const;
};

/// Mean MSE of the model (eval mode) over a sample set.
double evaluate_mse(CedModel<float>& model, const Samples& samples, int batch_size = 30);

/// Mini-batch training with per-epoch seeded shuffling, validation every
/// `validate_every` epochs and step learning-rate decay. On return `model`
/// holds the parameters of the best validation epoch (or the last epoch if
/// there was no validation set).
TrainHistory train(CedModel<float>& model, const Samples& train_set, const Samples& val_set, const TrainConfig& cfg,
                   const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Index of the smallest recorded validation MSE (NaN entries ignored); -1 if none.
int argmin_validation(const std::vector<EpochRecord>& epochs);

}  // namespace deeppet::nn
