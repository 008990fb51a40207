#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deeppet/projector.hpp"
#include "deeppet/recon.hpp"

namespace deeppet {

/// Mean squared error over all pixels.
double mse(std::span<const double> x, std::span<const double> y);
inline double mse(const Image& x, const Image& y) {
  x.require_same(y);
  return mse(x.values(), y.values());
}

/// sqrt(MSE) divided by the mean of the ground truth (full grid).
double rrmse(std::span<const double> x, std::span<const double> truth);
inline double rrmse(const Image& x, const Image& truth) {
  x.require_same(truth);
  return rrmse(x.values(), truth.values());
}

/// Poisson log-likelihood (without the log g! constant) of data g under the
/// mean model(f) + gamma: sum_i g_i log(mean_i) - mean_i.
double poisson_loglik(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model);
/// Same, given the expected sinogram directly.
double poisson_loglik(const Sinogram& mean, const Sinogram& g);

/// Wall-clock stopwatch on the steady clock.
class Stopwatch {
 public:
  Stopwatch() : start_(clock::now()) {}
  void reset() { start_ = clock::now(); }
  double elapsed_ms() const { return std::chrono::duration<double, std::milli>(clock::now() - start_).count(); }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

/// Median of `repetitions` timed calls of fn after `warmup` untimed calls.
double median_time_ms(const std::function<void()>& fn, int repetitions, int warmup = 1);

struct BenchRow {
  std::string method;
  std::string image_id;
  double counts = 0.0;
  double rrmse = 0.0;
  double time_ms = 0.0;
};

struct MethodSummary {
  std::string method;
  int images = 0;
  double mean_rrmse = 0.0;
  double std_rrmse = 0.0;
  double mean_time_ms = 0.0;
};

/// Count-binned mean rRMSE; bins are equal-population quantiles of counts.
struct CountBin {
  double lo_counts = 0.0;
  double hi_counts = 0.0;
  std::map<std::string, double> mean_rrmse;
  std::map<std::string, int> images;
};

struct EvalReport {
  std::vector<BenchRow> rows;
  std::vector<MethodSummary> summary;
  std::vector<CountBin> count_bins;

  const MethodSummary* find(const std::string& method) const;
  void write_rows_csv(const std::filesystem::path& path) const;
  void write_summary_csv(const std::filesystem::path& path) const;
  void write_bins_csv(const std::filesystem::path& path) const;
};

/// One test image with the reconstruction callables to time on it.
struct BenchCase {
  std::string image_id;
  double counts = 0.0;
  const Image* truth = nullptr;
  std::map<std::string, std::function<Image()>> methods;
};

struct BenchOptions {
  int repetitions = 3;
  int warmup = 1;
  int count_bins = 4;
};

/// Runs every method on every case, timing only the reconstruction call.
EvalReport bench(const std::vector<BenchCase>& cases, const std::vector<std::string>& methods,
                 const BenchOptions& options);

/// Recomputes summary and count bins from rows.
void summarize(EvalReport& report, const std::vector<std::string>& methods, int count_bins);

}  // namespace deeppet
