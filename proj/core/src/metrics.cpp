#include "deeppet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "deeppet/raster_io.hpp"

namespace deeppet {

double mse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("mse: size mismatch");
  if (x.empty()) throw DomainError("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double rrmse(std::span<const double> x, std::span<const double> truth) {
  if (truth.empty()) throw DomainError("rrmse: empty input");
  double mean = 0.0;
  for (double v : truth) mean += v;
  mean /= static_cast<double>(truth.size());
  if (!(mean > 0.0)) throw DomainError("rrmse: ground truth mean must be positive");
  return std::sqrt(mse(x, truth)) / mean;
}

double poisson_loglik(const Sinogram& mean, const Sinogram& g) {
  mean.require_same(g);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] > 0.0) {
      if (!(mean[i] > 0.0)) throw DomainError("poisson_loglik: nonpositive mean where counts are positive");
      acc += g[i] * std::log(mean[i]);
    }
    acc -= mean[i];
  }
  return acc;
}

double poisson_loglik(const Image& f, const Sinogram& g, const Sinogram& gamma, const EmissionModel& model) {
  return poisson_loglik(model.forward(f) + gamma, g);
}

double median_time_ms(const std::function<void()>& fn, int repetitions, int warmup) {
  if (repetitions < 1) throw std::invalid_argument("median_time_ms needs repetitions >= 1");
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    Stopwatch sw;
    fn();
    t.push_back(sw.elapsed_ms());
  }
  std::sort(t.begin(), t.end());
  const std::size_t mid = t.size() / 2;
  return t.size() % 2 ? t[mid] : 0.5 * (t[mid - 1] + t[mid]);
}

const MethodSummary* EvalReport::find(const std::string& method) const {
  for (const auto& s : summary)
    if (s.method == method) return &s;
  return nullptr;
}

namespace {
std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os.precision(std::numeric_limits<double>::max_digits10);
  return os;
}
}  // namespace

void EvalReport::write_rows_csv(const std::filesystem::path& path) const {
  auto os = open_csv(path);
  os << "method,image_id,counts,rrmse,time_ms\n";
  for (const auto& r : rows) os << r.method << ',' << r.image_id << ',' << r.counts << ',' << r.rrmse << ',' << r.time_ms << '\n';
}

void EvalReport::write_summary_csv(const std::filesystem::path& path) const {
  auto os = open_csv(path);
  os << "method,mean_rrmse,std_rrmse,mean_time_ms\n";
  for (const auto& s : summary) os << s.method << ',' << s.mean_rrmse << ',' << s.std_rrmse << ',' << s.mean_time_ms << '\n';
}

void EvalReport::write_bins_csv(const std::filesystem::path& path) const {
  auto os = open_csv(path);
  os << "bin,lo_counts,hi_counts,method,images,mean_rrmse\n";
  for (std::size_t b = 0; b < count_bins.size(); ++b) {
    const auto& bin = count_bins[b];
    for (const auto& [method, value] : bin.mean_rrmse) {
      os << b << ',' << bin.lo_counts << ',' << bin.hi_counts << ',' << method << ',' << bin.images.at(method) << ','
         << value << '\n';
    }
  }
}

void summarize(EvalReport& report, const std::vector<std::string>& methods, int count_bins) {
  report.summary.clear();
  report.count_bins.clear();
  for (const auto& m : methods) {
    MethodSummary s;
    s.method = m;
    double sum = 0.0, sum2 = 0.0, tsum = 0.0;
    for (const auto& r : report.rows) {
      if (r.method != m) continue;
      ++s.images;
      sum += r.rrmse;
      sum2 += r.rrmse * r.rrmse;
      tsum += r.time_ms;
    }
    if (s.images > 0) {
      s.mean_rrmse = sum / s.images;
      s.std_rrmse = std::sqrt(std::max(0.0, sum2 / s.images - s.mean_rrmse * s.mean_rrmse));
      s.mean_time_ms = tsum / s.images;
    }
    report.summary.push_back(s);
  }

  if (count_bins < 1 || methods.empty()) return;
  // Equal-population bins over the distinct images of the first method.
  std::vector<std::pair<double, std::string>> images;
  for (const auto& r : report.rows)
    if (r.method == methods.front()) images.emplace_back(r.counts, r.image_id);
  std::sort(images.begin(), images.end());
  if (images.empty()) return;
  const int nb = std::min<int>(count_bins, static_cast<int>(images.size()));
  std::map<std::string, int> bin_of;
  for (int b = 0; b < nb; ++b) {
    const std::size_t lo = images.size() * static_cast<std::size_t>(b) / static_cast<std::size_t>(nb);
    const std::size_t hi = images.size() * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(nb);
    CountBin bin;
    bin.lo_counts = images[lo].first;
    bin.hi_counts = images[hi - 1].first;
    for (std::size_t i = lo; i < hi; ++i) bin_of[images[i].second] = b;
    report.count_bins.push_back(bin);
  }
  for (const auto& r : report.rows) {
    auto it = bin_of.find(r.image_id);
    if (it == bin_of.end()) continue;
    auto& bin = report.count_bins[static_cast<std::size_t>(it->second)];
    bin.mean_rrmse[r.method] += r.rrmse;
    bin.images[r.method] += 1;
  }
  for (auto& bin : report.count_bins)
    for (auto& [m, v] : bin.mean_rrmse) v /= bin.images[m];
}

EvalReport bench(const std::vector<BenchCase>& cases, const std::vector<std::string>& methods,
                 const BenchOptions& options) {
  if (cases.empty()) throw DomainError("bench: no test cases");
  EvalReport report;
  for (const auto& m : methods) {
    for (const auto& c : cases) {
      auto it = c.methods.find(m);
      if (it == c.methods.end()) throw DomainError("bench: case " + c.image_id + " lacks method " + m);
      Image out;
      const double t = median_time_ms([&] { out = it->second(); }, options.repetitions, options.warmup);
      report.rows.push_back({m, c.image_id, c.counts, rrmse(out, *c.truth), t});
    }
  }
  summarize(report, methods, options.count_bins);
  return report;
}

}  // namespace deeppet
