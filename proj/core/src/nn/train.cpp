#include "deeppet/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "deeppet/random.hpp"
#include "deeppet/raster_io.hpp"

namespace deeppet::nn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || batch_size < 2 || !(bn_momentum > 0.0 && bn_momentum <= 1.0) || lr_halving_epochs < 1 ||
      !(sgd_momentum >= 0.0 && sgd_momentum < 1.0) || epochs < 1 || validate_every < 1) {
    throw std::invalid_argument("invalid training configuration");
  }
}

double TrainConfig::lr_at(int epoch) const {
  return learning_rate * std::pow(0.5, (epoch - 1) / lr_halving_epochs);
}

Samples load_split(const DatasetManifest& manifest, const std::filesystem::path& root, Split split) {
  Samples s;
  for (const ManifestEntry* e : manifest.split(split)) {
    s.inputs.push_back(read_raster<SinogramTag>(root / e->precorrected_path));
    s.targets.push_back(read_raster<ImageTag>(root / e->truth_path));
    s.counts.push_back(e->total_counts);
    s.ids.push_back(e->record_id);
  }
  return s;
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os.precision(9);
  os << "epoch,train_mse,val_mse,lr\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.train_mse << ',';
    if (!std::isnan(e.val_mse)) os << e.val_mse;
    os << ',' << e.lr << '\n';
  }
}

int argmin_validation(const std::vector<EpochRecord>& epochs) {
  int best = -1;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (std::isnan(epochs[i].val_mse)) continue;
    if (best < 0 || epochs[i].val_mse < epochs[static_cast<std::size_t>(best)].val_mse) best = static_cast<int>(i);
  }
  return best;
}

namespace {

struct Batch {
  Tensor<float> x;
  Tensor<float> y;
};

Batch make_batch(const Samples& s, std::span<const std::size_t> idx) {
  std::vector<const Sinogram*> xs;
  std::vector<const Image*> ys;
  for (std::size_t i : idx) {
    xs.push_back(&s.inputs[i]);
    ys.push_back(&s.targets[i]);
  }
  return {to_tensor(xs), to_tensor(ys)};
}

struct Snapshot {
  std::vector<Tensor<float>::Storage> params;
  std::vector<Tensor<float>::Storage> buffers;

  void take(CedModel<float>& m) {
    params.clear();
    buffers.clear();
    for (auto* p : m.parameters()) params.push_back(p->value.values());
    for (auto* b : m.buffers()) buffers.push_back(b->values());
  }
  void restore(CedModel<float>& m) const {
    auto ps = m.parameters();
    auto bs = m.buffers();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value.values() = params[i];
    for (std::size_t i = 0; i < bs.size(); ++i) bs[i]->values() = buffers[i];
  }
};

std::vector<std::vector<std::size_t>> batches_for(std::size_t n, int batch_size, Rng* rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (rng)
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng->below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
    // Batch norm cannot train on a single sample.
    if (end - start < 2 && rng) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace

double evaluate_mse(CedModel<float>& model, const Samples& samples, int batch_size) {
  if (samples.size() == 0) throw std::invalid_argument("evaluate_mse: no samples");
  double acc = 0.0;
  for (const auto& idx : batches_for(samples.size(), batch_size, nullptr)) {
    const Batch b = make_batch(samples, idx);
    acc += mse_loss<float>(model.forward(b.x, false), b.y, nullptr) * static_cast<double>(idx.size());
  }
  return acc / static_cast<double>(samples.size());
}

TrainHistory train(CedModel<float>& model, const Samples& train_set, const Samples& val_set, const TrainConfig& cfg,
                   const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_set.size() < 2) throw std::invalid_argument("training set needs at least 2 samples");
  if (static_cast<std::size_t>(cfg.batch_size) > train_set.size()) {
    throw std::invalid_argument("batch size exceeds the training set size");
  }
  for (auto& l : model.layers())
    if (auto* bn = dynamic_cast<BatchNorm2d<float>*>(l.get())) bn->set_momentum(cfg.bn_momentum);

  TrainHistory hist;
  {
    // Loss of the untrained model under the same batch statistics training
    // sees; running statistics are restored afterwards.
    Snapshot before;
    before.take(model);
    double acc = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : batches_for(train_set.size(), cfg.batch_size, nullptr)) {
      if (idx.size() < 2) continue;
      const Batch b = make_batch(train_set, idx);
      acc += mse_loss<float>(model.forward(b.x, true), b.y, nullptr) * static_cast<double>(idx.size());
      seen += idx.size();
    }
    hist.initial_train_mse = acc / static_cast<double>(seen);
    before.restore(model);
    model.clear_cache();
  }

  Optimizer<float> opt(model.spec().optimizer, model.parameters(), cfg.sgd_momentum);
  Snapshot best;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    Rng rng(derive_seed(cfg.seed, 0x65706f63ULL, static_cast<std::uint64_t>(epoch)));
    double acc = 0.0;
    std::size_t seen = 0;
    int batch_id = 0;
    for (const auto& idx : batches_for(train_set.size(), cfg.batch_size, &rng)) {
      const Batch b = make_batch(train_set, idx);
      opt.zero_grad();
      const Tensor<float> out = model.forward(b.x, true);
      Tensor<float> grad;
      const double loss = mse_loss(out, b.y, &grad);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_id) +
                           ", lr " + std::to_string(lr));
      }
      model.backward(grad);
      opt.step(lr);
      acc += loss * static_cast<double>(idx.size());
      seen += idx.size();
      ++batch_id;
    }
    model.clear_cache();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_mse = acc / static_cast<double>(seen);
    if (val_set.size() > 0 && epoch % cfg.validate_every == 0) {
      rec.val_mse = evaluate_mse(model, val_set, cfg.batch_size);
      if (!std::isfinite(rec.val_mse)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
      if (rec.val_mse < hist.best_val_mse) {
        hist.best_val_mse = rec.val_mse;
        hist.best_epoch = epoch;
        best.take(model);
      }
    }
    hist.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (hist.best_epoch > 0) best.restore(model);
  return hist;
}

}  // namespace deeppet::nn
