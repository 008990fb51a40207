// deeppet: phantom generation, simulation, reconstruction, training,
// evaluation and benchmarking from the command line.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "deeppet/nn/train.hpp"
#include "deeppet/raster_io.hpp"
#include "deeppet/recon.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using namespace deeppet;
using namespace deeppet::pipeline;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool deterministic = false;
  std::string preset;
  std::string out = "out";
};

RunConfig resolve(const GlobalFlags& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  nlohmann::json over = nlohmann::json::object();
  if (!g.preset.empty()) over["preset"] = g.preset;
  if (g.seed) over["seed"] = *g.seed;
  if (g.threads) over["threads"] = *g.threads;
  if (g.deterministic) over["deterministic"] = true;
  cfg = from_json(over, cfg);
  cfg.validate();
  // The library is single threaded; --threads is kept for interface
  // stability and only bounds Eigen's own pool when one is compiled in.
  Eigen::setNbThreads(cfg.threads);
  return cfg;
}

void print_report(const EvalReport& rep) {
  std::cout << "method,images,mean_rrmse,std_rrmse,mean_time_ms\n";
  for (const auto& s : rep.summary) {
    std::cout << s.method << ',' << s.images << ',' << s.mean_rrmse << ',' << s.std_rrmse << ',' << s.mean_time_ms
              << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D PET reconstruction with a convolutional encoder-decoder, FBP and OSEM"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", g.deterministic, "pin the reproducible execution path");
  app.add_option("--preset", g.preset, "geometry preset")->check(CLI::IsMember({"paper", "toy"}));
  app.add_option("--out", g.out, "output directory");

  int count = 0;
  auto* phantom = app.add_subcommand("phantom", "generate phantom and attenuation map pairs");
  phantom->add_option("--count", count, "number of phantoms")->required();

  std::string phantom_dir;
  auto* simulate = app.add_subcommand("simulate", "simulate a dataset of noisy acquisitions");
  simulate->add_option("--phantoms", phantom_dir, "directory written by 'phantom'")->required();

  ReconRequest req;
  std::string checkpoint;
  auto* recon = app.add_subcommand("recon", "reconstruct sinograms");
  recon->add_option("--method", req.method, "fbp, osem or deeppet")->required();
  recon->add_option("--dataset", req.dataset, "dataset root");
  recon->add_option("--split", req.split, "split to reconstruct")->check(CLI::IsMember({"train", "validation", "test"}));
  recon->add_option("--records", req.records, "record ids (default: the whole split)");
  recon->add_option("--input", req.input, "single sinogram raster");
  recon->add_option("--additive", req.additive, "expected scatter+randoms for --input (osem)");
  recon->add_option("--atten", req.atten, "attenuation factors for --input (osem)");
  recon->add_option("--checkpoint", req.checkpoint, "trained network (deeppet)");

  std::string dataset;
  std::optional<int> epochs;
  auto* train = app.add_subcommand("train", "train the network on a dataset");
  train->add_option("--dataset", dataset, "dataset root")->required();
  train->add_option("--epochs", epochs, "override the configured epoch count")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "rRMSE of every method on the test split");
  eval->add_option("--dataset", dataset, "dataset root")->required();
  eval->add_option("--checkpoint", checkpoint, "trained network");

  auto* benchc = app.add_subcommand("bench", "timing and rRMSE of every method on the test split");
  benchc->add_option("--dataset", dataset, "dataset root")->required();
  benchc->add_option("--checkpoint", checkpoint, "trained network");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    RunConfig cfg = resolve(g);
    if (epochs) cfg.train.epochs = *epochs;
    const fs::path out = g.out;
    echo_config(cfg, out);

    if (*phantom) {
      const auto files = cmd_phantom(cfg, count, out);
      std::cout << "wrote " << files.size() << " rasters to " << out << '\n';
    } else if (*simulate) {
      const DatasetManifest m = cmd_simulate(cfg, phantom_dir, out);
      std::cout << "records " << m.entries.size() << " (discarded " << m.discarded << "), train "
                << m.split(Split::Train).size() << ", validation " << m.split(Split::Validation).size() << ", test "
                << m.split(Split::Test).size() << '\n';
    } else if (*recon) {
      for (const auto& r : cmd_recon(cfg, req, out)) {
        std::cout << r.id << ' ' << r.path.string();
        if (r.rrmse) std::cout << " rrmse=" << *r.rrmse;
        std::cout << '\n';
      }
    } else if (*train) {
      const nn::TrainHistory h = cmd_train(cfg, dataset, out);
      std::cout << "initial_mse " << h.initial_train_mse << " best_epoch " << h.best_epoch << " best_val_mse "
                << h.best_val_mse << '\n';
    } else if (*eval) {
      print_report(cmd_eval(cfg, dataset, checkpoint, out, "eval", {1, 0, cfg.bench.count_bins}));
    } else if (*benchc) {
      print_report(
          cmd_eval(cfg, dataset, checkpoint, out, "bench", {cfg.bench.repetitions, cfg.bench.warmup, cfg.bench.count_bins}));
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nn::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
