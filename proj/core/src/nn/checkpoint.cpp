#include "deeppet/nn/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "deeppet/raster_io.hpp"

namespace deeppet::nn {

using nlohmann::json;

json spec_to_json(const CedSpec& s) {
  return {{"name", s.name},
          {"input", {s.input_h, s.input_w}},
          {"output", {s.output_h, s.output_w}},
          {"stem_convs", s.stem_convs},
          {"base_features", s.base_features},
          {"downsample_blocks", s.downsample_blocks},
          {"convs_per_encoder_block", s.convs_per_encoder_block},
          {"decoder_steps", s.decoder_steps},
          {"convs_per_decoder_block", s.convs_per_decoder_block},
          {"optimizer", to_string(s.optimizer)},
          {"bn_momentum", s.bn_momentum},
          {"upsample", "bilinear"},
          {"conv_count", s.conv_count()},
          {"bottleneck_features", s.bottleneck_features()}};
}

CedSpec spec_from_json(const json& j) {
  CedSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.input_h = j.at("input").at(0).get<int>();
    s.input_w = j.at("input").at(1).get<int>();
    s.output_h = j.at("output").at(0).get<int>();
    s.output_w = j.at("output").at(1).get<int>();
    s.stem_convs = j.at("stem_convs").get<int>();
    s.base_features = j.at("base_features").get<int>();
    s.downsample_blocks = j.at("downsample_blocks").get<int>();
    s.convs_per_encoder_block = j.at("convs_per_encoder_block").get<int>();
    s.decoder_steps = j.at("decoder_steps").get<int>();
    s.convs_per_decoder_block = j.at("convs_per_decoder_block").get<int>();
    s.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    s.bn_momentum = j.at("bn_momentum").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model spec: ") + e.what());
  }
  s.validate();
  return s;
}

void save_checkpoint(const std::filesystem::path& path, CedModel<float>& model, const CheckpointInfo& info) {
  json shapes = json::array();
  std::vector<char> bytes;
  auto put = [&](const Tensor<float>& t, const std::string& name) {
    shapes.push_back({{"name", name}, {"shape", t.shape()}});
    for (float v : t.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
    }
  };
  for (auto* p : model.parameters()) put(p->value, p->name);
  for (auto* b : model.buffers()) put(*b, "buffer");

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  const json header = {{"format", "deeppet-checkpoint-v1"},
                       {"dtype", "float32"},
                       {"byte_order", "little"},
                       {"spec", spec_to_json(model.spec())},
                       {"epoch", info.epoch},
                       {"val_mse", info.val_mse},
                       {"seed", info.seed},
                       {"tensors", shapes}};
  write_json(sidecar_path(path), header);
}

CedModel<float> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  const json header = read_json(sidecar_path(path));
  if (header.value("format", "") != "deeppet-checkpoint-v1") throw DataError("not a checkpoint header: " + path.string());
  CedModel<float> model(spec_from_json(header.at("spec")), 0);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  std::vector<Tensor<float>*> targets;
  for (auto* p : model.parameters()) targets.push_back(&p->value);
  for (auto* b : model.buffers()) targets.push_back(b);
  const auto& shapes = header.at("tensors");
  if (shapes.size() != targets.size()) throw DataError("checkpoint tensor count does not match the architecture");
  std::size_t off = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (shapes[k].at("shape").get<std::array<int, 4>>() != targets[k]->shape()) {
      throw DataError("checkpoint tensor shape mismatch at index " + std::to_string(k));
    }
    if (off + targets[k]->size() * 4 > bytes.size()) throw DataError("checkpoint blob truncated");
    for (std::size_t i = 0; i < targets[k]->size(); ++i, off += 4) {
      const std::uint32_t bits = static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
      (*targets[k])[i] = std::bit_cast<float>(bits);
    }
  }
  if (off != bytes.size()) throw DataError("checkpoint blob has trailing data");
  if (info) {
    info->epoch = header.at("epoch").get<int>();
    info->val_mse = header.at("val_mse").get<double>();
    info->seed = header.at("seed").get<std::uint64_t>();
  }
  return model;
}

}  // namespace deeppet::nn
