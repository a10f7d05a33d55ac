#include "qsmlot/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace qsmlot::nn {

namespace {

constexpr char kMagic[8] = {'Q', 'L', 'O', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json config_to_json(const LotUnetConfig& c) {
  return {{"lot_mode", c.lot_mode == LotMode::fixed ? "fixed" : "learnable"},
          {"lot_kernels", c.lot_kernels},
          {"unet",
           {{"depth", c.unet.depth},
            {"base_channels", c.unet.base_channels},
            {"in_channels", c.unet.in_channels},
            {"out_channels", c.unet.out_channels}}}};
}

LotUnetConfig config_from_json(const nlohmann::json& j) {
  LotUnetConfig c;
  c.lot_mode = j.at("lot_mode").get<std::string>() == "fixed" ? LotMode::fixed : LotMode::learnable;
  c.lot_kernels = j.at("lot_kernels").get<int>();
  const auto& u = j.at("unet");
  c.unet.depth = u.at("depth").get<int>();
  c.unet.base_channels = u.at("base_channels").get<int>();
  c.unet.in_channels = u.at("in_channels").get<int>();
  c.unet.out_channels = u.at("out_channels").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["fingerprint"] = ckpt.fingerprint;
  header["target"] = target_name(ckpt.target);
  header["epoch"] = ckpt.epoch;
  header["train_config_hash"] = ckpt.train_config_hash;
  header["loss_curve"] = ckpt.loss_curve;
  header["config"] = config_to_json(ckpt.config);
  auto dir = nlohmann::json::array();
  for (const auto& [name, data] : ckpt.tensors) {
    const auto shape_it = ckpt.tensor_shapes.find(name);
    dir.push_back({{"name", name},
                   {"count", data.size()},
                   {"shape", shape_it != ckpt.tensor_shapes.end() ? shape_it->second
                                                                  : std::vector<int>{}},
                   {"kind", "param"}});
  }
  for (const auto& [name, data] : ckpt.running_stats) {
    dir.push_back({{"name", name}, {"count", data.size()}, {"kind", "stat"}});
  }
  header["tensors"] = dir;
  const std::string header_str = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_checkpoint: cannot open " + path.string() + " for writing");
  f.write(kMagic, 8);
  const std::uint32_t version = kVersion;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t hlen = header_str.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& entry : header["tensors"]) {
    const std::string name = entry["name"].get<std::string>();
    const auto& data = entry["kind"] == "param" ? ckpt.tensors.at(name) : ckpt.running_stats.at(name);
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!f) throw IoError("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("load_checkpoint: not a checkpoint file: " + path.string());
  }
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (version != kVersion) {
    throw UnsupportedError("load_checkpoint: unsupported version " + std::to_string(version));
  }
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  std::string header_str(hlen, '\0');
  f.read(header_str.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw IoError("load_checkpoint: truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const std::exception& e) {
    throw IoError(std::string("load_checkpoint: corrupt header: ") + e.what());
  }

  Checkpoint c;
  c.fingerprint = header.at("fingerprint").get<std::string>();
  c.target = target_from_name(header.at("target").get<std::string>());
  c.epoch = header.at("epoch").get<int>();
  c.train_config_hash = header.value("train_config_hash", "");
  c.loss_curve = header.value("loss_curve", std::vector<double>{});
  c.config = config_from_json(header.at("config"));

  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto count = entry.at("count").get<std::size_t>();
    std::vector<double> data(count);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw IoError("load_checkpoint: truncated tensor data in " + path.string());
    if (entry.at("kind").get<std::string>() == "param") {
      c.tensors[name] = std::move(data);
      if (entry.contains("shape")) {
        c.tensor_shapes[name] = entry.at("shape").get<std::vector<int>>();
      }
    } else {
      c.running_stats[name] = std::move(data);
    }
  }
  return c;
}

}  // namespace qsmlot::nn
