#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qsmlot/nn/config.hpp"
#include "qsmlot/nn/unet.hpp"

namespace qsmlot::nn {

// Versioned checkpoint container:
//   magic "QLOTCKPT", u32 version, u64 header length, JSON header
//   (fingerprint, configs, provenance, tensor directory), then raw
//   little-endian float64 tensor data in directory order.
// Weights are stored as float64 regardless of the training precision, so a
// float32-trained net round-trips exactly.
struct Checkpoint {
  LotUnetConfig config;
  Target target = Target::iqsm;
  std::string fingerprint;
  int epoch = 0;
  std::string train_config_hash;
  std::vector<double> loss_curve;
  std::map<std::string, std::vector<double>> tensors;
  std::map<std::string, std::vector<int>> tensor_shapes;
  std::map<std::string, std::vector<double>> running_stats;  // batch-norm state
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Serializes a live model into a Checkpoint (parameters + running stats).
template <class T>
Checkpoint snapshot(LotUnet<T>& model, Target target, int epoch,
                    const std::string& train_config_hash = {},
                    std::vector<double> loss_curve = {}) {
  Checkpoint c;
  c.config = model.config();
  c.target = target;
  c.fingerprint = model.config().fingerprint();
  c.epoch = epoch;
  c.train_config_hash = train_config_hash;
  c.loss_curve = std::move(loss_curve);
  for (auto* p : model.params()) {
    std::vector<double> v(p->value.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(p->value[i]);
    c.tensors[p->name] = std::move(v);
    c.tensor_shapes[p->name] = p->shape;
  }
  auto bns = model.unet().batchnorms();
  for (std::size_t i = 0; i < bns.size(); ++i) {
    c.running_stats["bn" + std::to_string(i) + ".mean"] = bns[i]->running_mean();
    c.running_stats["bn" + std::to_string(i) + ".var"] = bns[i]->running_var();
  }
  return c;
}

// Restores weights and running stats into a model constructed from
// ckpt.config. Throws Error if the fingerprint disagrees.
template <class T>
void restore(const Checkpoint& ckpt, LotUnet<T>& model) {
  if (model.config().fingerprint() != ckpt.fingerprint) {
    throw Error("checkpoint: architecture fingerprint mismatch (checkpoint '" + ckpt.fingerprint +
                "' vs model '" + model.config().fingerprint() + "')");
  }
  for (auto* p : model.params()) {
    auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) throw Error("checkpoint: missing tensor " + p->name);
    if (it->second.size() != p->value.size()) {
      throw Error("checkpoint: size mismatch for tensor " + p->name);
    }
    auto shape_it = ckpt.tensor_shapes.find(p->name);
    if (shape_it != ckpt.tensor_shapes.end() && shape_it->second != p->shape) {
      throw Error("checkpoint: shape mismatch for tensor " + p->name);
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->value[i] = static_cast<T>(it->second[i]);
    }
  }
  auto bns = model.unet().batchnorms();
  for (std::size_t i = 0; i < bns.size(); ++i) {
    auto mit = ckpt.running_stats.find("bn" + std::to_string(i) + ".mean");
    auto vit = ckpt.running_stats.find("bn" + std::to_string(i) + ".var");
    if (mit == ckpt.running_stats.end() || vit == ckpt.running_stats.end()) {
      throw Error("checkpoint: missing batch-norm running statistics");
    }
    bns[i]->running_mean() = mit->second;
    bns[i]->running_var() = vit->second;
  }
}

}  // namespace qsmlot::nn
