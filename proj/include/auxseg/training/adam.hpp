#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "auxseg/nets/checkpoint.hpp"

namespace auxseg::train {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with per-parameter step counts: a parameter without a gradient in
/// a step (frozen) keeps its value, moments and count untouched.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }

  /// grads[i] belongs to model.parameters()[i]; empty means no update.
  void step(nn::Model<float>& model, const std::vector<std::vector<float>>& grads);

  std::int64_t steps(const std::string& name) const;

  /// Moments go into ckpt.blobs ("adam.m.<name>", "adam.v.<name>") and step
  /// counts into ckpt.info["adam"].
  void save_state(nn::Checkpoint& ckpt) const;
  void load_state(const nn::Checkpoint& ckpt);

 private:
  struct Slot {
    std::vector<float> m, v;
    std::int64_t t = 0;
  };
  AdamConfig cfg_;
  std::map<std::string, Slot> slots_;
};

}  // namespace auxseg::train
