#include "auxseg/training/adam.hpp"

#include <cmath>

namespace auxseg::train {

void Adam::step(nn::Model<float>& model, const std::vector<std::vector<float>>& grads) {
  auto& params = model.parameters();
  if (grads.size() != params.size()) throw ArgumentError("gradient list does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads[i];
    if (g.empty()) continue;
    auto& p = params[i];
    if (g.size() != p.size()) throw ArgumentError("gradient size mismatch for '" + p.name + "'");
    Slot& s = slots_[p.name];
    if (s.m.empty()) {
      s.m.assign(p.size(), 0.f);
      s.v.assign(p.size(), 0.f);
    }
    ++s.t;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    const double step = cfg_.learning_rate / bc1;
    const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
    const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    for (std::size_t k = 0; k < p.size(); ++k) {
      s.m[k] = b1 * s.m[k] + (1.f - b1) * g[k];
      s.v[k] = b2 * s.v[k] + (1.f - b2) * g[k] * g[k];
      const double denom = std::sqrt(static_cast<double>(s.v[k])) * inv_sqrt_bc2 + cfg_.epsilon;
      p.value[k] = static_cast<float>(p.value[k] - step * s.m[k] / denom);
    }
  }
}

std::int64_t Adam::steps(const std::string& name) const {
  const auto it = slots_.find(name);
  return it == slots_.end() ? 0 : it->second.t;
}

void Adam::save_state(nn::Checkpoint& ckpt) const {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [name, s] : slots_) {
    ckpt.blobs["adam.m." + name] = s.m;
    ckpt.blobs["adam.v." + name] = s.v;
    counts[name] = s.t;
  }
  ckpt.info["adam"] = {{"learning_rate", cfg_.learning_rate},
                       {"beta1", cfg_.beta1},
                       {"beta2", cfg_.beta2},
                       {"epsilon", cfg_.epsilon},
                       {"steps", counts}};
}

void Adam::load_state(const nn::Checkpoint& ckpt) {
  slots_.clear();
  if (!ckpt.info.contains("adam")) throw FormatError("checkpoint holds no optimizer state");
  for (const auto& [name, t] : ckpt.info.at("adam").at("steps").items()) {
    Slot s;
    s.t = t.get<std::int64_t>();
    const auto m = ckpt.blobs.find("adam.m." + name);
    const auto v = ckpt.blobs.find("adam.v." + name);
    if (m == ckpt.blobs.end() || v == ckpt.blobs.end()) throw FormatError("missing Adam moments for '" + name + "'");
    s.m = m->second;
    s.v = v->second;
    slots_.emplace(name, std::move(s));
  }
}

}  // namespace auxseg::train
