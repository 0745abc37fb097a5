#pragma once

// Central finite-difference check of the training-step gradients.

#include <algorithm>
#include <cmath>
#include <string>

#include "auxseg/random.hpp"
#include "auxseg/training/step.hpp"

namespace auxseg::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

inline nn::Model<double> small_ynet_double(std::uint64_t seed, nn::Arch arch = nn::Arch::ynet) {
  nn::NetConfig cfg;
  cfg.base_width = 2;
  cfg.groupnorm_groups = 2;
  cfg.levels = 3;
  cfg.init_seed = seed;
  cfg.nddr_init = nn::NddrInit::random;
  auto m = nn::build_model<double>(cfg, arch, nn::SigmaMode::learned);
  // Move off the symmetric initial point so every term is exercised.
  Rng rng = make_rng({seed, 77});
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (auto& p : m.parameters()) {
    for (double& v : p.value) v += jitter(rng);
  }
  return m;
}

inline train::PatchBatch<double> random_batch(const Extent3& e, std::uint64_t seed) {
  train::PatchBatch<double> b;
  b.source = nn::Tensor<double>(1, e);
  Rng rng = make_rng({seed, 3});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.3);
  for (double& v : b.source.data) v = normal(rng);
  b.label.resize(e.count());
  b.auxiliary.resize(e.count());
  for (auto& v : b.label) v = coin(rng) ? 1.0f : 0.0f;
  for (auto& v : b.auxiliary) v = static_cast<float>(normal(rng));
  return b;
}

/// Compares analytic gradients with central differences of the total loss.
/// Relative error is |a - n| / max(|a|, |n|, floor). With `per_tensor` > 0
/// only that many randomly chosen entries of each parameter tensor are
/// checked; every tensor is still visited.
inline GradCheckResult gradient_check(nn::Model<double> model, const train::PatchBatch<double>& batch,
                                      train::StepKind kind, double tol, double h = 1e-6, double floor = 1e-5,
                                      std::size_t per_tensor = 0) {
  const auto analytic = train::compute_gradients(model, batch, kind);
  GradCheckResult r;
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = analytic.grads[i];
    std::vector<std::size_t> entries(params[i].size());
    for (std::size_t k = 0; k < entries.size(); ++k) entries[k] = k;
    if (per_tensor > 0 && entries.size() > per_tensor) {
      Rng rng = make_rng({i, 0x9c});
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(per_tensor);
    }
    for (const std::size_t k : entries) {
      double& v = params[i].value[k];
      const double saved = v;
      v = saved + h;
      const double up = train::evaluate_loss(model, batch, kind).total;
      v = saved - h;
      const double down = train::evaluate_loss(model, batch, kind).total;
      v = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = g.empty() ? 0.0 : g[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++r.checked;
      if (rel > tol) ++r.failures;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = params[i].name + "[" + std::to_string(k) + "] analytic " + std::to_string(a) + " numeric " +
                  std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace auxseg::testing
