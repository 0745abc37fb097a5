#include "auxseg/training/step.hpp"

#include <cmath>

namespace auxseg::train {

template <typename T>
loss::SigmaState sigma_state(const nn::Model<T>& model) {
  if (model.sigma_mode() == nn::SigmaMode::learned && model.log_var_seg()) {
    return loss::SigmaState::learned(model.at(*model.log_var_seg()).value[0], model.at(*model.log_var_trans()).value[0]);
  }
  return loss::SigmaState::fixed(model.sigma_seg(), model.sigma_trans());
}

bool frozen_on_pair_step(nn::ParamGroup group) {
  using nn::ParamGroup;
  return group == ParamGroup::decoder_seg || group == ParamGroup::nddr_seg || group == ParamGroup::head_seg ||
         group == ParamGroup::sigma;
}

namespace {

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw Error(std::string("non-finite ") + what + " loss; aborting");
}

template <typename T>
StepGradients<T> run_step(const nn::Model<T>& model, const PatchBatch<T>& batch, StepKind kind, bool with_grad) {
  const bool ynet = model.arch() == nn::Arch::ynet;
  if (kind != StepKind::segmentation && !ynet) throw ArgumentError("pair and triplet steps need a Y-Net");
  if (kind == StepKind::segmentation && ynet) throw ArgumentError("segmentation-only steps need a U-Net");
  if (kind != StepKind::pair && batch.label.empty()) throw ArgumentError("step needs a label");
  if (kind != StepKind::segmentation && batch.auxiliary.empty()) throw ArgumentError("step needs an auxiliary image");

  nn::Graph<T> graph(with_grad);
  if (with_grad && kind == StepKind::pair) {
    for (const auto& p : model.parameters()) {
      if (frozen_on_pair_step(p.group)) graph.freeze(p);
    }
  }
  const int in = graph.input(batch.source);
  const nn::OutputNodes out = forward(graph, model, in);

  StepGradients<T> r;
  std::vector<std::pair<int, nn::Tensor<T>>> seeds;
  nn::Tensor<T> d_logits, d_trans;
  double w_seg = 1.0, w_trans = 1.0;
  loss::MtlGradient mtl;

  if (kind != StepKind::pair) {
    r.l_seg = loss::cross_entropy<T>(graph.value(out.logits), batch.label, with_grad ? &d_logits : nullptr);
    r.has_seg = true;
    check_finite(r.l_seg, "segmentation");
  }
  if (kind != StepKind::segmentation) {
    r.l_trans = loss::mse<T>(graph.value(out.translation), batch.auxiliary, with_grad ? &d_trans : nullptr);
    r.has_trans = true;
    check_finite(r.l_trans, "translation");
  }
  switch (kind) {
    case StepKind::segmentation: r.total = r.l_seg; break;
    case StepKind::pair: r.total = r.l_trans; break;
    case StepKind::triplet:
      mtl = loss::mtl_loss_grad(r.l_seg, r.l_trans, sigma_state(model));
      w_seg = mtl.w_seg;
      w_trans = mtl.w_trans;
      r.total = mtl.total;
      break;
  }
  check_finite(r.total, "total");
  if (!with_grad) return r;

  if (r.has_seg) {
    for (T& g : d_logits.data) g = static_cast<T>(g * w_seg);
    seeds.emplace_back(out.logits, std::move(d_logits));
  }
  if (r.has_trans) {
    for (T& g : d_trans.data) g = static_cast<T>(g * w_trans);
    seeds.emplace_back(out.translation, std::move(d_trans));
  }
  graph.backward(seeds);

  const auto& params = model.parameters();
  r.grads.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (graph.is_frozen(params[i])) continue;
    const auto g = graph.grad(params[i]);
    if (!g.empty()) r.grads[i].assign(g.begin(), g.end());
  }
  if (kind == StepKind::triplet && model.log_var_seg()) {
    r.grads[*model.log_var_seg()] = {static_cast<T>(mtl.d_s_seg)};
    r.grads[*model.log_var_trans()] = {static_cast<T>(mtl.d_s_trans)};
  }
  return r;
}

}  // namespace

template <typename T>
StepGradients<T> compute_gradients(const nn::Model<T>& model, const PatchBatch<T>& batch, StepKind kind) {
  return run_step(model, batch, kind, true);
}

template <typename T>
StepGradients<T> evaluate_loss(const nn::Model<T>& model, const PatchBatch<T>& batch, StepKind kind) {
  return run_step(model, batch, kind, false);
}

template loss::SigmaState sigma_state<float>(const nn::Model<float>&);
template loss::SigmaState sigma_state<double>(const nn::Model<double>&);
template StepGradients<float> compute_gradients<float>(const nn::Model<float>&, const PatchBatch<float>&, StepKind);
template StepGradients<double> compute_gradients<double>(const nn::Model<double>&, const PatchBatch<double>&,
                                                         StepKind);
template StepGradients<float> evaluate_loss<float>(const nn::Model<float>&, const PatchBatch<float>&, StepKind);
template StepGradients<double> evaluate_loss<double>(const nn::Model<double>&, const PatchBatch<double>&, StepKind);

}  // namespace auxseg::train
