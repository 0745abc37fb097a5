#include "auxseg/nets/graph.hpp"

#include <memory>

namespace auxseg::nn {

const char* to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::decoder_seg: return "decoder_seg";
    case ParamGroup::decoder_trans: return "decoder_trans";
    case ParamGroup::nddr_seg: return "nddr_seg";
    case ParamGroup::nddr_trans: return "nddr_trans";
    case ParamGroup::head_seg: return "head_seg";
    case ParamGroup::head_trans: return "head_trans";
    case ParamGroup::sigma: return "sigma";
  }
  return "unknown";
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::push(Tensor<T> value, bool requires_grad,
                                         std::function<void(Graph&, NodeId)> backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = grad_enabled_ && requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor<T>(n.value.channels, n.value.extent);
  return n.grad;
}

template <typename T>
std::span<T> Graph<T>::param_grad_buffer(const Parameter<T>& p) {
  auto& buf = param_grads_[&p];
  if (buf.empty()) buf.assign(p.size(), T(0));
  return buf;
}

template <typename T>
std::span<const T> Graph<T>::grad(const Parameter<T>& p) const {
  const auto it = param_grads_.find(&p);
  if (it == param_grads_.end()) return {};
  return it->second;
}

template <typename T>
void Graph<T>::release(NodeId id) {
  if (grad_enabled_) return;
  nodes_[id].value = Tensor<T>();
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::input(Tensor<T> value) {
  return push(std::move(value), false, nullptr);
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::conv(NodeId x, const Parameter<T>& weight, const Parameter<T>& bias) {
  if (weight.shape.size() != 5) throw ArgumentError("conv weight '" + weight.name + "' must be 5-D");
  const int out_channels = weight.shape[0];
  const int kernel = weight.shape[2];
  if (weight.shape[1] != nodes_[x].value.channels) {
    throw ArgumentError("conv '" + weight.name + "' expects " + std::to_string(weight.shape[1]) +
                        " input channels, got " + std::to_string(nodes_[x].value.channels));
  }
  Tensor<T> out = conv3d<T>(nodes_[x].value, weight.value, bias.value, out_channels, kernel);
  const bool needs = nodes_[x].requires_grad || param_requires_grad(weight) || param_requires_grad(bias);
  const Parameter<T>* w = &weight;
  const Parameter<T>* b = &bias;
  return push(std::move(out), needs, [x, w, b, kernel](Graph& g, NodeId self) {
    const Tensor<T>& dy = g.nodes_[self].grad;
    Tensor<T>* dx = g.nodes_[x].requires_grad ? &g.grad_buffer(x) : nullptr;
    std::span<T> dw = g.param_requires_grad(*w) ? g.param_grad_buffer(*w) : std::span<T>{};
    std::span<T> db = g.param_requires_grad(*b) ? g.param_grad_buffer(*b) : std::span<T>{};
    conv3d_backward<T>(g.nodes_[x].value, w->value, kernel, dy, dx, dw, db);
  });
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::relu(NodeId x) {
  Tensor<T> out = nn::relu<T>(nodes_[x].value);
  return push(std::move(out), nodes_[x].requires_grad, [x](Graph& g, NodeId self) {
    relu_backward<T>(g.nodes_[self].value, g.nodes_[self].grad, g.grad_buffer(x));
  });
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::group_norm(NodeId x, const Parameter<T>& gamma, const Parameter<T>& beta,
                                               int groups) {
  auto stats = std::make_shared<GroupNormStats<T>>();
  Tensor<T> out = nn::group_norm<T>(nodes_[x].value, gamma.value, beta.value, groups, *stats);
  const bool needs = nodes_[x].requires_grad || param_requires_grad(gamma) || param_requires_grad(beta);
  const Parameter<T>* gm = &gamma;
  const Parameter<T>* bt = &beta;
  return push(std::move(out), needs, [x, gm, bt, groups, stats](Graph& g, NodeId self) {
    Tensor<T>* dx = g.nodes_[x].requires_grad ? &g.grad_buffer(x) : nullptr;
    std::span<T> dgamma = g.param_requires_grad(*gm) ? g.param_grad_buffer(*gm) : std::span<T>{};
    std::span<T> dbeta = g.param_requires_grad(*bt) ? g.param_grad_buffer(*bt) : std::span<T>{};
    group_norm_backward<T>(g.nodes_[x].value, gm->value, groups, *stats, g.nodes_[self].grad, dx, dgamma, dbeta);
  });
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::max_pool(NodeId x) {
  auto argmax = std::make_shared<std::vector<std::uint8_t>>();
  Tensor<T> out = max_pool2<T>(nodes_[x].value, *argmax);
  return push(std::move(out), nodes_[x].requires_grad, [x, argmax](Graph& g, NodeId self) {
    max_pool2_backward<T>(g.nodes_[self].grad, *argmax, g.grad_buffer(x));
  });
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::upsample(NodeId x) {
  Tensor<T> out = upsample2<T>(nodes_[x].value);
  return push(std::move(out), nodes_[x].requires_grad, [x](Graph& g, NodeId self) {
    upsample2_backward<T>(g.nodes_[self].grad, g.grad_buffer(x));
  });
}

template <typename T>
typename Graph<T>::NodeId Graph<T>::concat(NodeId a, NodeId b) {
  Tensor<T> out = concat_channels<T>(nodes_[a].value, nodes_[b].value);
  const bool needs = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(out), needs, [a, b](Graph& g, NodeId self) {
    const Tensor<T>& dy = g.nodes_[self].grad;
    const std::size_t split = g.nodes_[a].value.size();
    if (g.nodes_[a].requires_grad) {
      Tensor<T>& da = g.grad_buffer(a);
      for (std::size_t i = 0; i < split; ++i) da.data[i] += dy.data[i];
    }
    if (g.nodes_[b].requires_grad) {
      Tensor<T>& db = g.grad_buffer(b);
      for (std::size_t i = 0; i < db.size(); ++i) db.data[i] += dy.data[split + i];
    }
  });
}

template <typename T>
void Graph<T>::backward(const std::vector<std::pair<NodeId, Tensor<T>>>& seeds) {
  if (!grad_enabled_) throw Error("backward called on a graph recorded without gradients");
  NodeId last = -1;
  for (const auto& [id, seed] : seeds) {
    if (!nodes_[id].value.same_shape(seed)) throw ArgumentError("backward seed shape mismatch");
    if (!nodes_[id].requires_grad) continue;
    Tensor<T>& g = grad_buffer(id);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += seed.data[i];
    last = std::max(last, id);
  }
  for (NodeId id = last; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, id);
    n.grad = Tensor<T>();
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace auxseg::nn
