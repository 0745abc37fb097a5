#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "auxseg/nets/ops.hpp"

namespace auxseg::nn {

/// Which part of the network a parameter belongs to.
enum class ParamGroup { encoder, decoder_seg, decoder_trans, nddr_seg, nddr_trans, head_seg, head_trans, sigma };

const char* to_string(ParamGroup group);

/// Named learnable array.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  ParamGroup group = ParamGroup::encoder;

  std::size_t size() const { return value.size(); }
};

/// Records a forward computation and replays it backwards.
///
/// Nodes are appended in execution order, so reverse order is a valid
/// topological order for backpropagation. Parameter gradients are kept
/// inside the graph; the model is only read. Frozen parameters get no
/// gradient, but gradients still flow through the ops that use them.
template <typename T>
class Graph {
 public:
  using NodeId = int;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  NodeId input(Tensor<T> value);
  NodeId conv(NodeId x, const Parameter<T>& weight, const Parameter<T>& bias);
  NodeId relu(NodeId x);
  NodeId group_norm(NodeId x, const Parameter<T>& gamma, const Parameter<T>& beta, int groups);
  NodeId max_pool(NodeId x);
  NodeId upsample(NodeId x);
  NodeId concat(NodeId a, NodeId b);

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id).value; }

  /// Drops a node's value (inference mode only, once it has no consumers left).
  void release(NodeId id);

  void freeze(const Parameter<T>& p) { frozen_.insert(&p); }
  bool is_frozen(const Parameter<T>& p) const { return frozen_.count(&p) != 0; }

  /// Backpropagates the given output gradients through the recorded ops.
  void backward(const std::vector<std::pair<NodeId, Tensor<T>>>& seeds);

  /// Accumulated gradient of a parameter; empty when it received none.
  std::span<const T> grad(const Parameter<T>& p) const;

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void(Graph&, NodeId)> backward;
  };

  NodeId push(Tensor<T> value, bool requires_grad, std::function<void(Graph&, NodeId)> backward);
  bool param_requires_grad(const Parameter<T>& p) const { return grad_enabled_ && !is_frozen(p); }
  Tensor<T>& grad_buffer(NodeId id);
  std::span<T> param_grad_buffer(const Parameter<T>& p);

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_set<const Parameter<T>*> frozen_;
  std::unordered_map<const Parameter<T>*, std::vector<T>> param_grads_;
};

}  // namespace auxseg::nn
