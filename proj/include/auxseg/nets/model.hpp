#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "auxseg/nets/graph.hpp"

namespace auxseg::nn {

enum class Arch { unet, ynet };
enum class SigmaMode { learned, fixed };

/// NDDR weight initialisation:
///  - identity:        own-task channels 1, other-task channels 0, bias 0
///  - scaled_identity: own-task 0.9, other-task 0.1, bias 0
///  - random:          He-normal like any 1x1x1 convolution
enum class NddrInit { identity, scaled_identity, random };

std::string_view to_string(Arch arch);
std::string_view to_string(SigmaMode mode);
std::string_view to_string(NddrInit init);
Arch parse_arch(std::string_view text);
SigmaMode parse_sigma_mode(std::string_view text);
NddrInit parse_nddr_init(std::string_view text);

struct NetConfig {
  int in_channels = 1;
  int seg_classes = 2;
  int base_width = 32;
  int levels = 3;
  int groupnorm_groups = 8;
  bool nddr_enabled = true;
  NddrInit nddr_init = NddrInit::scaled_identity;
  std::uint64_t init_seed = 0;

  /// Feature width at resolution level l (base_width * 2^l).
  int width(int level) const { return base_width << level; }

  /// Throws ArgumentError for levels < 1, non-positive widths, or a width
  /// not divisible by the group count.
  void validate() const;
};

/// Indices into Model::parameters for one double-convolution block.
struct ConvBlock {
  std::size_t conv1_w, conv1_b, norm1_w, norm1_b;
  std::size_t conv2_w, conv2_b, norm2_w, norm2_b;
};

/// Indices for an NDDR fusion unit: 1x1x1 conv, ReLU, GroupNorm.
struct NddrUnit {
  std::size_t conv_w, conv_b, norm_w, norm_b;
};

/// 3D U-Net or Y-Net with named parameters.
///
/// Encoder: `levels` blocks each followed by 2x2x2 max pooling, then a
/// bottleneck block. Decoders: nearest-neighbour upsampling, concatenation
/// with the encoder skip at that level, one block. A Y-Net has two decoders
/// fused after every decoder block by a pair of NDDR units, a 2-class
/// segmentation head and a linear 1-channel translation head.
template <typename T>
class Model {
 public:
  Model() = default;

  const NetConfig& config() const { return config_; }
  Arch arch() const { return arch_; }
  SigmaMode sigma_mode() const { return sigma_mode_; }

  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }

  Parameter<T>& parameter(std::string_view name);
  const Parameter<T>& parameter(std::string_view name) const;
  bool has_parameter(std::string_view name) const;

  const Parameter<T>& at(std::size_t index) const { return params_[index]; }

  /// sigma_S and sigma_T. Learned mode derives them from the log-variance
  /// parameters; fixed mode returns the stored constants.
  double sigma_seg() const;
  double sigma_trans() const;
  void set_fixed_sigmas(double sigma_seg, double sigma_trans);

  /// Switches between learned and fixed sigma. Learned -> fixed keeps the
  /// current values as constants; fixed -> learned seeds the parameters
  /// from the constants.
  Model with_sigma_mode(SigmaMode mode) const;

  /// Parameter-wise conversion to another scalar type.
  template <typename U>
  Model<U> cast() const;

  const std::vector<ConvBlock>& encoder() const { return encoder_; }
  const std::vector<ConvBlock>& decoder_seg() const { return decoder_seg_; }
  const std::vector<ConvBlock>& decoder_trans() const { return decoder_trans_; }
  const std::vector<NddrUnit>& nddr_seg() const { return nddr_seg_; }
  const std::vector<NddrUnit>& nddr_trans() const { return nddr_trans_; }
  std::size_t head_seg_w() const { return head_seg_w_; }
  std::size_t head_seg_b() const { return head_seg_b_; }
  std::optional<std::size_t> head_trans_w() const { return head_trans_w_; }
  std::optional<std::size_t> head_trans_b() const { return head_trans_b_; }
  std::optional<std::size_t> log_var_seg() const { return log_var_seg_; }
  std::optional<std::size_t> log_var_trans() const { return log_var_trans_; }

 private:
  template <typename U>
  friend class Model;
  template <typename U>
  friend class ModelBuilder;

  NetConfig config_;
  Arch arch_ = Arch::unet;
  SigmaMode sigma_mode_ = SigmaMode::fixed;
  double fixed_sigma_seg_ = 1.0;
  double fixed_sigma_trans_ = 1.0;
  std::vector<Parameter<T>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;

  std::vector<ConvBlock> encoder_;
  std::vector<ConvBlock> decoder_seg_;
  std::vector<ConvBlock> decoder_trans_;
  std::vector<NddrUnit> nddr_seg_;
  std::vector<NddrUnit> nddr_trans_;
  std::size_t head_seg_w_ = 0, head_seg_b_ = 0;
  std::optional<std::size_t> head_trans_w_, head_trans_b_;
  std::optional<std::size_t> log_var_seg_, log_var_trans_;
};

template <typename T>
Model<T> build_model(const NetConfig& cfg, Arch arch, SigmaMode sigma_mode);

/// Single-task U-Net (segmentation head only, no sigma parameters).
template <typename T>
Model<T> build_unet(const NetConfig& cfg) {
  return build_model<T>(cfg, Arch::unet, SigmaMode::fixed);
}

/// Y-Net; learned sigma mode registers two extra scalar parameters.
template <typename T>
Model<T> build_ynet(const NetConfig& cfg, SigmaMode sigma_mode = SigmaMode::learned) {
  return build_model<T>(cfg, Arch::ynet, sigma_mode);
}

/// Graph node ids of the network outputs.
struct OutputNodes {
  int logits = -1;
  int translation = -1;  // -1 for U-Net
};

/// Records a forward pass of `input` (in_channels x X x Y x Z) into `graph`.
/// Throws ArgumentError("... not divisible by 2^levels") for incompatible extents.
template <typename T>
OutputNodes forward(Graph<T>& graph, const Model<T>& model, int input);

/// Evaluated outputs of a forward pass.
template <typename T>
struct Outputs {
  Tensor<T> logits;
  std::optional<Tensor<T>> translation;
};

/// Inference-mode forward pass (no gradient bookkeeping).
template <typename T>
Outputs<T> predict(const Model<T>& model, const Tensor<T>& input);

/// Checks that an extent is usable as network input.
void check_input_extent(const NetConfig& cfg, const Extent3& extent);

/// Learnable scalar counts.
struct ParameterBreakdown {
  std::size_t encoder = 0;
  std::size_t decoder_seg = 0;
  std::size_t decoder_trans = 0;
  std::size_t nddr = 0;
  std::size_t heads = 0;
  std::size_t sigmas = 0;

  std::size_t total() const { return encoder + decoder_seg + decoder_trans + nddr + heads + sigmas; }
};

template <typename T>
std::size_t count_parameters(const Model<T>& model);

template <typename T>
ParameterBreakdown decompose_parameters(const Model<T>& model);

}  // namespace auxseg::nn
