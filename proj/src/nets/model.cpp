#include "auxseg/nets/model.hpp"

#include <cmath>

#include "auxseg/random.hpp"

namespace auxseg::nn {

std::string_view to_string(Arch arch) { return arch == Arch::unet ? "unet" : "ynet"; }
std::string_view to_string(SigmaMode mode) { return mode == SigmaMode::learned ? "learned" : "fixed"; }
std::string_view to_string(NddrInit init) {
  switch (init) {
    case NddrInit::identity: return "identity";
    case NddrInit::scaled_identity: return "scaled_identity";
    case NddrInit::random: return "random";
  }
  return "scaled_identity";
}

Arch parse_arch(std::string_view text) {
  if (text == "unet") return Arch::unet;
  if (text == "ynet") return Arch::ynet;
  throw ArgumentError("unknown architecture '" + std::string(text) + "'");
}

SigmaMode parse_sigma_mode(std::string_view text) {
  if (text == "learned") return SigmaMode::learned;
  if (text == "fixed") return SigmaMode::fixed;
  throw ArgumentError("unknown sigma mode '" + std::string(text) + "'");
}

NddrInit parse_nddr_init(std::string_view text) {
  if (text == "identity" || text == "identity_passthrough") return NddrInit::identity;
  if (text == "scaled_identity") return NddrInit::scaled_identity;
  if (text == "random") return NddrInit::random;
  throw ArgumentError("unknown NDDR init '" + std::string(text) + "'");
}

void NetConfig::validate() const {
  if (levels < 1) throw ArgumentError("net levels must be >= 1, got " + std::to_string(levels));
  if (levels > 8) throw ArgumentError("net levels must be <= 8");
  if (in_channels < 1) throw ArgumentError("in_channels must be >= 1");
  if (seg_classes < 2) throw ArgumentError("seg_classes must be >= 2");
  if (base_width < 1) throw ArgumentError("base_width must be >= 1");
  if (groupnorm_groups < 1 || base_width % groupnorm_groups != 0) {
    throw ArgumentError("base_width " + std::to_string(base_width) + " is not divisible by " +
                        std::to_string(groupnorm_groups) + " group-norm groups");
  }
}

void check_input_extent(const NetConfig& cfg, const Extent3& extent) {
  const int factor = 1 << cfg.levels;
  for (int a = 0; a < 3; ++a) {
    if (extent[a] < factor || extent[a] % factor != 0) {
      throw ArgumentError("input extent " + to_string(extent) + " is not divisible by " + std::to_string(factor) +
                          " (2^levels)");
    }
  }
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

template <typename T>
class ModelBuilder {
 public:
  ModelBuilder(Model<T>& m) : m_(m) {}

  std::size_t add(const std::string& name, std::vector<int> shape, ParamGroup group) {
    Parameter<T> p;
    p.name = name;
    p.shape = std::move(shape);
    p.group = group;
    std::size_t n = 1;
    for (int d : p.shape) n *= static_cast<std::size_t>(d);
    p.value.assign(n, T(0));
    const std::size_t index = m_.params_.size();
    if (!m_.index_.emplace(name, index).second) throw Error("duplicate parameter name '" + name + "'");
    m_.params_.push_back(std::move(p));
    return index;
  }

  void fill_normal(std::size_t index, double stddev) {
    Parameter<T>& p = m_.params_[index];
    Rng rng = make_rng({m_.config_.init_seed, fnv1a(p.name)});
    std::normal_distribution<double> normal(0.0, stddev);
    for (T& v : p.value) v = static_cast<T>(normal(rng));
  }

  void fill_constant(std::size_t index, double value) {
    for (T& v : m_.params_[index].value) v = static_cast<T>(value);
  }

  std::size_t conv(const std::string& prefix, int in, int out, int kernel, ParamGroup group, double gain) {
    const std::size_t w = add(prefix + ".weight", {out, in, kernel, kernel, kernel}, group);
    fill_normal(w, std::sqrt(gain / (static_cast<double>(in) * kernel * kernel * kernel)));
    return w;
  }

  ConvBlock block(const std::string& prefix, int in, int out, ParamGroup group) {
    ConvBlock b{};
    b.conv1_w = conv(prefix + ".conv1", in, out, 3, group, 2.0);
    b.conv1_b = add(prefix + ".conv1.bias", {out}, group);
    b.norm1_w = add(prefix + ".norm1.weight", {out}, group);
    fill_constant(b.norm1_w, 1.0);
    b.norm1_b = add(prefix + ".norm1.bias", {out}, group);
    b.conv2_w = conv(prefix + ".conv2", out, out, 3, group, 2.0);
    b.conv2_b = add(prefix + ".conv2.bias", {out}, group);
    b.norm2_w = add(prefix + ".norm2.weight", {out}, group);
    fill_constant(b.norm2_w, 1.0);
    b.norm2_b = add(prefix + ".norm2.bias", {out}, group);
    return b;
  }

  // Input channel order of every NDDR unit is [segmentation, translation].
  NddrUnit nddr(const std::string& prefix, int width, ParamGroup group, bool seg_side) {
    NddrUnit u{};
    u.conv_w = add(prefix + ".conv.weight", {width, 2 * width, 1, 1, 1}, group);
    const NddrInit init = m_.config_.nddr_init;
    if (init == NddrInit::random) {
      fill_normal(u.conv_w, std::sqrt(2.0 / (2.0 * width)));
    } else {
      const double own = init == NddrInit::identity ? 1.0 : 0.9;
      const double other = init == NddrInit::identity ? 0.0 : 0.1;
      auto& w = m_.params_[u.conv_w].value;
      for (int c = 0; c < width; ++c) {
        const int seg_col = c, trans_col = width + c;
        w[static_cast<std::size_t>(c) * 2 * width + seg_col] = static_cast<T>(seg_side ? own : other);
        w[static_cast<std::size_t>(c) * 2 * width + trans_col] = static_cast<T>(seg_side ? other : own);
      }
    }
    u.conv_b = add(prefix + ".conv.bias", {width}, group);
    u.norm_w = add(prefix + ".norm.weight", {width}, group);
    fill_constant(u.norm_w, 1.0);
    u.norm_b = add(prefix + ".norm.bias", {width}, group);
    return u;
  }

  void build(const NetConfig& cfg, Arch arch, SigmaMode sigma_mode) {
    cfg.validate();
    m_.config_ = cfg;
    m_.arch_ = arch;
    m_.sigma_mode_ = arch == Arch::unet ? SigmaMode::fixed : sigma_mode;
    const int levels = cfg.levels;

    int in = cfg.in_channels;
    for (int l = 0; l <= levels; ++l) {
      m_.encoder_.push_back(block("encoder." + std::to_string(l), in, cfg.width(l), ParamGroup::encoder));
      in = cfg.width(l);
    }
    auto decoder = [&](const std::string& name, ParamGroup group, std::vector<ConvBlock>& out) {
      out.resize(levels);
      for (int l = levels - 1; l >= 0; --l) {
        out[l] = block(name + "." + std::to_string(l), cfg.width(l + 1) + cfg.width(l), cfg.width(l), group);
      }
    };
    decoder("decoder_seg", ParamGroup::decoder_seg, m_.decoder_seg_);
    if (arch == Arch::ynet) {
      decoder("decoder_trans", ParamGroup::decoder_trans, m_.decoder_trans_);
      if (cfg.nddr_enabled) {
        m_.nddr_seg_.resize(levels);
        m_.nddr_trans_.resize(levels);
        for (int l = levels - 1; l >= 0; --l) {
          m_.nddr_seg_[l] = nddr("nddr_seg." + std::to_string(l), cfg.width(l), ParamGroup::nddr_seg, true);
          m_.nddr_trans_[l] = nddr("nddr_trans." + std::to_string(l), cfg.width(l), ParamGroup::nddr_trans, false);
        }
      }
    }
    m_.head_seg_w_ = conv("head_seg", cfg.width(0), cfg.seg_classes, 1, ParamGroup::head_seg, 1.0);
    m_.head_seg_b_ = add("head_seg.bias", {cfg.seg_classes}, ParamGroup::head_seg);
    if (arch == Arch::ynet) {
      m_.head_trans_w_ = conv("head_trans", cfg.width(0), 1, 1, ParamGroup::head_trans, 1.0);
      m_.head_trans_b_ = add("head_trans.bias", {1}, ParamGroup::head_trans);
      if (m_.sigma_mode_ == SigmaMode::learned) {
        m_.log_var_seg_ = add("sigma.log_var_seg", {1}, ParamGroup::sigma);
        m_.log_var_trans_ = add("sigma.log_var_trans", {1}, ParamGroup::sigma);
      }
    }
  }

 private:
  Model<T>& m_;
};

template <typename T>
Model<T> build_model(const NetConfig& cfg, Arch arch, SigmaMode sigma_mode) {
  Model<T> m;
  ModelBuilder<T>(m).build(cfg, arch, sigma_mode);
  return m;
}

template <typename T>
Parameter<T>& Model<T>::parameter(std::string_view name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("model has no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

template <typename T>
const Parameter<T>& Model<T>::parameter(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("model has no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

template <typename T>
bool Model<T>::has_parameter(std::string_view name) const {
  return index_.find(name) != index_.end();
}

template <typename T>
double Model<T>::sigma_seg() const {
  if (log_var_seg_) return std::exp(0.5 * static_cast<double>(params_[*log_var_seg_].value[0]));
  return fixed_sigma_seg_;
}

template <typename T>
double Model<T>::sigma_trans() const {
  if (log_var_trans_) return std::exp(0.5 * static_cast<double>(params_[*log_var_trans_].value[0]));
  return fixed_sigma_trans_;
}

template <typename T>
void Model<T>::set_fixed_sigmas(double sigma_seg, double sigma_trans) {
  if (!(sigma_seg > 0.0) || !(sigma_trans > 0.0)) throw ArgumentError("fixed sigmas must be > 0");
  fixed_sigma_seg_ = sigma_seg;
  fixed_sigma_trans_ = sigma_trans;
}

template <typename T>
Model<T> Model<T>::with_sigma_mode(SigmaMode mode) const {
  if (arch_ == Arch::unet || mode == sigma_mode_) return *this;
  const double s_seg = sigma_seg(), s_trans = sigma_trans();
  Model<T> out = build_model<T>(config_, arch_, mode);
  for (const auto& p : params_) {
    if (p.group != ParamGroup::sigma) out.parameter(p.name).value = p.value;
  }
  if (mode == SigmaMode::fixed) {
    out.set_fixed_sigmas(s_seg, s_trans);
  } else {
    out.params_[*out.log_var_seg_].value[0] = static_cast<T>(2.0 * std::log(s_seg));
    out.params_[*out.log_var_trans_].value[0] = static_cast<T>(2.0 * std::log(s_trans));
  }
  return out;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out;
  out.config_ = config_;
  out.arch_ = arch_;
  out.sigma_mode_ = sigma_mode_;
  out.fixed_sigma_seg_ = fixed_sigma_seg_;
  out.fixed_sigma_trans_ = fixed_sigma_trans_;
  out.index_ = index_;
  out.encoder_ = encoder_;
  out.decoder_seg_ = decoder_seg_;
  out.decoder_trans_ = decoder_trans_;
  out.nddr_seg_ = nddr_seg_;
  out.nddr_trans_ = nddr_trans_;
  out.head_seg_w_ = head_seg_w_;
  out.head_seg_b_ = head_seg_b_;
  out.head_trans_w_ = head_trans_w_;
  out.head_trans_b_ = head_trans_b_;
  out.log_var_seg_ = log_var_seg_;
  out.log_var_trans_ = log_var_trans_;
  out.params_.reserve(params_.size());
  for (const auto& p : params_) {
    Parameter<U> q;
    q.name = p.name;
    q.shape = p.shape;
    q.group = p.group;
    q.value.assign(p.value.begin(), p.value.end());
    out.params_.push_back(std::move(q));
  }
  return out;
}

namespace {

template <typename T>
int run_block(Graph<T>& g, const Model<T>& m, const ConvBlock& b, int x) {
  const int groups = m.config().groupnorm_groups;
  const int c1 = g.conv(x, m.at(b.conv1_w), m.at(b.conv1_b));
  const int r1 = g.relu(c1);
  g.release(c1);
  const int n1 = g.group_norm(r1, m.at(b.norm1_w), m.at(b.norm1_b), groups);
  g.release(r1);
  const int c2 = g.conv(n1, m.at(b.conv2_w), m.at(b.conv2_b));
  g.release(n1);
  const int r2 = g.relu(c2);
  g.release(c2);
  const int n2 = g.group_norm(r2, m.at(b.norm2_w), m.at(b.norm2_b), groups);
  g.release(r2);
  return n2;
}

template <typename T>
int run_nddr(Graph<T>& g, const Model<T>& m, const NddrUnit& u, int x) {
  const int c = g.conv(x, m.at(u.conv_w), m.at(u.conv_b));
  const int r = g.relu(c);
  g.release(c);
  const int n = g.group_norm(r, m.at(u.norm_w), m.at(u.norm_b), m.config().groupnorm_groups);
  g.release(r);
  return n;
}

template <typename T>
int up_and_merge(Graph<T>& g, int coarse, int skip) {
  const int up = g.upsample(coarse);
  const int cat = g.concat(up, skip);
  g.release(up);
  return cat;
}

}  // namespace

template <typename T>
OutputNodes forward(Graph<T>& g, const Model<T>& m, int input) {
  const NetConfig& cfg = m.config();
  const auto& x = g.value(input);
  if (x.channels != cfg.in_channels) {
    throw ArgumentError("network expects " + std::to_string(cfg.in_channels) + " input channels, got " +
                        std::to_string(x.channels));
  }
  check_input_extent(cfg, x.extent);
  const int levels = cfg.levels;
  const bool ynet = m.arch() == Arch::ynet;

  std::vector<int> skips(levels);
  int h = input;
  for (int l = 0; l < levels; ++l) {
    const int e = run_block(g, m, m.encoder()[l], h);
    if (h != input) g.release(h);
    skips[l] = e;
    h = g.max_pool(e);
  }
  const int bottom = run_block(g, m, m.encoder()[levels], h);
  g.release(h);

  int s = bottom, t = bottom;
  for (int l = levels - 1; l >= 0; --l) {
    const int s_prev = s, t_prev = t;
    const int s_in = up_and_merge(g, s, skips[l]);
    const int s_out = run_block(g, m, m.decoder_seg()[l], s_in);
    g.release(s_in);
    if (ynet) {
      const int t_in = up_and_merge(g, t, skips[l]);
      const int t_out = run_block(g, m, m.decoder_trans()[l], t_in);
      g.release(t_in);
      if (cfg.nddr_enabled) {
        const int cat = g.concat(s_out, t_out);
        g.release(s_out);
        g.release(t_out);
        s = run_nddr(g, m, m.nddr_seg()[l], cat);
        t = run_nddr(g, m, m.nddr_trans()[l], cat);
        g.release(cat);
      } else {
        s = s_out;
        t = t_out;
      }
    } else {
      s = s_out;
    }
    g.release(skips[l]);
    g.release(s_prev);
    g.release(t_prev);
  }

  OutputNodes out;
  out.logits = g.conv(s, m.at(m.head_seg_w()), m.at(m.head_seg_b()));
  if (ynet) out.translation = g.conv(t, m.at(*m.head_trans_w()), m.at(*m.head_trans_b()));
  return out;
}

template <typename T>
Outputs<T> predict(const Model<T>& model, const Tensor<T>& input) {
  Graph<T> g(false);
  const int in = g.input(input);
  const OutputNodes nodes = forward(g, model, in);
  Outputs<T> out;
  out.logits = g.value(nodes.logits);
  if (nodes.translation >= 0) out.translation = g.value(nodes.translation);
  return out;
}

template <typename T>
std::size_t count_parameters(const Model<T>& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters()) n += p.size();
  return n;
}

template <typename T>
ParameterBreakdown decompose_parameters(const Model<T>& model) {
  ParameterBreakdown b;
  for (const auto& p : model.parameters()) {
    switch (p.group) {
      case ParamGroup::encoder: b.encoder += p.size(); break;
      case ParamGroup::decoder_seg: b.decoder_seg += p.size(); break;
      case ParamGroup::decoder_trans: b.decoder_trans += p.size(); break;
      case ParamGroup::nddr_seg:
      case ParamGroup::nddr_trans: b.nddr += p.size(); break;
      case ParamGroup::head_seg:
      case ParamGroup::head_trans: b.heads += p.size(); break;
      case ParamGroup::sigma: b.sigmas += p.size(); break;
    }
  }
  return b;
}

#define AUXSEG_INSTANTIATE_MODEL(T)                                                  \
  template class Model<T>;                                                           \
  template Model<T> build_model<T>(const NetConfig&, Arch, SigmaMode);               \
  template OutputNodes forward<T>(Graph<T>&, const Model<T>&, int);                  \
  template Outputs<T> predict<T>(const Model<T>&, const Tensor<T>&);                 \
  template std::size_t count_parameters<T>(const Model<T>&);                         \
  template ParameterBreakdown decompose_parameters<T>(const Model<T>&);

AUXSEG_INSTANTIATE_MODEL(float)
AUXSEG_INSTANTIATE_MODEL(double)

#undef AUXSEG_INSTANTIATE_MODEL

template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace auxseg::nn
