#include "auxseg/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "auxseg/io_util.hpp"

namespace auxseg::cli {

namespace fs = std::filesystem;

namespace {

// Typed access to one TOML table that remembers which keys were read, so
// anything left over can be reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void get(const char* key, T& out) {
    const toml::node* n = find(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, bool>) {
      out = require<bool>(*n, key);
    } else if constexpr (std::is_integral_v<T>) {
      out = static_cast<T>(require<std::int64_t>(*n, key));
    } else if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(number(*n, key));
    } else if constexpr (std::is_same_v<T, std::string>) {
      out = require<std::string>(*n, key);
    }
  }

  std::optional<std::string> string(const char* key) {
    std::optional<std::string> s;
    if (find(key)) {
      std::string v;
      get(key, v);
      s = v;
    }
    return s;
  }

  std::optional<std::vector<double>> numbers(const char* key) {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) throw ArgumentError(fmt("must be an array", key));
    std::vector<double> out;
    for (const toml::node& e : *arr) out.push_back(number(e, key));
    return out;
  }

  std::optional<std::vector<std::string>> strings(const char* key) {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) throw ArgumentError(fmt("must be an array of strings", key));
    std::vector<std::string> out;
    for (const toml::node& e : *arr) out.push_back(require<std::string>(e, key));
    return out;
  }

  void extent(const char* key, Extent3& out) {
    if (auto v = numbers(key)) {
      if (v->size() != 3) throw ArgumentError(fmt("must have 3 entries", key));
      for (int a = 0; a < 3; ++a) out[a] = static_cast<int>((*v)[a]);
    }
  }

  void vec3(const char* key, std::array<double, 3>& out) {
    if (auto v = numbers(key)) {
      if (v->size() != 3) throw ArgumentError(fmt("must have 3 entries", key));
      for (int a = 0; a < 3; ++a) out[a] = (*v)[a];
    }
  }

  const toml::node* raw(const char* key) { return find(key); }

  void reject_unknown() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!seen_.count(std::string(k.str()))) {
        throw ArgumentError("unknown config key '" + name_ + "." + std::string(k.str()) + "'");
      }
    }
  }

 private:
  const toml::node* find(const char* key) {
    seen_.insert(key);
    return table_ ? table_->get(key) : nullptr;
  }

  std::string fmt(const char* what, const char* key) const { return "config key '" + name_ + "." + key + "' " + what; }

  template <typename T>
  T require(const toml::node& n, const char* key) const {
    if (auto v = n.value_exact<T>()) return *v;
    throw ArgumentError(fmt("has the wrong type", key));
  }

  double number(const toml::node& n, const char* key) const {
    if (auto v = n.value<double>()) return *v;
    throw ArgumentError(fmt("must be a number", key));
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config syntax error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ArgumentError(msg.str());
  }
  static const std::set<std::string> sections{"paths", "train", "patch", "augment", "net", "phantom", "gen", "frangi"};
  for (const auto& [k, v] : root) {
    if (!sections.count(std::string(k.str()))) throw ArgumentError("unknown config section '" + std::string(k.str()) + "'");
    if (!v.is_table()) throw ArgumentError("config entry '" + std::string(k.str()) + "' must be a table");
  }
  auto section = [&](const char* name) { return Section(root[name].as_table(), name); };

  RunConfig cfg;
  {
    Section s = section("paths");
    if (auto p = s.string("data")) cfg.data = resolve(base_dir, *p);
    if (auto p = s.string("output")) cfg.output = resolve(base_dir, *p);
    s.reject_unknown();
  }
  train::TrainConfig& t = cfg.train;
  {
    Section s = section("train");
    if (auto r = s.string("regime")) t.regime = train::parse_regime(*r);
    s.get("epochs", t.epochs);
    s.get("finetune_epochs", t.finetune_epochs);
    s.get("learning_rate", t.learning_rate);
    s.get("batch_size", t.batch_size);
    s.get("seed", t.seed);
    if (auto m = s.string("sigma_mode")) t.sigma_mode = nn::parse_sigma_mode(*m);
    if (auto v = s.numbers("fixed_sigmas")) {
      if (v->size() != 2) throw ArgumentError("config key 'train.fixed_sigmas' must have 2 entries");
      t.fixed_sigmas = std::make_pair((*v)[0], (*v)[1]);
    }
    if (auto p = s.string("sigma_checkpoint")) t.sigma_checkpoint = resolve(base_dir, *p);
    s.get("max_triplets", t.max_triplets);
    s.get("max_pairs", t.max_pairs);
    if (auto ids = s.strings("validation_ids")) t.validation_ids = *ids;
    s.get("keep_epoch_checkpoints", t.keep_epoch_checkpoints);
    if (auto p = s.string("resume_from")) t.resume_from = resolve(base_dir, *p);
    s.reject_unknown();
  }
  {
    Section s = section("patch");
    s.extent("size", t.patch.patch_size);
    s.extent("stride", t.patch.stride);
    s.reject_unknown();
  }
  {
    Section s = section("augment");
    s.vec3("p_flip", t.augment.p_flip);
    s.get("max_rotation_deg", t.augment.max_rotation_deg);
    s.get("elastic_probability", t.augment.elastic.probability);
    s.get("elastic_sigma", t.augment.elastic.displacement_sigma);
    s.get("elastic_grid_spacing", t.augment.elastic.grid_spacing);
    s.get("seed", t.augment.seed);
    s.reject_unknown();
  }
  {
    Section s = section("net");
    s.get("base_width", t.net.base_width);
    s.get("levels", t.net.levels);
    s.get("groupnorm_groups", t.net.groupnorm_groups);
    s.get("nddr", t.net.nddr_enabled);
    if (auto v = s.string("nddr_init")) t.net.nddr_init = nn::parse_nddr_init(*v);
    s.reject_unknown();
  }
  {
    Section s = section("phantom");
    synth::PhantomConfig& p = cfg.phantom;
    s.extent("shape", p.shape);
    s.vec3("spacing_mm", p.spacing_mm);
    s.get("n_trees", p.n_trees);
    s.get("root_radius_mm", p.root_radius_mm);
    s.get("branch_levels", p.branch_levels);
    s.get("radius_decay", p.radius_decay);
    s.get("radius_jitter", p.radius_jitter);
    s.get("native_contrast", p.vessel_contrast.native);
    s.get("contrast_enhanced", p.vessel_contrast.contrast_enhanced);
    s.get("noise_sigma", p.noise_sigma);
    s.get("bias_field_amplitude", p.bias_field_amplitude);
    s.get("background_intensity", p.background_intensity);
    s.get("liver_fraction", p.liver_fraction);
    s.get("seed", p.seed);
    s.reject_unknown();
  }
  {
    Section s = section("gen");
    s.get("n_triplets", cfg.gen.n_triplets);
    s.get("n_pairs", cfg.gen.n_pairs);
    s.get("n_test", cfg.gen.n_test);
    if (auto f = s.string("format")) {
      if (*f == "nifti") cfg.gen.format = VolumeFormat::nifti;
      else if (*f == "raw") cfg.gen.format = VolumeFormat::raw_json;
      else throw ArgumentError("config key 'gen.format' must be \"nifti\" or \"raw\"");
    }
    s.reject_unknown();
  }
  {
    Section s = section("frangi");
    if (auto v = s.numbers("scales_mm")) cfg.frangi.scales_mm = *v;
    s.get("alpha", cfg.frangi.alpha);
    s.get("beta", cfg.frangi.beta);
    if (const toml::node* c = s.raw("c")) {
      if (auto v = c->value<double>()) {
        cfg.frangi.c = *v;
      } else if (c->value_exact<std::string>() != std::optional<std::string>("auto")) {
        throw ArgumentError("config key 'frangi.c' must be a number or \"auto\"");
      }
    }
    s.get("bright_on_dark", cfg.frangi.bright_on_dark);
    s.reject_unknown();
  }

  t.validate();
  cfg.phantom.validate();
  cfg.frangi.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), fs::absolute(path).parent_path());
}

}  // namespace auxseg::cli
