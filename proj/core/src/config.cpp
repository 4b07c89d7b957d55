#include "sctd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace sctd {

void LabConfig::apply_seed() {
  theorem1.seed = run.seed;
  derivations.seed = run.seed;
  gcs_flaw.seed = run.seed;
}

LabConfig default_lab_config() {
  LabConfig cfg;
  for (LossKind kind : {LossKind::kSctd, LossKind::kSds, LossKind::kCds, LossKind::kGcs}) {
    LossConfig loss = cfg.run.loss;
    loss.kind = kind;
    cfg.compare.emplace_back(std::string(to_string(kind)), loss);
  }
  cfg.apply_seed();
  return cfg;
}

namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

template <typename T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  if constexpr (std::is_integral_v<T>) return "an integer";
  if constexpr (std::is_floating_point_v<T>) return "a number";
  return "a string";
}

// A YAML mapping read with key-path diagnostics; unread keys are reported by finish().
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_, "expected a mapping");
  }

  // Lookups go through a const node: yaml-cpp's mutable operator[] inserts missing keys.
  bool has(std::string_view key) const {
    if (!node_ || !node_.IsMap()) return false;
    const YAML::Node n = std::as_const(node_)[std::string(key)];
    return n.IsDefined() && !n.IsNull();
  }

  YAML::Node raw(std::string_view key) {
    seen_.insert(std::string(key));
    return has(key) ? std::as_const(node_)[std::string(key)] : YAML::Node(YAML::NodeType::Undefined);
  }

  void skip(std::string_view key) { seen_.insert(std::string(key)); }

  template <typename T>
  void read(std::string_view key, T& out) {
    const YAML::Node n = raw(key);
    if (!n) return;
    out = convert<T>(n, join(path_, key));
  }

  template <typename T>
  static T convert(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) throw ConfigError(path, std::string("expected ") + type_name<T>());
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path, std::string("expected ") + type_name<T>() + ", got '" +
                                  n.Scalar() + "'");
    }
  }

  Section child(std::string_view key) { return Section(raw(key), join(path_, key)); }

  const std::string& path() const { return path_; }
  std::string at(std::string_view key) const { return join(path_, key); }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(join(path_, key), "unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec read_vector(const YAML::Node& n, const std::string& path) {
  if (!n.IsSequence()) throw ConfigError(path, "expected a list of numbers");
  Vec out(static_cast<Eigen::Index>(n.size()));
  for (std::size_t i = 0; i < n.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] =
        Section::convert<double>(n[i], path + "." + std::to_string(i));
  }
  return out;
}

template <typename T>
std::vector<T> read_list(const YAML::Node& n, const std::string& path) {
  if (!n.IsSequence()) throw ConfigError(path, "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(Section::convert<T>(n[i], path + "." + std::to_string(i)));
  }
  return out;
}

template <typename F>
auto parse_enum(Section& s, std::string_view key, F parse) -> std::optional<decltype(parse(""))> {
  std::string name;
  if (!s.has(key)) {
    s.skip(key);
    return std::nullopt;
  }
  s.read(key, name);
  try {
    return parse(name);
  } catch (const PreconditionError& e) {
    throw ConfigError(s.at(key), e.what());
  }
}

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

void read_loss(Section s, LossConfig& loss) {
  if (auto v = parse_enum(s, "kind", parse_loss_kind)) loss.kind = *v;
  s.read("guidance_scale", loss.guidance_scale);
  require(std::isfinite(loss.guidance_scale) && loss.guidance_scale >= 0.0,
          s.at("guidance_scale"), "must be finite and >= 0");
  if (auto v = parse_enum(s, "weighting", parse_weighting)) loss.weighting = *v;
  s.read("use_approximation", loss.use_approximation);
  s.read("sds_omit_jacobian", loss.sds_omit_jacobian);
  s.read("forward_threshold", loss.forward_threshold);
  require(std::isfinite(loss.forward_threshold), s.at("forward_threshold"), "must be finite");
  Section w = s.child("gcs_weights");
  w.read("cc", loss.gcs_weights.cc);
  w.read("cg", loss.gcs_weights.cg);
  w.read("cp", loss.gcs_weights.cp);
  require(loss.gcs_weights.cc >= 0.0, w.at("cc"), "must be >= 0");
  require(loss.gcs_weights.cg >= 0.0, w.at("cg"), "must be >= 0");
  require(loss.gcs_weights.cp >= 0.0, w.at("cp"), "must be >= 0");
  w.finish();
  s.finish();
}

MixturePrior read_prior(Section s, const MixturePrior& fallback) {
  std::vector<MixtureComponent> components = fallback.components();
  MixturePrior::ConditionMap conditions = fallback.conditions();
  if (const YAML::Node list = s.raw("components")) {
    const std::string path = s.at("components");
    if (!list.IsSequence() || list.size() == 0) throw ConfigError(path, "expected a non-empty list");
    components.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section c(list[i], path + "." + std::to_string(i));
      MixtureComponent comp;
      const YAML::Node mean = c.raw("mean");
      if (!mean) throw ConfigError(c.at("mean"), "required");
      comp.mean = read_vector(mean, c.at("mean"));
      c.read("scale", comp.scale);
      c.read("weight", comp.weight);
      require(comp.scale >= 0.0, c.at("scale"), "must be >= 0");
      require(comp.weight > 0.0, c.at("weight"), "must be > 0");
      c.finish();
      components.push_back(std::move(comp));
    }
  }
  if (const YAML::Node map = s.raw("conditions")) {
    const std::string path = s.at("conditions");
    if (!map.IsMap()) throw ConfigError(path, "expected a mapping of label to component indices");
    conditions.clear();
    for (const auto& kv : map) {
      const std::string label = kv.first.as<std::string>();
      conditions[label] = read_list<std::size_t>(kv.second, join(path, label));
    }
  }
  s.finish();
  try {
    return MixturePrior(std::move(components), std::move(conditions));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.path(), e.what());
  }
}

void read_run(Section& root, RunConfig& run) {
  root.read("seed", run.seed);
  root.read("prompt", run.prompt);

  {
    Section s = root.child("schedule");
    s.read("t_min", run.schedule.t_min);
    s.read("t_max", run.schedule.t_max);
    s.read("horizon", run.schedule.horizon);
    if (auto v = parse_enum(s, "kind", parse_schedule_kind)) run.schedule.kind = *v;
    if (auto v = parse_enum(s, "noise_coeff_form", parse_noise_coeff_form)) {
      run.schedule.coeff_form = *v;
    }
    s.finish();
    try {
      (void)run.schedule.build();
    } catch (const std::exception& e) {
      throw ConfigError(s.path(), e.what());
    }
  }

  run.prior = read_prior(root.child("prior"), run.prior);
  try {
    (void)run.prior.active(run.condition());
  } catch (const std::exception& e) {
    throw ConfigError("prompt", e.what());
  }

  {
    Section s = root.child("segmentation");
    if (auto v = parse_enum(s, "strategy", parse_segmentation_strategy)) {
      run.segmentation.strategy = *v;
    }
    s.read("count", run.segmentation.count);
    s.read("t_tau", run.segmentation.t_tau);
    s.finish();
    try {
      (void)run.segmentation.build(run.schedule.horizon);
    } catch (const std::exception& e) {
      throw ConfigError(s.path(), e.what());
    }
  }

  read_loss(root.child("loss"), run.loss);

  {
    Section s = root.child("scene");
    s.read("points", run.scene.points);
    s.read("dimension", run.scene.dimension);
    s.read("views", run.scene.views);
    s.read("transform_prior", run.scene.transform_prior);
    s.read("init_spread", run.scene.init_spread);
    require(run.scene.points >= 1, s.at("points"), "must be >= 1");
    require(run.scene.views >= 1, s.at("views"), "must be >= 1");
    require(run.scene.dimension == run.prior.dimension(), s.at("dimension"),
            "must match the prior dimension");
    require(run.scene.init_spread >= 0.0, s.at("init_spread"), "must be >= 0");
    if (const YAML::Node c = s.raw("init_center")) {
      run.scene.init_center = read_vector(c, s.at("init_center"));
      require(run.scene.init_center->size() == run.scene.dimension, s.at("init_center"),
              "wrong dimension");
    }
    if (const YAML::Node pts = s.raw("initial_points")) {
      if (!pts.IsSequence()) throw ConfigError(s.at("initial_points"), "expected a list of points");
      run.scene.initial_points.clear();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::string path = s.at("initial_points") + "." + std::to_string(i);
        run.scene.initial_points.push_back(read_vector(pts[i], path));
        require(run.scene.initial_points.back().size() == run.scene.dimension, path,
                "wrong dimension");
      }
      require(run.scene.initial_points.empty() ||
                  static_cast<int>(run.scene.initial_points.size()) == run.scene.points,
              s.at("initial_points"), "must list exactly scene.points entries");
    }
    s.finish();
  }

  {
    Section s = root.child("sampler");
    s.read("t_low", run.sampler.t_low);
    s.read("t_high_base", run.sampler.t_high_base);
    s.read("t_warm_init", run.sampler.t_warm_init);
    s.read("warm_iters", run.sampler.warm_iters);
    s.read("unit_scale", run.sampler.unit_scale);
    s.finish();
    try {
      run.sampler.validate();
    } catch (const std::exception& e) {
      throw ConfigError(s.path(), e.what());
    }
  }

  {
    Section s = root.child("optimizer");
    s.read("iterations", run.optimizer.iterations);
    s.read("learning_rate", run.optimizer.adam.learning_rate);
    s.read("beta1", run.optimizer.adam.beta1);
    s.read("beta2", run.optimizer.adam.beta2);
    s.read("epsilon", run.optimizer.adam.epsilon);
    require(run.optimizer.iterations >= 1, s.at("iterations"), "must be >= 1");
    require(run.optimizer.adam.learning_rate > 0.0, s.at("learning_rate"), "must be > 0");
    s.finish();
    try {
      run.optimizer.adam.validate();
    } catch (const std::exception& e) {
      throw ConfigError(s.path(), e.what());
    }
  }

  try {
    run.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError("", e.what());
  }
}

void read_experiments(Section& root, LabConfig& cfg) {
  if (const YAML::Node list = root.raw("compare")) {
    const std::string path = "compare";
    if (!list.IsSequence()) throw ConfigError(path, "expected a list of loss variants");
    cfg.compare.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section entry(list[i], path + "." + std::to_string(i));
      std::string label;
      entry.read("label", label);
      LossConfig loss = cfg.run.loss;
      read_loss(entry.child("loss"), loss);
      if (label.empty()) label = std::string(to_string(loss.kind));
      entry.finish();
      cfg.compare.emplace_back(label, loss);
    }
  } else {
    // Default variants follow the resolved base loss.
    for (auto& [label, loss] : cfg.compare) {
      const LossKind kind = loss.kind;
      loss = cfg.run.loss;
      loss.kind = kind;
    }
  }

  {
    Section s = root.child("theorem1");
    if (const YAML::Node n = s.raw("segment_counts")) {
      cfg.theorem1.segment_counts = read_list<int>(n, s.at("segment_counts"));
    }
    if (const YAML::Node n = s.raw("step_sizes")) {
      cfg.theorem1.step_sizes = read_list<double>(n, s.at("step_sizes"));
    }
    s.read("trajectories", cfg.theorem1.trajectories);
    s.read("time_samples", cfg.theorem1.time_samples);
    s.read("reference_steps", cfg.theorem1.reference_steps);
    require(!cfg.theorem1.segment_counts.empty(), s.at("segment_counts"), "must be non-empty");
    require(!cfg.theorem1.step_sizes.empty(), s.at("step_sizes"), "must be non-empty");
    for (int n : cfg.theorem1.segment_counts) require(n >= 1, s.at("segment_counts"), "entries must be >= 1");
    for (double dt : cfg.theorem1.step_sizes) require(dt > 0.0, s.at("step_sizes"), "entries must be > 0");
    require(cfg.theorem1.trajectories >= 1, s.at("trajectories"), "must be >= 1");
    require(cfg.theorem1.time_samples >= 1, s.at("time_samples"), "must be >= 1");
    require(cfg.theorem1.reference_steps >= 1, s.at("reference_steps"), "must be >= 1");
    s.finish();
  }
  {
    Section s = root.child("solver_order");
    s.read("t", cfg.solver_order.t);
    s.read("s", cfg.solver_order.s);
    if (const YAML::Node n = s.raw("z")) cfg.solver_order.z = read_vector(n, s.at("z"));
    if (const YAML::Node n = s.raw("phi_steps")) {
      cfg.solver_order.phi_steps = read_list<int>(n, s.at("phi_steps"));
    }
    if (const YAML::Node n = s.raw("reference_steps")) {
      cfg.solver_order.reference_steps = read_list<int>(n, s.at("reference_steps"));
    }
    s.read("truth_steps", cfg.solver_order.truth_steps);
    require(cfg.solver_order.z.size() == 0 || cfg.solver_order.z.size() == cfg.run.prior.dimension(),
            s.at("z"), "wrong dimension");
    require(cfg.solver_order.phi_steps.size() >= 2, s.at("phi_steps"), "needs two or more entries");
    require(cfg.solver_order.reference_steps.size() >= 2, s.at("reference_steps"),
            "needs two or more entries");
    s.finish();
  }
  {
    Section s = root.child("derivations");
    s.read("draws", cfg.derivations.draws);
    s.read("tolerance", cfg.derivations.tolerance);
    s.read("max_guidance", cfg.derivations.max_guidance);
    require(cfg.derivations.draws >= 1, s.at("draws"), "must be >= 1");
    s.finish();
  }
  {
    Section s = root.child("gcs_flaw");
    if (const YAML::Node n = s.raw("t_values")) cfg.gcs_flaw.t_values = read_list<double>(n, s.at("t_values"));
    if (const YAML::Node n = s.raw("e_values")) cfg.gcs_flaw.e_values = read_list<double>(n, s.at("e_values"));
    if (const YAML::Node n = s.raw("e_prime_values")) {
      cfg.gcs_flaw.e_prime_values = read_list<double>(n, s.at("e_prime_values"));
    }
    s.read("n_grid", cfg.gcs_flaw.n_grid);
    require(cfg.gcs_flaw.n_grid >= 3, s.at("n_grid"), "must be >= 3");
    s.finish();
  }
}

// `defaults` is the fully resolved default config; a path missing from the document is
// seeded from it so overrides can index into default lists.
void apply_override(YAML::Node& root, const YAML::Node& defaults, const std::string& key_path,
                    const std::string& text) {
  std::vector<std::string> keys;
  std::stringstream ss(key_path);
  for (std::string k; std::getline(ss, k, '.');) {
    if (k.empty()) throw ConfigError(key_path, "malformed override key");
    keys.push_back(k);
  }
  if (keys.empty() || key_path.back() == '.') throw ConfigError(key_path, "malformed override key");

  YAML::Node value;
  try {
    value = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(key_path, std::string("unparseable override value: ") + e.what());
  }

  YAML::Node node = root;
  YAML::Node fallback = defaults;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const bool last = i + 1 == keys.size();
    if (node.IsSequence()) {
      std::size_t index = 0;
      try {
        std::size_t used = 0;
        index = std::stoul(keys[i], &used);
        if (used != keys[i].size()) throw std::invalid_argument(keys[i]);
      } catch (const std::exception&) {
        throw ConfigError(key_path, "expected a list index at '" + keys[i] + "'");
      }
      if (index >= node.size()) throw ConfigError(key_path, "list index out of range");
      if (last) {
        node[index] = value;
        return;
      }
      YAML::Node fb = fallback.IsSequence() && index < fallback.size()
                          ? std::as_const(fallback)[index]
                          : YAML::Node(YAML::NodeType::Undefined);
      YAML::Node next = node[index];
      node.reset(next);
      fallback.reset(fb);
      continue;
    }
    if (!node.IsMap()) {
      throw ConfigError(key_path, "cannot descend into a scalar at '" + keys[i] + "'");
    }
    if (last) {
      node[keys[i]] = value;
      return;
    }
    YAML::Node fb = fallback.IsMap() ? std::as_const(fallback)[keys[i]]
                                     : YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node existing = std::as_const(node)[keys[i]];
    if (!existing.IsDefined() || existing.IsNull()) {
      node[keys[i]] = fb.IsDefined() ? YAML::Clone(fb) : YAML::Node(YAML::NodeType::Map);
    }
    YAML::Node next = node[keys[i]];
    node.reset(next);
    fallback.reset(fb);
  }
}

}  // namespace

LabConfig parse_config(std::string_view text, const std::vector<Override>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!overrides.empty()) {
    const YAML::Node defaults = YAML::Load(config_to_json(default_lab_config()));
    for (const auto& [key, value] : overrides) apply_override(root, defaults, key, value);
  }

  Section top(root, "");
  int version = kSchemaVersion;
  top.read("schema_version", version);
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version));
  }
  top.skip("manifest");

  LabConfig cfg = default_lab_config();
  read_run(top, cfg.run);
  read_experiments(top, cfg);
  top.finish();
  cfg.apply_seed();
  return cfg;
}

LabConfig load_config(const std::string& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), overrides);
}

namespace {

using nlohmann::ordered_json;

ordered_json vec_json(const Vec& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ordered_json loss_json(const LossConfig& loss) {
  ordered_json j;
  j["kind"] = std::string(to_string(loss.kind));
  j["guidance_scale"] = loss.guidance_scale;
  j["weighting"] = std::string(to_string(loss.weighting));
  j["use_approximation"] = loss.use_approximation;
  j["sds_omit_jacobian"] = loss.sds_omit_jacobian;
  j["forward_threshold"] = loss.forward_threshold;
  j["gcs_weights"] = {{"cc", loss.gcs_weights.cc},
                      {"cg", loss.gcs_weights.cg},
                      {"cp", loss.gcs_weights.cp}};
  return j;
}

}  // namespace

std::string config_to_json(const LabConfig& config, const std::string& extra) {
  const RunConfig& run = config.run;
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = run.seed;
  j["prompt"] = run.prompt;
  j["schedule"] = {{"t_min", run.schedule.t_min},
                   {"t_max", run.schedule.t_max},
                   {"horizon", run.schedule.horizon},
                   {"kind", std::string(to_string(run.schedule.kind))},
                   {"noise_coeff_form", std::string(to_string(run.schedule.coeff_form))}};

  ordered_json components = ordered_json::array();
  for (const MixtureComponent& c : run.prior.components()) {
    components.push_back({{"mean", vec_json(c.mean)}, {"scale", c.scale}, {"weight", c.weight}});
  }
  ordered_json conditions = ordered_json::object();
  for (const auto& [label, indices] : run.prior.conditions()) conditions[label] = indices;
  j["prior"] = {{"components", components}, {"conditions", conditions}};

  j["segmentation"] = {{"strategy", std::string(to_string(run.segmentation.strategy))},
                       {"count", run.segmentation.count},
                       {"t_tau", run.segmentation.t_tau}};
  j["loss"] = loss_json(run.loss);

  ordered_json scene;
  scene["points"] = run.scene.points;
  scene["dimension"] = run.scene.dimension;
  scene["views"] = run.scene.views;
  scene["transform_prior"] = run.scene.transform_prior;
  scene["init_spread"] = run.scene.init_spread;
  scene["init_center"] = run.scene.init_center ? vec_json(*run.scene.init_center) : ordered_json();
  ordered_json points = ordered_json::array();
  for (const Vec& p : run.scene.initial_points) points.push_back(vec_json(p));
  scene["initial_points"] = points;
  j["scene"] = scene;

  j["sampler"] = {{"t_low", run.sampler.t_low},
                  {"t_high_base", run.sampler.t_high_base},
                  {"t_warm_init", run.sampler.t_warm_init},
                  {"warm_iters", run.sampler.warm_iters},
                  {"unit_scale", run.sampler.unit_scale}};
  j["optimizer"] = {{"iterations", run.optimizer.iterations},
                    {"learning_rate", run.optimizer.adam.learning_rate},
                    {"beta1", run.optimizer.adam.beta1},
                    {"beta2", run.optimizer.adam.beta2},
                    {"epsilon", run.optimizer.adam.epsilon}};

  ordered_json compare = ordered_json::array();
  for (const auto& [label, loss] : config.compare) {
    compare.push_back({{"label", label}, {"loss", loss_json(loss)}});
  }
  j["compare"] = compare;

  j["theorem1"] = {{"segment_counts", config.theorem1.segment_counts},
                   {"step_sizes", config.theorem1.step_sizes},
                   {"trajectories", config.theorem1.trajectories},
                   {"time_samples", config.theorem1.time_samples},
                   {"reference_steps", config.theorem1.reference_steps}};
  j["solver_order"] = {{"t", config.solver_order.t},
                       {"s", config.solver_order.s},
                       {"z", config.solver_order.z.size() ? vec_json(config.solver_order.z)
                                                          : ordered_json()},
                       {"phi_steps", config.solver_order.phi_steps},
                       {"reference_steps", config.solver_order.reference_steps},
                       {"truth_steps", config.solver_order.truth_steps}};
  j["derivations"] = {{"draws", config.derivations.draws},
                      {"tolerance", config.derivations.tolerance},
                      {"max_guidance", config.derivations.max_guidance}};
  j["gcs_flaw"] = {{"t_values", config.gcs_flaw.t_values},
                   {"e_values", config.gcs_flaw.e_values},
                   {"e_prime_values", config.gcs_flaw.e_prime_values},
                   {"n_grid", config.gcs_flaw.n_grid}};
  if (!extra.empty()) j["manifest"] = ordered_json::parse(extra);
  return j.dump(2) + "\n";
}

}  // namespace sctd
