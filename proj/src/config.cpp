#include "vsop3d/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "vsop3d/io/metrics_io.hpp"

namespace vsop3d {

namespace {

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

}  // namespace

ConfigValidationError::ConfigValidationError(std::vector<std::string> problems)
    : ConfigError("invalid configuration: " + join(problems, "; ")), problems_(std::move(problems)) {}

std::string to_string(WindowUnit unit) { return unit == WindowUnit::kEpisodes ? "episodes" : "evaluations"; }

TrainOptions RunConfig::train_options(const std::string& env, std::uint64_t seed) const {
  TrainOptions o;
  o.env_name = env;
  o.seed = seed;
  o.num_train_levels = num_train_levels;
  o.total_steps = total_steps;
  o.num_envs = num_envs;
  o.eval_interval = eval_interval;
  o.eval_episodes = eval_episodes;
  o.eval_envs = eval_envs;
  o.eval_dropout = eval_dropout;
  o.observation = observation;
  o.base_channels = base_channels;
  o.hidden_units = hidden_units;
  return o;
}

namespace {

// Reads typed fields from a YAML mapping, recording problems instead of
// throwing so that a single pass reports everything wrong.
class FieldReader {
 public:
  FieldReader(const YAML::Node& node, std::string prefix, std::vector<std::string>& problems)
      : node_(node), prefix_(std::move(prefix)), problems_(problems) {}

  bool present(const std::string& key) const { return node_[key].IsDefined(); }
  bool is_null(const std::string& key) const { return node_[key].IsDefined() && node_[key].IsNull(); }

  template <typename T>
  void read(const std::string& key, T& out, bool required = false) {
    seen_.insert(key);
    const YAML::Node v = node_[key];
    if (!v.IsDefined() || v.IsNull()) {
      if (required) problems_.push_back("missing required field '" + prefix_ + key + "'");
      return;
    }
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      problems_.push_back("field '" + prefix_ + key + "' has the wrong type");
    }
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    const YAML::Node v = node_[key];
    if (!v.IsDefined()) return;
    if (v.IsNull()) {
      out.reset();
      return;
    }
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      problems_.push_back("field '" + prefix_ + key + "' has the wrong type");
    }
  }

  void mark(const std::string& key) { seen_.insert(key); }

  void reject_unknown() {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) problems_.push_back("unknown field '" + prefix_ + key + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

void apply_override(YAML::Node& root, const std::string& dotted, const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream in(dotted);
  for (std::string p; std::getline(in, p, '.');) parts.push_back(p);
  if (parts.empty()) throw ConfigValidationError({"empty override key"});
  YAML::Node node = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node[parts[i]].IsDefined() || !node[parts[i]].IsMap()) node[parts[i]] = YAML::Node(YAML::NodeType::Map);
    YAML::Node child = node[parts[i]];
    node.reset(child);
  }
  try {
    node[parts.back()] = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigValidationError({"override '" + dotted + "' has an unparsable value: " + e.what()});
  }
}

void read_hyperparams(const YAML::Node& node, AgentHyperparams& hp, std::vector<std::string>& problems) {
  if (!node.IsDefined() || node.IsNull()) return;
  if (!node.IsMap()) {
    problems.push_back("field 'hyperparams' must be a mapping");
    return;
  }
  FieldReader r(node, "hyperparams.", problems);
  std::string algo = to_string(hp.algo), kind = to_string(hp.conv_kind);
  r.read("algo", algo);
  r.read("conv_kind", kind);
  try {
    hp.algo = parse_algo(algo);
  } catch (const ConfigError& e) {
    problems.push_back(e.what());
  }
  try {
    hp.conv_kind = parse_conv_kind(kind);
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  r.read("frames", hp.frames);
  r.read("width_multiplier", hp.width_multiplier);
  r.read("learning_rate", hp.learning_rate);
  r.read("batch_size", hp.batch_size);
  r.read("num_minibatches", hp.num_minibatches);
  r.read("epochs_per_update", hp.epochs_per_update);
  r.read("gamma", hp.gamma);
  r.read("gae_lambda", hp.gae_lambda);
  r.read_optional("normalize_advantages", hp.normalize_advantages);
  r.read_optional("clip_value_loss", hp.clip_value_loss);
  r.read_optional("clip_coeff", hp.clip_coeff);
  r.read("entropy_coeff", hp.entropy_coeff);
  r.read("value_loss_coeff", hp.value_loss_coeff);
  r.read("max_grad_norm", hp.max_grad_norm);
  r.read_optional("dropout_rate", hp.dropout_rate);
  r.reject_unknown();
}

}  // namespace

RunConfig parse_run_config(const std::string& yaml_text, const std::map<std::string, std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigValidationError({std::string("config is not valid YAML: ") + e.what()});
  }
  if (root.IsNull() || !root.IsDefined()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigValidationError({"config must be a mapping of fields"});
  for (const auto& [key, value] : overrides) apply_override(root, key, value);

  std::vector<std::string> problems;
  RunConfig cfg;
  FieldReader r(root, "", problems);
  r.read("preset", cfg.preset, true);
  bool preset_ok = false;
  if (!cfg.preset.empty()) {
    try {
      cfg.hyperparams = preset(cfg.preset);
      preset_ok = true;
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  }
  r.mark("hyperparams");
  if (preset_ok) read_hyperparams(root["hyperparams"], cfg.hyperparams, problems);
  r.read("envs", cfg.envs, true);
  r.read("num_train_levels", cfg.num_train_levels);
  r.read("total_steps", cfg.total_steps, true);
  r.read("num_envs", cfg.num_envs);
  r.read("eval_interval", cfg.eval_interval);
  r.read("eval_episodes", cfg.eval_episodes);
  r.read("eval_envs", cfg.eval_envs);
  r.read("eval_dropout", cfg.eval_dropout);
  r.read("final_window", cfg.final_window);
  std::string unit = "episodes";
  r.read("window_unit", unit);
  r.read("seeds", cfg.seeds, true);
  r.read("output_dir", cfg.output_dir);
  r.read("checkpoint_interval", cfg.checkpoint_interval);
  r.read("workers", cfg.workers);
  r.mark("observation");
  if (const YAML::Node obs = root["observation"]; obs.IsDefined() && !obs.IsNull()) {
    FieldReader o(obs, "observation.", problems);
    o.read("height", cfg.observation.obs_height);
    o.read("width", cfg.observation.obs_width);
    o.reject_unknown();
  }
  r.mark("network");
  if (const YAML::Node net = root["network"]; net.IsDefined() && !net.IsNull()) {
    FieldReader n(net, "network.", problems);
    std::vector<std::int64_t> base(cfg.base_channels.begin(), cfg.base_channels.end());
    n.read("base_channels", base);
    if (base.size() == 3) {
      std::copy(base.begin(), base.end(), cfg.base_channels.begin());
    } else {
      problems.push_back("field 'network.base_channels' must list three stage widths");
    }
    n.read("hidden_units", cfg.hidden_units);
    n.reject_unknown();
  }
  r.reject_unknown();

  // Semantic checks.
  if (unit == "episodes") {
    cfg.window_unit = WindowUnit::kEpisodes;
  } else if (unit == "evaluations") {
    cfg.window_unit = WindowUnit::kEvaluations;
  } else {
    problems.push_back("field 'window_unit' must be 'episodes' or 'evaluations'");
  }
  if (root["seeds"].IsDefined() && cfg.seeds.empty()) problems.push_back("field 'seeds' must not be empty");
  if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
    problems.push_back("field 'seeds' contains duplicates");
  }
  if (root["total_steps"].IsDefined() && cfg.total_steps <= 0) problems.push_back("field 'total_steps' must be > 0");
  if (root["envs"].IsDefined() && cfg.envs.empty()) problems.push_back("field 'envs' must not be empty");
  const auto known = env_names();
  for (const auto& e : cfg.envs) {
    if (std::find(known.begin(), known.end(), e) == known.end()) {
      problems.push_back("unknown environment '" + e + "' (known: " + join(known, ", ") + ")");
    }
  }
  if (std::set<std::string>(cfg.envs.begin(), cfg.envs.end()).size() != cfg.envs.size()) {
    problems.push_back("field 'envs' contains duplicates");
  }
  if (cfg.num_train_levels == 0) problems.push_back("field 'num_train_levels' must be > 0");
  if (cfg.num_envs < 1) problems.push_back("field 'num_envs' must be >= 1");
  if (cfg.eval_interval < 1) problems.push_back("field 'eval_interval' must be >= 1");
  if (cfg.eval_episodes < 1) problems.push_back("field 'eval_episodes' must be >= 1");
  if (cfg.eval_envs < 1) problems.push_back("field 'eval_envs' must be >= 1");
  if (cfg.final_window < 1) problems.push_back("field 'final_window' must be >= 1");
  if (cfg.checkpoint_interval < 0) problems.push_back("field 'checkpoint_interval' must be >= 0");
  if (cfg.workers < 1) problems.push_back("field 'workers' must be >= 1");
  if (preset_ok) {
    try {
      cfg.hyperparams.validate();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
    if (cfg.num_envs >= 1 && cfg.hyperparams.batch_size % cfg.num_envs != 0) {
      problems.push_back("hyperparams.batch_size " + std::to_string(cfg.hyperparams.batch_size) +
                         " is not divisible by num_envs " + std::to_string(cfg.num_envs));
    }
    BackboneConfig net;
    net.frames = cfg.hyperparams.frames;
    net.conv_kind = cfg.hyperparams.conv_kind;
    net.width_multiplier = cfg.hyperparams.width_multiplier;
    net.obs_height = cfg.observation.obs_height;
    net.obs_width = cfg.observation.obs_width;
    net.base_channels = cfg.base_channels;
    net.hidden_units = cfg.hidden_units;
    try {
      net.validate();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
    if (cfg.observation.obs_height % 8 != 0 || cfg.observation.obs_width % 8 != 0) {
      problems.push_back("observation height and width must be multiples of the 8-cell game grid");
    }
  }
  if (!problems.empty()) throw ConfigValidationError(problems);

  if (cfg.output_dir.empty()) {
    const char* root_dir = std::getenv(kOutputRootVariable);
    cfg.output_dir = std::string(root_dir != nullptr && *root_dir ? root_dir : "runs") + "/" + cfg.preset;
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigValidationError({e.what()});
  }
  return parse_run_config(text, overrides);
}

nlohmann::ordered_json to_json(const AgentHyperparams& hp) {
  auto opt = [](const auto& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["name"] = hp.name;
  j["algo"] = to_string(hp.algo);
  j["frames"] = hp.frames;
  j["width_multiplier"] = hp.width_multiplier;
  j["conv_kind"] = to_string(hp.conv_kind);
  j["learning_rate"] = hp.learning_rate;
  j["batch_size"] = hp.batch_size;
  j["num_minibatches"] = hp.num_minibatches;
  j["minibatch_size"] = hp.minibatch_size();
  j["epochs_per_update"] = hp.epochs_per_update;
  j["gamma"] = hp.gamma;
  j["gae_lambda"] = hp.gae_lambda;
  j["normalize_advantages"] = opt(hp.normalize_advantages);
  j["clip_value_loss"] = opt(hp.clip_value_loss);
  j["clip_coeff"] = opt(hp.clip_coeff);
  j["entropy_coeff"] = hp.entropy_coeff;
  j["value_loss_coeff"] = hp.value_loss_coeff;
  j["max_grad_norm"] = hp.max_grad_norm;
  j["dropout_rate"] = opt(hp.dropout_rate);
  return j;
}

AgentHyperparams hyperparams_from_json(const nlohmann::ordered_json& j) {
  AgentHyperparams hp;
  hp.name = j.at("name").get<std::string>();
  hp.algo = parse_algo(j.at("algo").get<std::string>());
  hp.frames = j.at("frames").get<std::int64_t>();
  hp.width_multiplier = j.at("width_multiplier").get<std::int64_t>();
  hp.conv_kind = parse_conv_kind(j.at("conv_kind").get<std::string>());
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.batch_size = j.at("batch_size").get<std::int64_t>();
  hp.num_minibatches = j.at("num_minibatches").get<std::int64_t>();
  hp.epochs_per_update = j.at("epochs_per_update").get<std::int64_t>();
  hp.gamma = j.at("gamma").get<double>();
  hp.gae_lambda = j.at("gae_lambda").get<double>();
  if (!j.at("normalize_advantages").is_null()) hp.normalize_advantages = j.at("normalize_advantages").get<bool>();
  if (!j.at("clip_value_loss").is_null()) hp.clip_value_loss = j.at("clip_value_loss").get<bool>();
  if (!j.at("clip_coeff").is_null()) hp.clip_coeff = j.at("clip_coeff").get<double>();
  hp.entropy_coeff = j.at("entropy_coeff").get<double>();
  hp.value_loss_coeff = j.at("value_loss_coeff").get<double>();
  hp.max_grad_norm = j.at("max_grad_norm").get<double>();
  if (!j.at("dropout_rate").is_null()) hp.dropout_rate = j.at("dropout_rate").get<double>();
  return hp;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["preset"] = c.preset;
  j["hyperparams"] = to_json(c.hyperparams);
  j["envs"] = c.envs;
  j["num_train_levels"] = c.num_train_levels;
  j["total_steps"] = c.total_steps;
  j["num_envs"] = c.num_envs;
  j["eval_interval"] = c.eval_interval;
  j["eval_episodes"] = c.eval_episodes;
  j["eval_envs"] = c.eval_envs;
  j["eval_dropout"] = c.eval_dropout;
  j["final_window"] = c.final_window;
  j["window_unit"] = to_string(c.window_unit);
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["observation"] = {{"height", c.observation.obs_height}, {"width", c.observation.obs_width}};
  j["network"] = {{"base_channels", c.base_channels}, {"hidden_units", c.hidden_units}};
  j["workers"] = c.workers;
  return j;
}

RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
  RunConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.hyperparams = hyperparams_from_json(j.at("hyperparams"));
  c.envs = j.at("envs").get<std::vector<std::string>>();
  c.num_train_levels = j.at("num_train_levels").get<std::uint64_t>();
  c.total_steps = j.at("total_steps").get<std::int64_t>();
  c.num_envs = j.at("num_envs").get<std::int64_t>();
  c.eval_interval = j.at("eval_interval").get<std::int64_t>();
  c.eval_episodes = j.at("eval_episodes").get<std::int64_t>();
  c.eval_envs = j.at("eval_envs").get<std::int64_t>();
  c.eval_dropout = j.at("eval_dropout").get<bool>();
  c.final_window = j.at("final_window").get<std::int64_t>();
  c.window_unit = j.at("window_unit").get<std::string>() == "evaluations" ? WindowUnit::kEvaluations
                                                                           : WindowUnit::kEpisodes;
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.output_dir = j.value("output_dir", std::string());
  c.checkpoint_interval = j.at("checkpoint_interval").get<std::int64_t>();
  c.observation.obs_height = j.at("observation").at("height").get<std::int64_t>();
  c.observation.obs_width = j.at("observation").at("width").get<std::int64_t>();
  c.base_channels = j.at("network").at("base_channels").get<std::array<std::int64_t, 3>>();
  c.hidden_units = j.at("network").at("hidden_units").get<std::int64_t>();
  c.workers = j.value("workers", std::int64_t{1});
  return c;
}

std::string config_hash(const RunConfig& config) {
  auto j = to_json(config);
  j.erase("output_dir");
  j.erase("workers");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace vsop3d
