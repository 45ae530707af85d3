#include "evogan/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace evogan {

std::string to_string(Variant v) {
  switch (v) {
  case Variant::baseline_infogan:
    return "baseline_infogan";
  case Variant::infogan_ga_woc:
    return "infogan_ga_woc";
  case Variant::infogan_ga_wc:
    return "infogan_ga_wc";
  }
  return "unknown";
}

Variant parse_variant(const std::string &name) {
  for (auto v : {Variant::baseline_infogan, Variant::infogan_ga_woc, Variant::infogan_ga_wc}) {
    if (name == to_string(v)) {
      return v;
    }
  }
  throw ConfigError("unknown variant '" + name +
                    "' (expected baseline_infogan, infogan_ga_woc or infogan_ga_wc)");
}

GAConfig TrainingConfig::ga_config() const {
  GAConfig g = ga;
  g.crossover_enabled = variant == Variant::infogan_ga_wc;
  return g;
}

void TrainingConfig::validate() const {
  if (epochs < 1) {
    throw ConfigError("epochs must be >= 1");
  }
  if (batch_size < 2) {
    throw ConfigError("batch_size must be >= 2");
  }
  if (checkpoint_interval < 1 || fid_interval < 1) {
    throw ConfigError("checkpoint_interval and fid_interval must be >= 1");
  }
  if (fid_samples < 2) {
    throw ConfigError("fid_samples must be >= 2");
  }
  if (lambda_categorical < 0.0 || lambda_continuous < 0.0) {
    throw ConfigError("lambda values must be non-negative");
  }
  for (const auto *opt : {&g_optimizer, &d_optimizer}) {
    if (!(opt->learning_rate > 0.0) || !(opt->beta1 > 0.0 && opt->beta1 < 1.0) ||
        !(opt->beta2 > 0.0 && opt->beta2 < 1.0)) {
      throw ConfigError("optimizer rates must be positive and betas in (0, 1)");
    }
  }
  if (embedder != "toy_conv" && embedder != "inception_v3") {
    throw ConfigError("embedder must be toy_conv or inception_v3, got '" + embedder + "'");
  }
  if (convergence_window < 1 || !(convergence_tolerance > 0.0)) {
    throw ConfigError("convergence window and tolerance must be positive");
  }
  try {
    ga_config().validate();
    network.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
}

namespace {

std::string trim(const std::string &s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return {};
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string &key, const std::string &text) {
  const std::string s = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

double parse_double(const std::string &key, const std::string &text) {
  const std::string s = trim(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception &) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  if (used != s.size()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct KeyDef {
  std::string name;
  std::function<void(TrainingConfig &, const std::string &, const std::string &)> set;
  std::function<std::string(const TrainingConfig &)> get;
};

template <typename Member>
KeyDef int_key(std::string name, Member member) {
  return {name,
          [member](TrainingConfig &c, const std::string &key, const std::string &v) {
            std::invoke(member, c) = parse_number<int>(key, v);
          },
          [member](const TrainingConfig &c) { return std::to_string(std::invoke(member, c)); }};
}

template <typename Member>
KeyDef u64_key(std::string name, Member member) {
  return {name,
          [member](TrainingConfig &c, const std::string &key, const std::string &v) {
            std::invoke(member, c) = parse_number<std::uint64_t>(key, v);
          },
          [member](const TrainingConfig &c) { return std::to_string(std::invoke(member, c)); }};
}

template <typename Member>
KeyDef double_key(std::string name, Member member) {
  return {name,
          [member](TrainingConfig &c, const std::string &key, const std::string &v) {
            std::invoke(member, c) = parse_double(key, v);
          },
          [member](const TrainingConfig &c) { return format_double(std::invoke(member, c)); }};
}

template <typename Member>
KeyDef string_key(std::string name, Member member) {
  return {name,
          [member](TrainingConfig &c, const std::string &, const std::string &v) {
            std::invoke(member, c) = trim(v);
          },
          [member](const TrainingConfig &c) { return std::invoke(member, c); }};
}

const std::vector<KeyDef> &key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    t.push_back({"variant",
                 [](TrainingConfig &c, const std::string &, const std::string &v) {
                   c.variant = parse_variant(trim(v));
                 },
                 [](const TrainingConfig &c) { return to_string(c.variant); }});
    t.push_back(int_key("epochs", &TrainingConfig::epochs));
    t.push_back(int_key("batch_size", &TrainingConfig::batch_size));
    t.push_back(u64_key("seed", &TrainingConfig::seed));
    t.push_back(string_key("dataset", &TrainingConfig::dataset));
    t.push_back(int_key("checkpoint_interval", &TrainingConfig::checkpoint_interval));
    t.push_back(int_key("fid_interval", &TrainingConfig::fid_interval));
    t.push_back(int_key("fid_samples", &TrainingConfig::fid_samples));
    t.push_back(string_key("embedder", &TrainingConfig::embedder));
    t.push_back(u64_key("eval_seed", &TrainingConfig::eval_seed));
    t.push_back(double_key("lambda_categorical", &TrainingConfig::lambda_categorical));
    t.push_back(double_key("lambda_continuous", &TrainingConfig::lambda_continuous));
    t.push_back(int_key("convergence_window", &TrainingConfig::convergence_window));
    t.push_back(double_key("convergence_tolerance", &TrainingConfig::convergence_tolerance));

    t.push_back(double_key("optimizer.g_learning_rate",
                           [](auto &c) -> auto & { return c.g_optimizer.learning_rate; }));
    t.push_back(double_key("optimizer.g_beta1", [](auto &c) -> auto & { return c.g_optimizer.beta1; }));
    t.push_back(double_key("optimizer.g_beta2", [](auto &c) -> auto & { return c.g_optimizer.beta2; }));
    t.push_back(double_key("optimizer.d_learning_rate",
                           [](auto &c) -> auto & { return c.d_optimizer.learning_rate; }));
    t.push_back(double_key("optimizer.d_beta1", [](auto &c) -> auto & { return c.d_optimizer.beta1; }));
    t.push_back(double_key("optimizer.d_beta2", [](auto &c) -> auto & { return c.d_optimizer.beta2; }));

    t.push_back(int_key("ga.generations", [](auto &c) -> auto & { return c.ga.generations; }));
    t.push_back(double_key("ga.mutation_rate", [](auto &c) -> auto & { return c.ga.mutation_rate; }));
    t.push_back(double_key("ga.mutation_scale", [](auto &c) -> auto & { return c.ga.mutation_scale; }));
    t.push_back(int_key("ga.offspring_per_generation",
                        [](auto &c) -> auto & { return c.ga.offspring_per_generation; }));

    t.push_back(int_key("latent.z_dim", [](auto &c) -> auto & { return c.network.latent.z_dim; }));
    t.push_back(
        int_key("latent.n_categorical", [](auto &c) -> auto & { return c.network.latent.n_categorical; }));
    t.push_back(int_key("latent.n_classes", [](auto &c) -> auto & { return c.network.latent.n_classes; }));
    t.push_back(
        int_key("latent.n_continuous", [](auto &c) -> auto & { return c.network.latent.n_continuous; }));

    t.push_back({"network.image_size",
                 [](TrainingConfig &c, const std::string &key, const std::string &v) {
                   c.network.image.height = c.network.image.width = parse_number<int>(key, v);
                 },
                 [](const TrainingConfig &c) { return std::to_string(c.network.image.height); }});
    t.push_back(int_key("network.channels", [](auto &c) -> auto & { return c.network.image.channels; }));
    t.push_back(int_key("network.g_hidden", [](auto &c) -> auto & { return c.network.g_hidden; }));
    t.push_back(
        int_key("network.g_base_channels", [](auto &c) -> auto & { return c.network.g_base_channels; }));
    t.push_back(
        int_key("network.g_mid_channels", [](auto &c) -> auto & { return c.network.g_mid_channels; }));
    t.push_back(int_key("network.d_channels1", [](auto &c) -> auto & { return c.network.d_channels1; }));
    t.push_back(int_key("network.d_channels2", [](auto &c) -> auto & { return c.network.d_channels2; }));
    t.push_back(int_key("network.d_hidden", [](auto &c) -> auto & { return c.network.d_hidden; }));
    t.push_back(int_key("network.q_hidden", [](auto &c) -> auto & { return c.network.q_hidden; }));
    t.push_back(double_key("network.leaky_slope", [](auto &c) -> auto & { return c.network.leaky_slope; }));
    t.push_back(double_key("network.init_stddev", [](auto &c) -> auto & { return c.network.init_stddev; }));
    return t;
  }();
  return table;
}

const KeyDef &find_key(const std::string &key) {
  for (const auto &k : key_table()) {
    if (k.name == key) {
      return k;
    }
  }
  std::string valid;
  for (const auto &k : key_table()) {
    valid += "\n  " + k.name;
  }
  throw ConfigError("unknown config key '" + key + "'; valid keys are:" + valid);
}

} // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto &k : key_table()) {
    out.push_back(k.name);
  }
  return out;
}

void set_config_value(TrainingConfig &config, const std::string &key, const std::string &value) {
  find_key(key).set(config, key, value);
}

std::string get_config_value(const TrainingConfig &config, const std::string &key) {
  return find_key(key).get(config);
}

void apply_override(TrainingConfig &config, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form KEY=VALUE");
  }
  set_config_value(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

TrainingConfig parse_config(const std::string &text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  TrainingConfig config;
  for (const auto &[name, node] : tree) {
    if (node.empty()) {
      set_config_value(config, name, node.data());
      continue;
    }
    for (const auto &[key, leaf] : node) {
      set_config_value(config, name + "." + key, leaf.data());
    }
  }
  return config;
}

TrainingConfig load_config(const std::filesystem::path &path, const std::vector<std::string> &overrides) {
  std::ifstream is(path);
  if (!is) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::stringstream buf;
  buf << is.rdbuf();
  TrainingConfig config = parse_config(buf.str());
  for (const auto &o : overrides) {
    apply_override(config, o);
  }
  config.validate();
  return config;
}

std::string to_ini(const TrainingConfig &config) {
  std::ostringstream os;
  std::string section;
  for (const auto &k : key_table()) {
    const auto dot = k.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
    const std::string key = dot == std::string::npos ? k.name : k.name.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << key << " = " << k.get(config) << "\n";
  }
  return os.str();
}

} // namespace evogan
