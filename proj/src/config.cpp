#include "betaips/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "betaips/errors.hpp"
#include "betaips/io.hpp"

namespace betaips {
namespace {

using nlohmann::json;

// Reads a JSON object, tracking which keys were consumed so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + where(key.c_str()) + "'");
    }
  }

  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? "" : path_;
    if (key) p += (p.empty() ? "" : ".") + std::string(key);
    return p.empty() ? "<root>" : p;
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_optimizer(Section& s, OptimizerConfig& opt) {
  s.read("learning_rate", opt.learning_rate);
  s.read("decay_rate", opt.decay_rate);
  s.read("adam_beta1", opt.adam_beta1);
  s.read("adam_beta2", opt.adam_beta2);
  s.read("adam_epsilon", opt.adam_epsilon);
  s.read("epochs", opt.epochs);
  if (const json* b = s.child("batch_size")) {
    if (b->is_string() && b->get<std::string>() == "full") {
      opt.batch_size.reset();
    } else if (b->is_number_unsigned()) {
      opt.batch_size = b->get<std::size_t>();
    } else {
      throw ConfigError(s.where("batch_size") + " must be a positive integer or \"full\"");
    }
  }
  s.finish();
}

json optimizer_json(const OptimizerConfig& opt) {
  json j;
  j["learning_rate"] = opt.learning_rate;
  j["decay_rate"] = opt.decay_rate;
  j["adam_beta1"] = opt.adam_beta1;
  j["adam_beta2"] = opt.adam_beta2;
  j["adam_epsilon"] = opt.adam_epsilon;
  j["epochs"] = opt.epochs;
  if (opt.batch_size) {
    j["batch_size"] = *opt.batch_size;
  } else {
    j["batch_size"] = "full";
  }
  return j;
}

std::vector<BaselineMode> parse_modes(const std::vector<std::string>& names,
                                      const std::string& where) {
  std::vector<BaselineMode> modes;
  for (const auto& name : names) {
    try {
      modes.push_back(parse_baseline_mode(name));
    } catch (const ContractViolation& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return modes;
}

template <typename F>
void validated(const char* section, F&& check) {
  try {
    check();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::apply_globals() {
  environment.seed = seed;
  optimizer.seed = seed;
  ope.seed = seed;
  ope.threads = threads;
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  Section root(doc, "");
  root.read("seed", cfg.seed);
  root.read("threads", cfg.threads);
  if (const json* node = root.child("environment")) {
    Section s(*node, "environment");
    s.read("context_dim", cfg.environment.context_dim);
    s.read("num_actions", cfg.environment.num_actions);
    s.read("inverse_temperature", cfg.environment.inverse_temperature);
    s.read("dataset_size", cfg.environment.dataset_size);
    s.finish();
  }
  if (const json* node = root.child("optimizer")) {
    Section s(*node, "optimizer");
    read_optimizer(s, cfg.optimizer);
  }
  if (const json* node = root.child("train")) {
    Section s(*node, "train");
    s.read("estimator", cfg.train.estimator);
    if (const json* l = s.child("lambda")) {
      if (l->is_number()) {
        cfg.train.lambda = l->get<double>();
      } else if (l->is_string() && l->get<std::string>() == "mean_reward") {
        cfg.train.lambda = MeanLoggedReward{};
      } else {
        throw ConfigError("train.lambda must be a number or \"mean_reward\"");
      }
    }
    s.read("runs", cfg.train.runs);
    s.read("test_contexts", cfg.train.test_contexts);
    s.read("policy_out", cfg.train.policy_out);
    s.finish();
  }
  if (const json* node = root.child("sweep")) {
    Section s(*node, "sweep");
    s.read("lambda_grid", cfg.sweep.lambda_grid);
    s.read("validation_fraction", cfg.sweep.validation_fraction);
    s.finish();
  }
  if (const json* node = root.child("ope")) {
    Section s(*node, "ope");
    s.read("action_space_sizes", cfg.ope.action_space_sizes);
    s.read("inverse_temperatures", cfg.ope.inverse_temperatures);
    s.read("dataset_sizes", cfg.ope.dataset_sizes);
    s.read("replications", cfg.ope.replications);
    std::vector<std::string> names;
    for (const auto& m : cfg.ope.estimators) names.push_back(baseline_mode_name(m));
    s.read("estimators", names);
    cfg.ope.estimators = parse_modes(names, "ope.estimators");
    s.read("context_dim", cfg.ope.context_dim);
    s.read("true_value_contexts", cfg.ope.true_value_contexts);
    s.read("target_train_size", cfg.ope.target_train_size);
    if (const json* t = s.child("target_optimizer")) {
      Section ts(*t, "ope.target_optimizer");
      read_optimizer(ts, cfg.ope.target_optimizer);
    }
    s.finish();
  }
  if (const json* node = root.child("evaluate")) {
    Section s(*node, "evaluate");
    s.read("dataset", cfg.evaluate.dataset);
    s.read("policy", cfg.evaluate.policy);
    if (const json* r = s.child("reference_value")) {
      if (r->is_number()) {
        cfg.evaluate.reference_value = r->get<double>();
      } else if (!r->is_null()) {
        throw ConfigError("evaluate.reference_value must be a number or null");
      }
    }
    s.read("estimators", cfg.evaluate.estimators);
    parse_modes(cfg.evaluate.estimators, "evaluate.estimators");
    s.finish();
  }
  root.finish();

  cfg.apply_globals();
  validated("environment", [&] { cfg.environment.validate(); });
  validated("optimizer", [&] { cfg.optimizer.validate(); });
  validated("ope", [&] { cfg.ope.validate(); });
  validated("train", [&] {
    parse_baseline_mode(cfg.train.estimator);
    if (cfg.train.runs < 1) throw ContractViolation("runs must be >= 1");
    if (cfg.train.test_contexts < 1) throw ContractViolation("test_contexts must be >= 1");
    if (const double* l = std::get_if<double>(&cfg.train.lambda); l && !std::isfinite(*l)) {
      throw ContractViolation("lambda must be finite");
    }
  });
  validated("sweep", [&] {
    if (cfg.sweep.lambda_grid.empty()) throw ContractViolation("lambda_grid is empty");
    if (!(cfg.sweep.validation_fraction > 0.0 && cfg.sweep.validation_fraction < 1.0)) {
      throw ContractViolation("validation_fraction must lie in (0, 1)");
    }
  });
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["environment"] = {{"context_dim", cfg.environment.context_dim},
                      {"num_actions", cfg.environment.num_actions},
                      {"inverse_temperature", cfg.environment.inverse_temperature},
                      {"dataset_size", cfg.environment.dataset_size}};
  j["optimizer"] = optimizer_json(cfg.optimizer);
  json train = {{"estimator", cfg.train.estimator},
                {"runs", cfg.train.runs},
                {"test_contexts", cfg.train.test_contexts},
                {"policy_out", cfg.train.policy_out}};
  if (const double* l = std::get_if<double>(&cfg.train.lambda)) {
    train["lambda"] = *l;
  } else {
    train["lambda"] = "mean_reward";
  }
  j["train"] = train;
  j["sweep"] = {{"lambda_grid", cfg.sweep.lambda_grid},
                {"validation_fraction", cfg.sweep.validation_fraction}};
  std::vector<std::string> names;
  for (const auto& m : cfg.ope.estimators) names.push_back(baseline_mode_name(m));
  j["ope"] = {{"action_space_sizes", cfg.ope.action_space_sizes},
              {"inverse_temperatures", cfg.ope.inverse_temperatures},
              {"dataset_sizes", cfg.ope.dataset_sizes},
              {"replications", cfg.ope.replications},
              {"estimators", names},
              {"context_dim", cfg.ope.context_dim},
              {"true_value_contexts", cfg.ope.true_value_contexts},
              {"target_train_size", cfg.ope.target_train_size},
              {"target_optimizer", optimizer_json(cfg.ope.target_optimizer)}};
  json evaluate = {{"dataset", cfg.evaluate.dataset},
                   {"policy", cfg.evaluate.policy},
                   {"estimators", cfg.evaluate.estimators}};
  evaluate["reference_value"] =
      cfg.evaluate.reference_value ? json(*cfg.evaluate.reference_value) : json(nullptr);
  j["evaluate"] = evaluate;
  return j;
}

std::string dump_config(const ExperimentConfig& config) {
  return config_to_json(config).dump(2);
}

std::string config_digest(const ExperimentConfig& config) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : config_to_json(config).dump()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace betaips
