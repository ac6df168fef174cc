#pragma once

// Flat `key = value` configuration covering every tunable of the pipeline.
// Lines starting with '#' are comments. CMGGIB_SEED in the environment
// overrides `seed`.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cmggib/embedding.hpp"
#include "cmggib/errors.hpp"

namespace cmggib {

struct Config {
  std::uint64_t seed = 13;

  // embedding / graph
  int d1 = 768;
  int d2 = 300;
  int dz = 0;         // 0 means "same as d1"
  int mlp_width = 0;  // 0 means "same as d1"
  int gat_layers = 2;
  double leaky_slope = 0.2;
  double lambda = 0.25;
  double context_mix = 0.1;
  double region_jitter = 0.3;

  // refinement
  double tau = 0.1;
  double beta = 0.01;
  int context_order = 2;
  int refine_iterations = 2;
  double gate_prior = 0.5;
  double gate_weight = 0.0;

  // topics
  int topics = 10;
  int keywords = 10;
  int codebook_size = 2000;
  int kmeans_iterations = 100;
  double kmeans_tolerance = 1e-4;
  int min_count = 2;

  // objective and optimisation
  double eta1 = 1.0;
  double eta2 = 1.0;
  double lr_pretrained = 2e-5;
  double lr_other = 2e-4;
  int epochs_gene = 20;
  int epochs_lamo = 20;
  int epochs_joint = 40;
  int batch_size = 8;
  bool freeze_lamo_in_joint = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  // evaluation / analysis
  bool exclude_none = true;
  int probe_epochs = 300;
  double probe_lr = 0.05;
  double probe_l2 = 1e-3;

  // synthetic corpus
  int synth_instances = 500;
  int synth_classes = 4;
  double synth_strength = 1.0;
  double synth_dev_fraction = 0.15;
  double synth_test_fraction = 0.15;
  double synth_plant_cosine = 0.8;
  double synth_decoy_rate = 0.0;

  int effective_dz() const { return dz > 0 ? dz : d1; }
  int effective_width() const { return mlp_width > 0 ? mlp_width : d1; }

  // Compact settings for desk-scale synthetic runs.
  static Config desk() {
    Config c;
    c.d1 = 16;
    c.d2 = 8;
    c.mlp_width = 16;
    c.topics = 4;
    c.keywords = 5;
    c.codebook_size = 24;
    c.lr_pretrained = 2e-3;
    c.lr_other = 1e-2;
    c.epochs_gene = 12;
    c.epochs_lamo = 8;
    c.epochs_joint = 8;
    c.batch_size = 8;
    // Small graphs: a 2-hop context covers nearly every node, leaving the gates nothing to tell apart.
    c.context_order = 1;
    c.gate_weight = 1.0;
    c.gate_prior = 0.3;
    return c;
  }

  using Field = std::variant<int Config::*, double Config::*, bool Config::*, std::uint64_t Config::*>;

  static const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> f = {
        {"seed", &Config::seed},
        {"d1", &Config::d1},
        {"d2", &Config::d2},
        {"dz", &Config::dz},
        {"mlp_width", &Config::mlp_width},
        {"gat_layers", &Config::gat_layers},
        {"leaky_slope", &Config::leaky_slope},
        {"lambda", &Config::lambda},
        {"context_mix", &Config::context_mix},
        {"region_jitter", &Config::region_jitter},
        {"tau", &Config::tau},
        {"beta", &Config::beta},
        {"context_order", &Config::context_order},
        {"refine_iterations", &Config::refine_iterations},
        {"gate_prior", &Config::gate_prior},
        {"gate_weight", &Config::gate_weight},
        {"topics", &Config::topics},
        {"keywords", &Config::keywords},
        {"codebook_size", &Config::codebook_size},
        {"kmeans_iterations", &Config::kmeans_iterations},
        {"kmeans_tolerance", &Config::kmeans_tolerance},
        {"min_count", &Config::min_count},
        {"eta1", &Config::eta1},
        {"eta2", &Config::eta2},
        {"lr_pretrained", &Config::lr_pretrained},
        {"lr_other", &Config::lr_other},
        {"epochs_gene", &Config::epochs_gene},
        {"epochs_lamo", &Config::epochs_lamo},
        {"epochs_joint", &Config::epochs_joint},
        {"batch_size", &Config::batch_size},
        {"freeze_lamo_in_joint", &Config::freeze_lamo_in_joint},
        {"adam_beta1", &Config::adam_beta1},
        {"adam_beta2", &Config::adam_beta2},
        {"adam_epsilon", &Config::adam_epsilon},
        {"exclude_none", &Config::exclude_none},
        {"probe_epochs", &Config::probe_epochs},
        {"probe_lr", &Config::probe_lr},
        {"probe_l2", &Config::probe_l2},
        {"synth_instances", &Config::synth_instances},
        {"synth_classes", &Config::synth_classes},
        {"synth_strength", &Config::synth_strength},
        {"synth_dev_fraction", &Config::synth_dev_fraction},
        {"synth_test_fraction", &Config::synth_test_fraction},
        {"synth_plant_cosine", &Config::synth_plant_cosine},
        {"synth_decoy_rate", &Config::synth_decoy_rate},
    };
    return f;
  }

  void set(const std::string& key, const std::string& value) {
    for (const auto& [name, field] : fields()) {
      if (name != key) continue;
      try {
        std::visit(
            [&](auto member) {
              using T = std::remove_reference_t<decltype(this->*member)>;
              if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "1") {
                  this->*member = true;
                } else if (value == "false" || value == "0") {
                  this->*member = false;
                } else {
                  throw ConfigError("");
                }
              } else if constexpr (std::is_same_v<T, int>) {
                std::size_t used = 0;
                this->*member = std::stoi(value, &used);
                if (used != value.size()) throw ConfigError("");
              } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                std::size_t used = 0;
                this->*member = std::stoull(value, &used);
                if (used != value.size()) throw ConfigError("");
              } else {
                std::size_t used = 0;
                this->*member = std::stod(value, &used);
                if (used != value.size()) throw ConfigError("");
              }
            },
            field);
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' has invalid value '" + value + "'");
      }
      return;
    }
    throw ConfigError("unknown config key '" + key + "'");
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& [name, field] : fields()) {
      os << name << " = ";
      std::visit(
          [&](auto member) {
            using T = std::remove_reference_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<T, bool>) {
              os << (this->*member ? "true" : "false");
            } else {
              os << this->*member;
            }
          },
          field);
      os << "\n";
    }
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a(0, to_text()); }

  void validate() const {
    if (d1 <= 0 || d2 <= 0) throw ConfigError("d1 and d2 must be positive");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (beta < 0.0) throw ConfigError("beta must be nonnegative");
    if (gate_weight < 0.0) throw ConfigError("gate_weight must be nonnegative");
    if (!(gate_prior > 0.0 && gate_prior < 1.0)) throw ConfigError("gate_prior must lie in (0, 1)");
    if (context_order < 1) throw ConfigError("context_order must be at least 1");
    if (topics < 2) throw ConfigError("topics must be at least 2");
    if (keywords < 0) throw ConfigError("keywords must be nonnegative");
    if (eta1 < 0.0 || eta2 < 0.0) throw ConfigError("eta1 and eta2 must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (gat_layers < 1) throw ConfigError("gat_layers must be positive");
    if (synth_classes < 2) throw ConfigError("synth_classes must be at least 2");
  }

  static Config parse(const std::string& text) { return parse(text, Config{}); }

  static Config parse(const std::string& text, Config base) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash_pos = line.find('#');
      if (hash_pos != std::string::npos) line.erase(hash_pos);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
  }

  static Config load(const std::string& path) { return load(path, Config{}); }

  static Config load(const std::string& path, Config base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), base);
  }

  void apply_environment() {
    if (const char* s = std::getenv("CMGGIB_SEED"); s != nullptr && *s != '\0') set("seed", s);
  }
};

}  // namespace cmggib
