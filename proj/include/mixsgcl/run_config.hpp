#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixsgcl/dataset.hpp"
#include "mixsgcl/trainer.hpp"

namespace mixsgcl {

// Flat key=value configuration shared by the CLI commands. '#' starts a
// comment, keys may appear once, unknown keys are rejected. Command-line
// flags override file values.
struct RunConfig {
  TrainConfig train;
  SplitConfig split;
  int k_core = 5;
  std::string delimiter = "tab";  // tab | comma | space | semicolon | single char
  std::string precision = "f64";  // f64 | f32
  int threads = 1;

  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "model",        "tau",        "lambda",          "view_mode",
        "noise_eps",    "exclude_self_pair",             "n_mix",
        "beta_max",     "alpha_per_node",                "mixup_joint_batch",
        "batch_size",   "embedding_dim",                 "layers",
        "learning_rate","max_epochs", "patience",        "eval_k",
        "seed",         "refresh",    "eval_user_sample","ratio_train",
        "ratio_valid",  "ratio_test", "split_seed",      "train_keep_ratio",
        "k_core",       "delimiter",  "precision",       "threads"};
    return keys;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_double = [&] { return std::stod(value); };
    auto as_int = [&] { return std::stoll(value); };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw std::invalid_argument("expected boolean for " + key + ", got '" + value + "'");
    };
    try {
      if (key == "model") train.model = model_kind_from_string(value);
      else if (key == "tau") train.loss.tau = as_double();
      else if (key == "lambda") train.loss.lambda = as_double();
      else if (key == "view_mode") {
        if (value == "identity") train.loss.view_mode = ViewMode::Identity;
        else if (value == "noise") train.loss.view_mode = ViewMode::Noise;
        else throw std::invalid_argument("view_mode must be identity|noise");
      }
      else if (key == "noise_eps") train.loss.noise_eps = as_double();
      else if (key == "exclude_self_pair") train.loss.exclude_self_pair = as_bool();
      else if (key == "n_mix") train.mixup.n_mix = static_cast<int>(as_int());
      else if (key == "beta_max") train.mixup.beta_max = as_double();
      else if (key == "alpha_per_node") train.mixup.alpha_per_node = as_bool();
      else if (key == "mixup_joint_batch") train.mixup.joint_batch = as_bool();
      else if (key == "batch_size") train.batch_size = as_int();
      else if (key == "embedding_dim") train.embedding_dim = static_cast<int>(as_int());
      else if (key == "layers") train.layers = static_cast<int>(as_int());
      else if (key == "learning_rate") train.learning_rate = as_double();
      else if (key == "max_epochs") train.max_epochs = static_cast<int>(as_int());
      else if (key == "patience") train.patience = static_cast<int>(as_int());
      else if (key == "eval_k") train.eval_k = static_cast<int>(as_int());
      else if (key == "seed") {
        train.seed = static_cast<std::uint64_t>(as_int());
        train.mixup.seed = train.seed;
      }
      else if (key == "refresh") train.refresh = refresh_policy_from_string(value);
      else if (key == "eval_user_sample") train.eval_user_sample = as_int();
      else if (key == "ratio_train") split.ratios[0] = as_double();
      else if (key == "ratio_valid") split.ratios[1] = as_double();
      else if (key == "ratio_test") split.ratios[2] = as_double();
      else if (key == "split_seed") split.seed = static_cast<std::uint64_t>(as_int());
      else if (key == "train_keep_ratio") split.train_keep_ratio = as_double();
      else if (key == "k_core") k_core = static_cast<int>(as_int());
      else if (key == "delimiter") delimiter = value;
      else if (key == "precision") {
        if (value != "f64" && value != "f32") {
          throw std::invalid_argument("precision must be f64|f32");
        }
        precision = value;
      }
      else if (key == "threads") threads = static_cast<int>(as_int());
      else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
    }
  }

  // Parses a flat key=value file; collects every problem instead of stopping
  // at the first one.
  std::vector<std::string> load_file(const std::filesystem::path& path) {
    std::vector<std::string> errors;
    std::ifstream in(path);
    if (!in) {
      errors.push_back("cannot open config file: " + path.string());
      return errors;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        errors.push_back("line " + std::to_string(line_no) + ": expected key=value");
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (!known_keys().contains(key)) {
        errors.push_back("line " + std::to_string(line_no) + ": unknown config key '" + key + "'");
        continue;
      }
      try {
        set(key, value);
      } catch (const std::exception& e) {
        errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return errors;
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> errors = train.validate();
    try {
      split.validate();
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
    if (k_core < 1) errors.push_back("k_core must be >= 1");
    if (threads < 1) errors.push_back("threads must be >= 1");
    if (delimiter_char() == '\0') {
      errors.push_back("delimiter must be tab|comma|space|semicolon or a single character");
    }
    return errors;
  }

  char delimiter_char() const {
    if (delimiter == "tab") return '\t';
    if (delimiter == "comma") return ',';
    if (delimiter == "space") return ' ';
    if (delimiter == "semicolon") return ';';
    if (delimiter.size() == 1) return delimiter[0];
    return '\0';
  }

  nlohmann::ordered_json echo() const {
    nlohmann::ordered_json j = train.to_json();
    j["ratio_train"] = split.ratios[0];
    j["ratio_valid"] = split.ratios[1];
    j["ratio_test"] = split.ratios[2];
    j["split_seed"] = split.seed;
    j["train_keep_ratio"] = split.train_keep_ratio;
    j["k_core"] = k_core;
    j["delimiter"] = delimiter;
    j["precision"] = precision;
    j["threads"] = threads;
    return j;
  }
};

// Resolves a path against MIXSGCL_DATA_DIR when the file is not found as
// given.
inline std::filesystem::path resolve_data_path(const std::filesystem::path& path) {
  if (std::filesystem::exists(path) || path.is_absolute()) return path;
  if (const char* dir = std::getenv("MIXSGCL_DATA_DIR")) {
    const std::filesystem::path candidate = std::filesystem::path(dir) / path;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return path;
}

}  // namespace mixsgcl
