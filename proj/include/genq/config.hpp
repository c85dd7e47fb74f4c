#pragma once

#include <array>
#include <optional>
#include <string>

#include "genq/error.hpp"
#include "genq/generator.hpp"
#include "genq/templates.hpp"

namespace genq {

struct BadKey : Error {
  explicit BadKey(const std::string& keys) : Error("unknown config keys: " + keys) {}
};

struct BadValue : Error {
  explicit BadValue(const std::string& what) : Error("bad config value: " + what) {}
};

/// Pipeline knobs. Defaults apply for every absent key.
struct Config {
  SlotConfig slot_config = SlotConfig::defaults();  ///< slot_set + interrogative_whitelist
  int top_k = 50;
  int max_per_sentence = 3;
  std::optional<std::array<double, 3>> quota;  ///< C/A/R shares, must sum to 1
  std::optional<ParaphraseConfig> paraphrase;
  double glm_tol = 1e-8;
  int max_iter = 100;
};

/// Reads a JSON config. No path → all defaults; a named path must exist.
/// Unknown keys (top-level or nested) are collected into one BadKey; invalid
/// values raise BadValue.
Config load_config(const std::optional<std::string>& path);

}  // namespace genq
