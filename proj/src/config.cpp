#include "genq/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace genq {

namespace {

using nlohmann::json;

void collect_unknown(const json& object, const std::set<std::string>& known,
                     const std::string& prefix, std::vector<std::string>& unknown) {
  for (const auto& [key, value] : object.items())
    if (!known.count(key)) unknown.push_back(prefix + key);
}

int require_int(const json& value, const std::string& key, int minimum) {
  if (!value.is_number_integer())
    throw BadValue(key + " must be an integer");
  int v = value.get<int>();
  if (v < minimum)
    throw BadValue(key + " must be at least " + std::to_string(minimum));
  return v;
}

}  // namespace

Config load_config(const std::optional<std::string>& path) {
  Config config;
  if (!path) return config;

  std::ifstream in(*path, std::ios::binary);
  if (!in) throw BadValue("config file not found: " + *path);

  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw BadValue(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw BadValue("config root must be a JSON object");

  std::vector<std::string> unknown;
  collect_unknown(root,
                  {"slot_set", "interrogative_whitelist", "top_k", "max_per_sentence", "quota",
                   "paraphrase", "tolerances"},
                  "", unknown);
  if (root.contains("paraphrase") && root["paraphrase"].is_object())
    collect_unknown(root["paraphrase"], {"url", "timeout_ms", "retries", "max_in_flight"},
                    "paraphrase.", unknown);
  if (root.contains("tolerances") && root["tolerances"].is_object())
    collect_unknown(root["tolerances"], {"glm_tol", "max_iter"}, "tolerances.", unknown);
  if (!unknown.empty()) {
    std::ostringstream keys;
    for (std::size_t i = 0; i < unknown.size(); ++i) keys << (i ? ", " : "") << unknown[i];
    throw BadKey(keys.str());
  }

  if (root.contains("slot_set")) {
    const json& slots = root["slot_set"];
    if (!slots.is_array() || slots.empty())
      throw BadValue("slot_set must be a non-empty array of slot label names");
    config.slot_config.slots.clear();
    for (const auto& entry : slots) {
      if (!entry.is_string()) throw BadValue("slot_set entries must be strings");
      auto label = parse_slot_label(entry.get<std::string>());
      if (!label) throw BadValue("unknown slot label: " + entry.get<std::string>());
      config.slot_config.slots.push_back(*label);
    }
  }
  if (root.contains("interrogative_whitelist")) {
    const json& words = root["interrogative_whitelist"];
    if (!words.is_array()) throw BadValue("interrogative_whitelist must be an array");
    config.slot_config.interrogative_whitelist.clear();
    for (const auto& entry : words) {
      if (!entry.is_string() || entry.get<std::string>().empty())
        throw BadValue("interrogative_whitelist entries must be non-empty strings");
      config.slot_config.interrogative_whitelist.push_back(entry.get<std::string>());
    }
  }
  if (root.contains("top_k")) config.top_k = require_int(root["top_k"], "top_k", 1);
  if (root.contains("max_per_sentence"))
    config.max_per_sentence = require_int(root["max_per_sentence"], "max_per_sentence", 1);

  if (root.contains("quota")) {
    const json& quota = root["quota"];
    if (!quota.is_array() || quota.size() != 3)
      throw BadValue("quota must be an array of three C/A/R shares");
    std::array<double, 3> shares{};
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
      if (!quota[i].is_number()) throw BadValue("quota shares must be numbers");
      shares[i] = quota[i].get<double>();
      if (shares[i] < 0.0) throw BadValue("quota shares must be non-negative");
      sum += shares[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw BadValue("quota shares must sum to 1");
    config.quota = shares;
  }

  if (root.contains("paraphrase")) {
    const json& para = root["paraphrase"];
    if (!para.is_object()) throw BadValue("paraphrase must be an object");
    ParaphraseConfig client;
    if (!para.contains("url") || !para["url"].is_string() ||
        para["url"].get<std::string>().empty())
      throw BadValue("paraphrase.url must be a non-empty string");
    client.url = para["url"].get<std::string>();
    if (para.contains("timeout_ms"))
      client.timeout_ms = require_int(para["timeout_ms"], "paraphrase.timeout_ms", 1);
    if (para.contains("retries"))
      client.retries = require_int(para["retries"], "paraphrase.retries", 0);
    if (para.contains("max_in_flight"))
      client.max_in_flight = require_int(para["max_in_flight"], "paraphrase.max_in_flight", 1);
    config.paraphrase = client;
  }

  if (root.contains("tolerances")) {
    const json& tol = root["tolerances"];
    if (!tol.is_object()) throw BadValue("tolerances must be an object");
    if (tol.contains("glm_tol")) {
      if (!tol["glm_tol"].is_number() || tol["glm_tol"].get<double>() <= 0.0)
        throw BadValue("tolerances.glm_tol must be a positive number");
      config.glm_tol = tol["glm_tol"].get<double>();
    }
    if (tol.contains("max_iter"))
      config.max_iter = require_int(tol["max_iter"], "tolerances.max_iter", 1);
  }

  return config;
}

}  // namespace genq
