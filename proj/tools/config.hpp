#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinforge/errors.hpp"

namespace spinforge::cli {

using nlohmann::json;

// Typed, key-checked view of one JSON object in the experiment config.
// Every lookup records the key; finish() rejects anything never looked up.
class Section {
 public:
  Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  Section section(const std::string& key) {
    used_.insert(key);
    return Section(has(key) ? &j_->at(key) : nullptr, key_path(key));
  }

  double number(const std::string& key, double fallback, const std::function<bool(double)>& ok = {},
                const char* rule = "out of range") {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_->at(key);
    if (!v.is_number()) throw ConfigError(key_path(key), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key_path(key), "must be finite");
    if (ok && !ok(x)) throw ConfigError(key_path(key), rule);
    return x;
  }

  double positive(const std::string& key, double fallback) {
    return number(key, fallback, [](double x) { return x > 0; }, "must be > 0");
  }

  long integer(const std::string& key, long fallback, long lo, long hi) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_->at(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key), "must be an integer");
    const long x = v.get<long>();
    if (x < lo || x > hi)
      throw ConfigError(key_path(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  bool flag(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    if (!j_->at(key).is_boolean()) throw ConfigError(key_path(key), "must be true or false");
    return j_->at(key).get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed = {}) {
    used_.insert(key);
    if (!has(key)) return fallback;
    if (!j_->at(key).is_string()) throw ConfigError(key_path(key), "must be a string");
    const auto s = j_->at(key).get<std::string>();
    if (!allowed.empty() && !allowed.count(s)) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
      throw ConfigError(key_path(key), "must be one of: " + opts);
    }
    return s;
  }

  std::vector<int> bits(const std::string& key, const std::vector<int>& fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_->at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(key_path(key), "must be a non-empty array of 0/1");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || (e.get<int>() != 0 && e.get<int>() != 1))
        throw ConfigError(key_path(key), "entries must be 0 or 1");
      out.push_back(e.get<int>());
    }
    return out;
  }

  // Accepts keys this run does not read, such as sections for other subcommands.
  void allow(const std::set<std::string>& keys) { used_.insert(keys.begin(), keys.end()); }

  void finish() const {
    if (!j_) return;
    for (const auto& [k, v] : j_->items())
      if (!used_.count(k)) throw ConfigError(key_path(k), "unknown key");
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace spinforge::cli
