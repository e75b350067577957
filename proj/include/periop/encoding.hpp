#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "periop/error.hpp"

namespace periop {

// log(prevalence among events / prevalence among non-events) with add-k
// smoothing on the in-group/out-of-group split of each class, so the value is
// always finite.
inline double log_ratio(double events_in, double events_total, double nonevents_in, double nonevents_total,
                        double k = 0.5) {
  const double p_event = (events_in + k) / (events_total + 2.0 * k);
  const double p_nonevent = (nonevents_in + k) / (nonevents_total + 2.0 * k);
  return std::log(p_event / p_nonevent);
}

struct GroupCounts {
  std::size_t events = 0;
  std::size_t nonevents = 0;
  std::size_t support() const noexcept { return events + nonevents; }
};

// Encodes a nominal feature as the smoothed log-ratio of each level. Missing
// values form their own level; unseen levels get `fallback` (0, the neutral
// ratio).
class CategoryEncoder {
 public:
  static constexpr std::string_view kMissingLevel = "__missing__";

  CategoryEncoder() = default;

  static CategoryEncoder fit(const std::vector<std::pair<std::string, int>>& tokens_and_labels, double k = 0.5) {
    CategoryEncoder enc;
    std::map<std::string, GroupCounts> counts;
    std::size_t events = 0, nonevents = 0;
    bool any_present = false;
    for (const auto& [token, label] : tokens_and_labels) {
      auto& c = counts[token];
      (label ? c.events : c.nonevents)++;
      (label ? events : nonevents)++;
      if (token != kMissingLevel) any_present = true;
    }
    enc.constant_ = !any_present;
    if (enc.constant_) return enc;
    for (const auto& [token, c] : counts)
      enc.map_[token] = log_ratio(static_cast<double>(c.events), static_cast<double>(events),
                                  static_cast<double>(c.nonevents), static_cast<double>(nonevents), k);
    return enc;
  }

  double encode(std::string_view token) const {
    if (constant_) return fallback_;
    auto it = map_.find(std::string(token));
    return it == map_.end() ? fallback_ : it->second;
  }

  // True when training data held no non-missing value.
  bool constant() const noexcept { return constant_; }
  double fallback() const noexcept { return fallback_; }
  const std::map<std::string, double>& levels() const noexcept { return map_; }

  friend void to_json(nlohmann::json& j, const CategoryEncoder& e) {
    j = {{"levels", e.map_}, {"fallback", e.fallback_}, {"constant", e.constant_}};
  }
  friend void from_json(const nlohmann::json& j, CategoryEncoder& e) {
    e.map_ = j.at("levels").get<std::map<std::string, double>>();
    e.fallback_ = j.at("fallback").get<double>();
    e.constant_ = j.at("constant").get<bool>();
  }

 private:
  std::map<std::string, double> map_;
  double fallback_ = 0.0;
  bool constant_ = false;
};

// Prefix tree over hierarchical procedure codes. Dots are ignored, so
// "45.13" has ancestors "4", "45", "451", "4513". Nodes exist down to
// `depth` characters; a code is encoded by its deepest ancestor with at least
// `min_support` training cases, else by the global fallback.
class ProcedureTree {
 public:
  struct Node {
    GroupCounts counts;
    double encoding = 0.0;
  };

  static std::string normalize(std::string_view code) {
    std::string out;
    for (char c : code)
      if (c != '.' && c != ' ') out.push_back(c);
    return out;
  }

  static ProcedureTree fit(const std::vector<std::pair<std::string, int>>& codes_and_labels, std::size_t depth,
                           std::size_t min_support = 10, double k = 0.5) {
    if (depth == 0) throw ConfigError("procedure tree depth must be >= 1");
    ProcedureTree t;
    t.depth_ = depth;
    t.min_support_ = min_support;
    for (const auto& [code, label] : codes_and_labels) {
      (label ? t.events_ : t.nonevents_)++;
      const std::string norm = normalize(code);
      for (std::size_t len = 1; len <= std::min(depth, norm.size()); ++len) {
        auto& c = t.nodes_[norm.substr(0, len)].counts;
        (label ? c.events : c.nonevents)++;
      }
    }
    for (auto& [_, node] : t.nodes_)
      node.encoding = log_ratio(static_cast<double>(node.counts.events), static_cast<double>(t.events_),
                                static_cast<double>(node.counts.nonevents), static_cast<double>(t.nonevents_), k);
    return t;
  }

  // Prefix of the node used for `code`; empty when the fallback applies.
  std::string resolve(std::string_view code) const {
    const std::string norm = normalize(code);
    for (std::size_t len = std::min(depth_, norm.size()); len >= 1; --len) {
      auto it = nodes_.find(norm.substr(0, len));
      if (it != nodes_.end() && it->second.counts.support() >= min_support_) return it->first;
    }
    return {};
  }

  double encode(std::string_view code) const {
    const std::string node = resolve(code);
    return node.empty() ? fallback_ : nodes_.at(node).encoding;
  }

  const std::map<std::string, Node>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const noexcept { return depth_; }
  std::size_t min_support() const noexcept { return min_support_; }
  double fallback() const noexcept { return fallback_; }

  friend void to_json(nlohmann::json& j, const ProcedureTree& t) {
    auto nodes = nlohmann::json::object();
    for (const auto& [prefix, n] : t.nodes_)
      nodes[prefix] = {{"events", n.counts.events}, {"nonevents", n.counts.nonevents}, {"encoding", n.encoding}};
    j = {{"depth", t.depth_},   {"min_support", t.min_support_}, {"events", t.events_},
         {"nonevents", t.nonevents_}, {"fallback", t.fallback_},     {"nodes", nodes}};
  }
  friend void from_json(const nlohmann::json& j, ProcedureTree& t) {
    t.depth_ = j.at("depth").get<std::size_t>();
    t.min_support_ = j.at("min_support").get<std::size_t>();
    t.events_ = j.at("events").get<std::size_t>();
    t.nonevents_ = j.at("nonevents").get<std::size_t>();
    t.fallback_ = j.at("fallback").get<double>();
    t.nodes_.clear();
    for (const auto& [prefix, n] : j.at("nodes").items()) {
      Node node;
      node.counts.events = n.at("events").get<std::size_t>();
      node.counts.nonevents = n.at("nonevents").get<std::size_t>();
      node.encoding = n.at("encoding").get<double>();
      t.nodes_.emplace(prefix, node);
    }
  }

 private:
  std::map<std::string, Node> nodes_;
  std::size_t depth_ = 1;
  std::size_t min_support_ = 10;
  std::size_t events_ = 0;
  std::size_t nonevents_ = 0;
  double fallback_ = 0.0;
};

inline ProcedureTree encode_procedures(const std::vector<std::pair<std::string, int>>& train_codes, std::size_t depth,
                                       std::size_t min_support = 10) {
  return ProcedureTree::fit(train_codes, depth, min_support);
}

}  // namespace periop
