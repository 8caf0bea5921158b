// awe/eval.hpp

// Copyright 2026  The awe-qbe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Utterance-level retrieval metrics: average precision, precision at a fixed
// cutoff, and precision at N where N is the number of relevant utterances.

#pragma once

#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "awe/common.hpp"
#include "awe/ranking.hpp"

namespace awe {

using Relevance = std::map<int, std::set<int>>;

inline double average_precision(const RankedList& ranked, const std::set<int>& relevant) {
  if (relevant.empty())
    throw ValidationError(str_cat("average_precision: keyword ", ranked.keyword_id, " has no relevant utterances"));
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked.entries.size(); ++r)
    if (relevant.count(ranked.entries[r].utterance_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  return sum / static_cast<double>(relevant.size());
}

// Denominator is always k, even when the list is shorter.
inline double precision_at_k(const RankedList& ranked, const std::set<int>& relevant, std::size_t k) {
  if (k < 1) throw ValidationError("precision_at_k: k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranked.entries.size()); ++r)
    hits += relevant.count(ranked.entries[r].utterance_id);
  return static_cast<double>(hits) / static_cast<double>(k);
}

struct KeywordMetrics {
  int keyword_id = 0;
  int group = 0;
  std::size_t num_relevant = 0;
  double ap = 0, p_at_5 = 0, p_at_n = 0;
};

struct GroupMetrics {
  std::string name;
  std::size_t num_keywords = 0;
  double map = 0, p_at_5 = 0, p_at_n = 0;
};

struct MetricsReport {
  std::vector<KeywordMetrics> per_keyword;
  std::vector<GroupMetrics> groups;  // "all" first, then one per group
  std::size_t num_keywords = 0;
  std::size_t num_utterances = 0;
  double map = 0, p_at_5 = 0, p_at_n = 0;
};

// Rankings are canonicalised (score, then id) before scoring. `group_of`
// assigns each keyword to a report group; `group_name` labels groups.
inline MetricsReport evaluate(std::span<const RankedList> rankings, const Relevance& relevance,
                              const std::function<int(int)>& group_of = nullptr,
                              const std::function<std::string(int)>& group_name = nullptr) {
  MetricsReport rep;
  std::map<int, std::vector<const KeywordMetrics*>> by_group;
  for (const auto& raw : rankings) {
    const auto it = relevance.find(raw.keyword_id);
    if (it == relevance.end() || it->second.empty())
      throw ValidationError(str_cat("evaluate: no relevance for keyword ", raw.keyword_id));
    RankedList list = raw;
    sort_canonical(list);
    KeywordMetrics m;
    m.keyword_id = list.keyword_id;
    m.group = group_of ? group_of(list.keyword_id) : 0;
    m.num_relevant = it->second.size();
    m.ap = average_precision(list, it->second);
    m.p_at_5 = precision_at_k(list, it->second, 5);
    m.p_at_n = precision_at_k(list, it->second, m.num_relevant);
    rep.num_utterances = std::max(rep.num_utterances, list.entries.size());
    rep.per_keyword.push_back(m);
  }
  rep.num_keywords = rep.per_keyword.size();

  auto summarize = [](std::string name, const std::vector<const KeywordMetrics*>& ms) {
    GroupMetrics g{std::move(name), ms.size()};
    for (const auto* m : ms) {
      g.map += m->ap;
      g.p_at_5 += m->p_at_5;
      g.p_at_n += m->p_at_n;
    }
    if (!ms.empty()) {
      const double n = static_cast<double>(ms.size());
      g.map /= n;
      g.p_at_5 /= n;
      g.p_at_n /= n;
    }
    return g;
  };
  std::vector<const KeywordMetrics*> all;
  for (const auto& m : rep.per_keyword) {
    all.push_back(&m);
    by_group[m.group].push_back(&m);
  }
  const GroupMetrics overall = summarize("all", all);
  rep.map = overall.map;
  rep.p_at_5 = overall.p_at_5;
  rep.p_at_n = overall.p_at_n;
  rep.groups.push_back(overall);
  if (group_of)
    for (const auto& [g, ms] : by_group)
      rep.groups.push_back(summarize(group_name ? group_name(g) : str_cat("group ", g), ms));
  return rep;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j{{"num_keywords", r.num_keywords}, {"num_utterances", r.num_utterances},
                   {"map", r.map},                   {"p_at_5", r.p_at_5},
                   {"p_at_n", r.p_at_n}};
  for (const auto& g : r.groups)
    j["groups"].push_back(
        {{"name", g.name}, {"num_keywords", g.num_keywords}, {"map", g.map}, {"p_at_5", g.p_at_5}, {"p_at_n", g.p_at_n}});
  for (const auto& m : r.per_keyword)
    j["per_keyword"].push_back({{"keyword", m.keyword_id},
                                {"group", m.group},
                                {"num_relevant", m.num_relevant},
                                {"ap", m.ap},
                                {"p_at_5", m.p_at_5},
                                {"p_at_n", m.p_at_n}});
  return j;
}

inline std::string render_table(const MetricsReport& r, const std::string& system = "") {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %6s %8s %8s %8s\n", system.empty() ? "keyword group" : system.c_str(),
                "#kw", "MAP", "P@5", "P@N");
  out += line;
  out += std::string(58, '-') + "\n";
  for (const auto& g : r.groups) {
    std::snprintf(line, sizeof line, "%-24s %6zu %8.4f %8.4f %8.4f\n", g.name.c_str(), g.num_keywords, g.map,
                  g.p_at_5, g.p_at_n);
    out += line;
  }
  return out;
}

}  // namespace awe
