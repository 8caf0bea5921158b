// awe/ranking.hpp

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

// Ranked retrieval lists and the JSON-lines results file shared by the
// embedding and DTW search systems.

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "awe/common.hpp"

namespace awe {

struct RankedEntry {
  int utterance_id = 0;
  double score = 0.0;  // cost: lower is better
  std::size_t best_start = 0;
  bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
  int keyword_id = 0;
  std::vector<RankedEntry> entries;
  bool operator==(const RankedList&) const = default;
};

// Ascending score, ties by utterance id.
inline void sort_canonical(RankedList& list) {
  std::stable_sort(list.entries.begin(), list.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.score != b.score ? a.score < b.score : a.utterance_id < b.utterance_id;
  });
}

inline bool is_canonical(const RankedList& list) {
  RankedList copy = list;
  sort_canonical(copy);
  return copy == list;
}

// ---------------------------------------------------------------------------
// Results file: one meta line, then one record per (keyword, utterance) in
// keyword order and rank order.

struct ResultsFile {
  std::string system;  // "awe" | "sdtw"
  nlohmann::json meta;
  std::vector<RankedList> rankings;
};

inline std::string encode_results(const std::string& system, const std::vector<RankedList>& rankings,
                                  const nlohmann::json& provenance = nullptr) {
  std::ostringstream out;
  nlohmann::json meta{{"type", "meta"}, {"system", system}};
  if (!provenance.is_null()) meta["provenance"] = provenance;
  out << meta.dump() << '\n';
  for (const auto& list : rankings)
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
      const auto& e = list.entries[r];
      nlohmann::json rec{{"type", "result"},
                         {"system", system},
                         {"keyword", list.keyword_id},
                         {"utterance", e.utterance_id},
                         {"score", e.score},
                         {"best_start", e.best_start},
                         {"rank", r + 1}};
      out << rec.dump() << '\n';
    }
  return out.str();
}

inline void write_results(const std::filesystem::path& path, const std::string& system,
                          const std::vector<RankedList>& rankings, const nlohmann::json& provenance = nullptr) {
  write_file(path, encode_results(system, rankings, provenance));
}

inline ResultsFile read_results(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(str_cat("missing results file '", path.string(), "'"));
  std::istringstream in(read_file(path));
  ResultsFile rf;
  std::map<int, RankedList> by_kw;
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (j.at("type") == "meta") {
        rf.system = j.at("system").get<std::string>();
        rf.meta = j;
        continue;
      }
      auto& list = by_kw[j.at("keyword").get<int>()];
      list.keyword_id = j.at("keyword").get<int>();
      list.entries.push_back({j.at("utterance").get<int>(), j.at("score").get<double>(),
                              j.at("best_start").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(str_cat("corrupt results file '", path.string(), "' at line ", lineno, ": ", e.what()));
  }
  for (auto& [_, list] : by_kw) rf.rankings.push_back(std::move(list));
  return rf;
}

}  // namespace awe
