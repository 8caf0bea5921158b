// awe/pipeline.hpp

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

// Subcommand implementations behind the awe command-line tool. Every command
// reads its inputs from a fixed workdir layout
//
//   <workdir>/corpus/    manifest.json + blobs/        (synth)
//   <workdir>/features/  fbank blobs, embeddings       (featurize, embed)
//   <workdir>/models/    model.awem                    (train)
//   <workdir>/results/   <system>.jsonl                (search)
//   <workdir>/reports/   train and metrics reports     (train, eval)
//
// and stamps every output with the tool version and a hash of the effective
// configuration.

#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "awe/common.hpp"
#include "awe/corpus.hpp"
#include "awe/dtw.hpp"
#include "awe/eval.hpp"
#include "awe/features.hpp"
#include "awe/matcher.hpp"
#include "awe/model.hpp"
#include "awe/ranking.hpp"

namespace awe {

namespace fs = std::filesystem;

inline nlohmann::json to_json(const FbankConfig& c) {
  nlohmann::json j{{"frame_length", c.frame_length}, {"frame_shift", c.frame_shift},
                   {"n_mels", c.n_mels},             {"fmin", c.fmin},
                   {"log_floor", c.log_floor},       {"preemphasis", c.preemphasis},
                   {"window", c.window == WindowType::kHamming ? "hamming" : "hann"}};
  j["fmax"] = c.fmax ? nlohmann::json(*c.fmax) : nlohmann::json(nullptr);
  return j;
}

inline FbankConfig fbank_config_from_json(const nlohmann::json& j, FbankConfig c = {}) {
  if (j.contains("frame_length")) c.frame_length = j.at("frame_length").get<double>();
  if (j.contains("frame_shift")) c.frame_shift = j.at("frame_shift").get<double>();
  if (j.contains("n_mels")) c.n_mels = j.at("n_mels").get<std::size_t>();
  if (j.contains("fmin")) c.fmin = j.at("fmin").get<double>();
  if (j.contains("fmax")) c.fmax = j.at("fmax").is_null() ? std::nullopt : std::optional(j.at("fmax").get<double>());
  if (j.contains("log_floor")) c.log_floor = j.at("log_floor").get<double>();
  if (j.contains("preemphasis")) c.preemphasis = j.at("preemphasis").get<double>();
  if (j.contains("window")) {
    const auto w = j.at("window").get<std::string>();
    if (w == "hamming")
      c.window = WindowType::kHamming;
    else if (w == "hann")
      c.window = WindowType::kHann;
    else
      throw ValidationError(str_cat("FbankConfig.window: unknown window '", w, "'"));
  }
  return c;
}

enum class SearchSystem { kAwe, kSdtw };

inline const char* to_string(SearchSystem s) { return s == SearchSystem::kAwe ? "awe" : "sdtw"; }

inline SearchSystem search_system_from(std::string_view s) {
  if (s == "awe") return SearchSystem::kAwe;
  if (s == "sdtw") return SearchSystem::kSdtw;
  throw ValidationError(str_cat("unknown system '", s, "' (expected awe|sdtw)"));
}

struct RunConfig {
  fs::path workdir = "work";
  SearchSystem system = SearchSystem::kAwe;
  Fusion fusion = Fusion::kNone;  // sdtw only
  std::size_t templates_per_keyword = 10;
  std::size_t threads = 1;
  bool dump_traces = false;
  CorpusSpec corpus;
  FbankConfig features;
  ModelConfig model;  // block_layout is derived from the corpus at train time
  WindowConfig window;
  std::optional<fs::path> model_path;    // default <workdir>/models/model.awem
  std::optional<fs::path> results_path;  // default <workdir>/results/<system>.jsonl
  std::optional<fs::path> wav_dir;       // featurize input

  fs::path corpus_dir() const { return workdir / "corpus"; }
  fs::path features_dir() const { return workdir / "features"; }
  fs::path model_file() const { return model_path.value_or(workdir / "models" / "model.awem"); }
  fs::path results_file() const {
    return results_path.value_or(workdir / "results" / (std::string(to_string(system)) + ".jsonl"));
  }
  fs::path reports_dir() const { return workdir / "reports"; }

  // Sets the corpus and model seeds together.
  void set_seed(std::uint64_t seed) {
    corpus.seed = seed;
    model.seed = seed;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json paths{{"workdir", c.workdir.string()}};
  if (c.model_path) paths["model"] = c.model_path->string();
  if (c.results_path) paths["results"] = c.results_path->string();
  if (c.wav_dir) paths["wav_dir"] = c.wav_dir->string();
  return {{"paths", paths},
          {"system", to_string(c.system)},
          {"fusion", to_string(c.fusion)},
          {"templates_per_keyword", c.templates_per_keyword},
          {"threads", c.threads},
          {"dump_traces", c.dump_traces},
          {"corpus", to_json(c.corpus)},
          {"features", to_json(c.features)},
          {"model", to_json(c.model)},
          {"window", to_json(c.window)}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  try {
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      if (p.contains("workdir")) c.workdir = p.at("workdir").get<std::string>();
      if (p.contains("model")) c.model_path = fs::path(p.at("model").get<std::string>());
      if (p.contains("results")) c.results_path = fs::path(p.at("results").get<std::string>());
      if (p.contains("wav_dir")) c.wav_dir = fs::path(p.at("wav_dir").get<std::string>());
    }
    if (j.contains("system")) c.system = search_system_from(j.at("system").get<std::string>());
    if (j.contains("fusion")) c.fusion = fusion_from(j.at("fusion").get<std::string>());
    if (j.contains("templates_per_keyword")) c.templates_per_keyword = j.at("templates_per_keyword").get<std::size_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<std::size_t>();
    if (j.contains("dump_traces")) c.dump_traces = j.at("dump_traces").get<bool>();
    if (j.contains("corpus")) c.corpus = corpus_spec_from_json(j.at("corpus"), c.corpus);
    if (j.contains("features")) c.features = fbank_config_from_json(j.at("features"), c.features);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"), c.model);
    if (j.contains("window")) c.window = window_config_from_json(j.at("window"), c.window);
    if (j.contains("seed")) c.set_seed(j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(str_cat("invalid run config: ", e.what()));
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  try {
    return run_config_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(str_cat("config '", path.string(), "' is not valid JSON: ", e.what()));
  }
}

inline void validate(const RunConfig& c) {
  validate(c.corpus);
  validate(c.window);
  if (c.templates_per_keyword < 1) throw ValidationError("RunConfig.templates_per_keyword: must be >= 1");
  if (c.threads < 1) throw ValidationError("RunConfig.threads: must be >= 1");
}

inline std::string config_hash(const RunConfig& c) { return hex32(crc32_of(to_json(c).dump())); }

inline nlohmann::json provenance(const RunConfig& c, const std::string& command) {
  return {{"tool_version", std::string(kToolVersion)}, {"config_hash", config_hash(c)}, {"command", command}};
}

namespace detail {

inline void require_artifact(const fs::path& p, const char* upstream) {
  if (!fs::exists(p))
    throw OrderingError(str_cat("missing '", p.string(), "': run ", upstream, " first"));
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_file(p, j.dump(2) + "\n"); }

// First n template instances of each word, in corpus order.
inline std::map<int, std::vector<FeatureSequence>> templates_by_word(const CorpusBundle& b, std::size_t n) {
  std::map<int, std::vector<FeatureSequence>> out;
  for (const auto& inst : b.template_instances) {
    auto& v = out[inst.word_id];
    if (v.size() < n) v.push_back(inst.features);
  }
  return out;
}

// Keywords searched: every vocabulary word with at least one occurrence.
inline std::vector<int> searchable_keywords(const CorpusBundle& b) {
  std::vector<int> ids;
  for (const auto& [kw, _] : relevance_from(b.ground_truth)) ids.push_back(kw);
  return ids;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns the primary output path.

inline fs::path cmd_synth(const RunConfig& c) {
  validate(c);
  const CorpusBundle b = synth_corpus(c.corpus);
  save_manifest(b, c.corpus_dir(), provenance(c, "synth"));
  return c.corpus_dir() / "manifest.json";
}

// Computes log Mel filterbanks for every *.wav under the wav directory.
inline fs::path cmd_featurize(const RunConfig& c) {
  if (!c.wav_dir) throw ValidationError("featurize: no wav directory given (--wav-dir or paths.wav_dir)");
  if (!fs::is_directory(*c.wav_dir)) throw IoError(str_cat("wav directory '", c.wav_dir->string(), "' not found"));
  std::vector<fs::path> wavs;
  for (const auto& e : fs::directory_iterator(*c.wav_dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
  std::sort(wavs.begin(), wavs.end());
  nlohmann::json index{{"format", "awe-features"}, {"version", 1}, {"provenance", provenance(c, "featurize")},
                       {"fbank", to_json(c.features)}, {"items", nlohmann::json::array()}};
  for (const auto& w : wavs) {
    const FeatureSequence f = fbank(read_wav(w), c.features);
    const std::string blob = encode_awef(f);
    const std::string name = w.stem().string() + ".awef";
    write_file(c.features_dir() / "fbank" / name, blob);
    index["items"].push_back({{"source", w.filename().string()},
                              {"blob", "fbank/" + name},
                              {"rows", f.num_frames},
                              {"cols", f.dim},
                              {"crc32", hex32(crc32_of(blob))}});
  }
  const fs::path out = c.features_dir() / "fbank_manifest.json";
  detail::write_json(out, index);
  return out;
}

inline fs::path cmd_train(const RunConfig& c, const EpochCallback& on_epoch = nullptr) {
  detail::require_artifact(c.corpus_dir() / "manifest.json", "synth");
  const CorpusBundle b = load_manifest(c.corpus_dir());
  ModelConfig mcfg = c.model;
  mcfg.block_layout = layout_from_manifest(b.manifest);
  mcfg.input_dim = b.manifest.spec.feature_dim;
  const TrainResult r = train(mcfg, b.train_instances, on_epoch);
  const auto prov = provenance(c, "train");
  save_model(r.params, mcfg, c.model_file(), prov);
  nlohmann::json rep = to_json(r.report);
  rep["final_accuracy"] = r.report.final_accuracy();
  rep["provenance"] = prov;
  detail::write_json(c.reports_dir() / "train_report.json", rep);
  return c.model_file();
}

// Embeds the keyword templates (padded or clipped to the window length) and
// their fused per-keyword means.
inline fs::path cmd_embed(const RunConfig& c) {
  detail::require_artifact(c.corpus_dir() / "manifest.json", "synth");
  detail::require_artifact(c.model_file(), "train");
  const CorpusBundle b = load_manifest(c.corpus_dir());
  const LoadedModel m = load_model(c.model_file());
  nlohmann::json out{{"provenance", provenance(c, "embed")}, {"dim", m.params.embedding_dim},
                     {"keywords", nlohmann::json::array()}};
  for (const auto& [kw, temps] : detail::templates_by_word(b, c.templates_per_keyword)) {
    const KeywordQuery q = make_query(kw, std::span<const FeatureSequence>(temps), m.params, m.config, c.window);
    out["keywords"].push_back({{"keyword", kw}, {"templates", q.templates}, {"fused", q.fused}});
  }
  const fs::path path = c.features_dir() / "embeddings.json";
  write_file(path, out.dump() + "\n");
  return path;
}

inline fs::path cmd_search(const RunConfig& c) {
  validate(c);
  detail::require_artifact(c.corpus_dir() / "manifest.json", "synth");
  const CorpusBundle b = load_manifest(c.corpus_dir());
  const auto temps = detail::templates_by_word(b, c.templates_per_keyword);
  const auto keywords = detail::searchable_keywords(b);
  for (int kw : keywords) {
    const auto it = temps.find(kw);
    if (it == temps.end()) throw ValidationError(str_cat("keyword ", kw, " has no template instances"));
    if (it->second.size() < c.templates_per_keyword)
      log_warning(str_cat("keyword ", kw, ": only ", it->second.size(), " templates available"));
  }
  std::vector<RankedList> rankings;
  if (c.system == SearchSystem::kAwe) {
    detail::require_artifact(c.model_file(), "train");
    const LoadedModel m = load_model(c.model_file());
    std::vector<KeywordQuery> queries;
    for (int kw : keywords)
      queries.push_back(
          make_query(kw, std::span<const FeatureSequence>(temps.at(kw)), m.params, m.config, c.window));
    SearchOutput out = search(std::span<const KeywordQuery>(queries), b.utterances, m.params, m.config, c.window,
                              c.threads);
    rankings = std::move(out.rankings);
    if (c.dump_traces) {
      fs::path tp = c.results_file();
      tp.replace_extension(".traces.bin");
      write_file(tp, encode_traces(out.traces));
    }
  } else {
    std::vector<KeywordTemplates> kts;
    for (int kw : keywords) kts.push_back({kw, temps.at(kw)});
    rankings = sdtw_search(kts, b.utterances, c.fusion, 0, c.threads);
  }
  write_results(c.results_file(), to_string(c.system), rankings, provenance(c, "search"));
  return c.results_file();
}

inline MetricsReport cmd_eval(const RunConfig& c, fs::path* report_path = nullptr) {
  detail::require_artifact(c.corpus_dir() / "manifest.json", "synth");
  detail::require_artifact(c.results_file(), "search");
  const CorpusBundle b = load_manifest(c.corpus_dir());
  const ResultsFile rf = read_results(c.results_file());
  const Manifest& man = b.manifest;
  const MetricsReport rep = evaluate(
      rf.rankings, relevance_from(b.ground_truth), [&](int kw) { return man.language_of(kw); },
      [](int lang) { return str_cat("keyword lang ", lang == 0 ? "a" : "b"); });
  nlohmann::json j = to_json(rep);
  j["system"] = rf.system;
  j["provenance"] = provenance(c, "eval");
  const std::string stem = "metrics_" + rf.system;
  const fs::path jp = c.reports_dir() / (stem + ".json");
  detail::write_json(jp, j);
  write_file(c.reports_dir() / (stem + ".txt"), render_table(rep, rf.system));
  if (report_path) *report_path = jp;
  return rep;
}

}  // namespace awe
