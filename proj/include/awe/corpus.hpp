// awe/corpus.hpp

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

// Synthetic two-language code-switching corpus and its on-disk manifest.
//
// Generative model: every word has a prototype trajectory (a smoothed
// Gaussian random walk in feature space); every speaker applies a global
// linear time warp followed by a per-dimension affine map; instances add
// white noise. Utterances are silence/word/silence/... concatenations with
// exact occurrence records. The last ceil(25%) of speakers never appear in
// the training instances.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "awe/common.hpp"
#include "awe/features.hpp"

namespace awe {

struct FrameRange {
  std::size_t min = 0;
  std::size_t max = 0;
  bool operator==(const FrameRange&) const = default;
};

struct CorpusSpec {
  std::size_t num_words_lang_a = 10;
  std::size_t num_words_lang_b = 10;
  std::size_t num_speakers = 8;
  std::size_t instances_per_word_per_speaker = 5;
  std::size_t feature_dim = 64;
  FrameRange word_len_frames{24, 40};
  double speaker_gain_spread = 0.15;
  double speaker_bias_spread = 0.3;
  double noise_sigma = 0.05;
  double time_warp_spread = 0.1;
  std::size_t num_search_utterances = 40;
  FrameRange words_per_utterance{2, 4};
  FrameRange silence_len_frames{5, 15};
  std::uint64_t seed = 1;

  bool operator==(const CorpusSpec&) const = default;
};

struct WordInstance {
  int word_id = 0;
  int speaker_id = 0;
  int language_id = 0;
  FeatureSequence features;
  bool operator==(const WordInstance&) const = default;
};

struct Occurrence {
  int utterance_id = 0;
  int word_id = 0;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;  // exclusive
  bool operator==(const Occurrence&) const = default;
};

struct Utterance {
  int utterance_id = 0;
  int speaker_id = 0;
  FeatureSequence features;
  bool operator==(const Utterance&) const = default;
};

struct WordInfo {
  int word_id = 0;
  int language_id = 0;
  std::string name;
  bool operator==(const WordInfo&) const = default;
};

struct Manifest {
  CorpusSpec spec;
  std::vector<WordInfo> vocabulary;
  std::vector<int> train_speakers;
  std::vector<int> heldout_speakers;
  bool operator==(const Manifest&) const = default;

  std::size_t num_words() const { return vocabulary.size(); }
  int language_of(int word_id) const {
    if (word_id < 0 || static_cast<std::size_t>(word_id) >= vocabulary.size())
      throw ValidationError(str_cat("word_id ", word_id, " not in vocabulary"));
    return vocabulary[static_cast<std::size_t>(word_id)].language_id;
  }
};

struct CorpusBundle {
  std::vector<WordInstance> train_instances;
  std::vector<WordInstance> template_instances;  // held-out speakers
  std::vector<Utterance> utterances;
  std::vector<Occurrence> ground_truth;
  Manifest manifest;
  bool operator==(const CorpusBundle&) const = default;
};

// ---------------------------------------------------------------------------

inline void validate(const CorpusSpec& s) {
  auto require = [](bool ok, const char* field, const std::string& why) {
    if (!ok) throw ValidationError(str_cat("CorpusSpec.", field, ": ", why));
  };
  require(s.num_words_lang_a >= 1, "num_words_lang_a", "must be >= 1");
  require(s.num_words_lang_b >= 1, "num_words_lang_b", "must be >= 1");
  require(s.num_speakers >= 2, "num_speakers", "must be >= 2 (train and held-out splits)");
  require(s.instances_per_word_per_speaker >= 1, "instances_per_word_per_speaker", "must be >= 1");
  require(s.feature_dim >= 1, "feature_dim", "must be >= 1");
  require(s.word_len_frames.min >= 1, "word_len_frames", "min must be >= 1");
  require(s.word_len_frames.min <= s.word_len_frames.max, "word_len_frames", "min > max");
  require(s.speaker_gain_spread >= 0, "speaker_gain_spread", "must be >= 0");
  require(s.speaker_bias_spread >= 0, "speaker_bias_spread", "must be >= 0");
  require(s.noise_sigma >= 0, "noise_sigma", "must be >= 0");
  require(s.time_warp_spread >= 0 && s.time_warp_spread < 0.5, "time_warp_spread",
          "must be in [0, 0.5)");
  require(s.num_search_utterances >= 1, "num_search_utterances", "must be >= 1");
  require(s.words_per_utterance.min >= 1, "words_per_utterance", "min must be >= 1");
  require(s.words_per_utterance.min <= s.words_per_utterance.max, "words_per_utterance",
          "min > max");
  require(s.silence_len_frames.min <= s.silence_len_frames.max, "silence_len_frames", "min > max");
}

inline std::size_t num_heldout_speakers(std::size_t num_speakers) { return (num_speakers + 3) / 4; }

inline Manifest make_manifest(const CorpusSpec& spec) {
  Manifest m;
  m.spec = spec;
  const std::size_t total = spec.num_words_lang_a + spec.num_words_lang_b;
  for (std::size_t w = 0; w < total; ++w) {
    const bool lang_a = w < spec.num_words_lang_a;
    const std::size_t local = lang_a ? w : w - spec.num_words_lang_a;
    char name[32];
    std::snprintf(name, sizeof(name), "%s%03zu", lang_a ? "a" : "b", local);
    m.vocabulary.push_back({static_cast<int>(w), lang_a ? 0 : 1, name});
  }
  const std::size_t held = num_heldout_speakers(spec.num_speakers);
  for (std::size_t s = 0; s < spec.num_speakers; ++s) {
    (s + held < spec.num_speakers ? m.train_speakers : m.heldout_speakers).push_back(static_cast<int>(s));
  }
  return m;
}

namespace detail {

struct SpeakerTransform {
  std::vector<double> gain;
  std::vector<double> bias;
  double warp = 1.0;
};

class CorpusGenerator {
 public:
  explicit CorpusGenerator(const CorpusSpec& spec) : spec_(spec), rng_(spec.seed) {}

  CorpusBundle run() {
    CorpusBundle b;
    b.manifest = make_manifest(spec_);
    const std::size_t dim = spec_.feature_dim;
    const std::size_t num_words = b.manifest.num_words();

    std::vector<std::vector<double>> lang_base(2, std::vector<double>(dim));
    for (auto& base : lang_base)
      for (auto& v : base) v = normal(1.0);

    prototypes_.resize(num_words);
    for (std::size_t w = 0; w < num_words; ++w) {
      const auto& base = lang_base[static_cast<std::size_t>(b.manifest.vocabulary[w].language_id)];
      const std::size_t len = uniform(spec_.word_len_frames.min, spec_.word_len_frames.max);
      std::vector<double> walk(len * dim);
      for (std::size_t k = 0; k < dim; ++k) walk[k] = base[k] + normal(0.5);
      for (std::size_t t = 1; t < len; ++t)
        for (std::size_t k = 0; k < dim; ++k) walk[t * dim + k] = walk[(t - 1) * dim + k] + normal(kStepSigma);
      // 3-frame moving average, truncated at the edges.
      std::vector<double> smooth(len * dim);
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t lo = t > 0 ? t - 1 : 0;
        const std::size_t hi = std::min(len - 1, t + 1);
        for (std::size_t k = 0; k < dim; ++k) {
          double acc = 0.0;
          for (std::size_t u = lo; u <= hi; ++u) acc += walk[u * dim + k];
          smooth[t * dim + k] = acc / static_cast<double>(hi - lo + 1);
        }
      }
      prototypes_[w] = std::move(smooth);
      proto_len_.push_back(len);
    }

    speakers_.resize(spec_.num_speakers);
    for (auto& sp : speakers_) {
      sp.gain.resize(dim);
      sp.bias.resize(dim);
      for (auto& g : sp.gain) g = 1.0 + normal(spec_.speaker_gain_spread);
      for (auto& v : sp.bias) v = normal(spec_.speaker_bias_spread);
      sp.warp = 1.0 + uniform_real(-spec_.time_warp_spread, spec_.time_warp_spread);
    }

    const std::set<int> heldout(b.manifest.heldout_speakers.begin(), b.manifest.heldout_speakers.end());
    for (std::size_t w = 0; w < num_words; ++w) {
      for (std::size_t s = 0; s < spec_.num_speakers; ++s) {
        for (std::size_t i = 0; i < spec_.instances_per_word_per_speaker; ++i) {
          WordInstance inst{static_cast<int>(w), static_cast<int>(s),
                            b.manifest.vocabulary[w].language_id, make_instance(w, s)};
          (heldout.count(static_cast<int>(s)) ? b.template_instances : b.train_instances)
              .push_back(std::move(inst));
        }
      }
    }

    make_utterances(b);
    return b;
  }

 private:
  static constexpr double kStepSigma = 0.35;

  double normal(double sigma) { return sigma * std::normal_distribution<double>(0.0, 1.0)(rng_); }
  double uniform_real(double lo, double hi) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  std::size_t uniform(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  FeatureSequence make_instance(std::size_t w, std::size_t s) {
    const std::size_t dim = spec_.feature_dim;
    const std::size_t len = proto_len_[w];
    const auto& proto = prototypes_[w];
    const auto& sp = speakers_[s];
    const std::size_t out_len =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(len) * sp.warp)));
    FeatureSequence f(out_len, dim);
    for (std::size_t t = 0; t < out_len; ++t) {
      const double src = out_len > 1 ? static_cast<double>(t) * static_cast<double>(len - 1) /
                                           static_cast<double>(out_len - 1)
                                     : 0.0;
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, len - 1);
      const double frac = src - static_cast<double>(i0);
      for (std::size_t k = 0; k < dim; ++k) {
        const double v = (1.0 - frac) * proto[i0 * dim + k] + frac * proto[i1 * dim + k];
        f(t, k) = static_cast<float>(v * sp.gain[k] + sp.bias[k] + normal(spec_.noise_sigma));
      }
    }
    return f;
  }

  void append_silence(std::vector<float>& frames, std::size_t len) {
    for (std::size_t t = 0; t < len * spec_.feature_dim; ++t)
      frames.push_back(static_cast<float>(normal(spec_.noise_sigma)));
  }

  int draw_word(std::vector<int>& deck, std::size_t& pos, int lang, const Manifest& m) {
    if (pos >= deck.size()) {
      deck.clear();
      for (const auto& w : m.vocabulary)
        if (w.language_id == lang) deck.push_back(w.word_id);
      std::shuffle(deck.begin(), deck.end(), rng_);
      pos = 0;
    }
    return deck[pos++];
  }

  // Languages alternate within an utterance; words come from per-language
  // shuffled decks so that every word is used before any repeats.
  void make_utterances(CorpusBundle& b) {
    const auto& held = b.manifest.heldout_speakers;
    std::vector<int> decks[2];
    std::size_t deck_pos[2] = {0, 0};
    for (std::size_t u = 0; u < spec_.num_search_utterances; ++u) {
      const int speaker = held[uniform(0, held.size() - 1)];
      const std::size_t n = uniform(spec_.words_per_utterance.min, spec_.words_per_utterance.max);
      const int first_lang = static_cast<int>(uniform(0, 1));
      std::vector<float> frames;
      std::vector<Occurrence> occ;
      append_silence(frames, uniform(spec_.silence_len_frames.min, spec_.silence_len_frames.max));
      for (std::size_t i = 0; i < n; ++i) {
        const int lang = (first_lang + static_cast<int>(i)) % 2;
        const int word = draw_word(decks[lang], deck_pos[lang], lang, b.manifest);
        FeatureSequence inst = make_instance(static_cast<std::size_t>(word), static_cast<std::size_t>(speaker));
        const std::size_t start = frames.size() / spec_.feature_dim;
        frames.insert(frames.end(), inst.data.begin(), inst.data.end());
        occ.push_back({static_cast<int>(u), word, start, start + inst.num_frames});
        append_silence(frames, uniform(spec_.silence_len_frames.min, spec_.silence_len_frames.max));
      }
      Utterance utt;
      utt.utterance_id = static_cast<int>(u);
      utt.speaker_id = speaker;
      utt.features.num_frames = frames.size() / spec_.feature_dim;
      utt.features.dim = spec_.feature_dim;
      utt.features.data = std::move(frames);
      b.utterances.push_back(std::move(utt));
      b.ground_truth.insert(b.ground_truth.end(), occ.begin(), occ.end());
    }
  }

  CorpusSpec spec_;
  std::mt19937_64 rng_;
  std::vector<std::vector<double>> prototypes_;
  std::vector<std::size_t> proto_len_;
  std::vector<SpeakerTransform> speakers_;
};

}  // namespace detail

inline CorpusBundle synth_corpus(const CorpusSpec& spec) {
  validate(spec);
  return detail::CorpusGenerator(spec).run();
}

// Throws ValidationError describing the first violated bundle invariant.
inline void check_bundle_invariants(const CorpusBundle& b) {
  const auto& m = b.manifest;
  const std::set<int> train_spk(m.train_speakers.begin(), m.train_speakers.end());
  for (const auto& inst : b.train_instances)
    if (!train_spk.count(inst.speaker_id))
      throw ValidationError(str_cat("train instance from non-train speaker ", inst.speaker_id));
  for (const auto& inst : b.template_instances)
    if (train_spk.count(inst.speaker_id))
      throw ValidationError(str_cat("template instance from train speaker ", inst.speaker_id));
  for (const auto& u : b.utterances)
    if (train_spk.count(u.speaker_id))
      throw ValidationError(str_cat("utterance ", u.utterance_id, " from train speaker ", u.speaker_id));
  for (const auto* list : {&b.train_instances, &b.template_instances})
    for (const auto& inst : *list) {
      if (inst.features.empty()) throw ValidationError("word instance with no frames");
      if (m.language_of(inst.word_id) != inst.language_id)
        throw ValidationError(str_cat("word ", inst.word_id, " has inconsistent language_id"));
    }

  std::map<int, std::size_t> utt_len;
  for (const auto& u : b.utterances) utt_len[u.utterance_id] = u.features.num_frames;
  std::map<int, std::size_t> last_end;
  for (const auto& o : b.ground_truth) {
    m.language_of(o.word_id);
    auto it = utt_len.find(o.utterance_id);
    if (it == utt_len.end())
      throw ValidationError(str_cat("occurrence references unknown utterance ", o.utterance_id));
    if (!(o.start_frame < o.end_frame && o.end_frame <= it->second))
      throw ValidationError(str_cat("occurrence [", o.start_frame, ",", o.end_frame,
                                    ") out of bounds in utterance ", o.utterance_id));
    auto& prev = last_end[o.utterance_id];
    if (o.start_frame < prev)
      throw ValidationError(str_cat("overlapping occurrences in utterance ", o.utterance_id));
    prev = o.end_frame;
  }
}

// ---------------------------------------------------------------------------
// Variability-invariant pair sampling.

// Partner lookup: same word, different speaker. Built once per instance list.
class PairSampler {
 public:
  explicit PairSampler(std::span<const WordInstance> instances) : instances_(instances) {
    for (std::size_t i = 0; i < instances.size(); ++i) by_word_[instances[i].word_id].push_back(i);
    for (std::size_t i = 0; i < instances.size(); ++i)
      if (!partners_of(i).empty()) anchors_.push_back(i);
  }

  bool has_partner(std::size_t i) const { return !partners_of(i).empty(); }
  std::size_t num_valid_anchors() const { return anchors_.size(); }

  std::vector<std::size_t> partners_of(std::size_t i) const {
    std::vector<std::size_t> out;
    const auto& same = by_word_.at(instances_[i].word_id);
    for (std::size_t j : same)
      if (instances_[j].speaker_id != instances_[i].speaker_id) out.push_back(j);
    return out;
  }

  template <typename Rng>
  std::size_t partner(std::size_t anchor, Rng& rng) const {
    const auto cands = partners_of(anchor);
    if (cands.empty())
      throw NoPairAvailable(str_cat("word ", instances_[anchor].word_id,
                                    " has no instance from a second speaker"));
    return cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
  }

  template <typename Rng>
  std::pair<std::size_t, std::size_t> sample(Rng& rng) const {
    if (anchors_.empty()) throw NoPairAvailable("no word has instances from two distinct speakers");
    const std::size_t a = anchors_[std::uniform_int_distribution<std::size_t>(0, anchors_.size() - 1)(rng)];
    return {a, partner(a, rng)};
  }

 private:
  std::span<const WordInstance> instances_;
  std::map<int, std::vector<std::size_t>> by_word_;
  std::vector<std::size_t> anchors_;
};

template <typename Rng>
std::pair<WordInstance, WordInstance> sample_vi_pair(std::span<const WordInstance> instances, Rng& rng) {
  const auto [a, p] = PairSampler(instances).sample(rng);
  return {instances[a], instances[p]};
}

// ---------------------------------------------------------------------------
// Manifest persistence: manifest.json plus one AWEF blob per matrix.

inline nlohmann::json to_json(const CorpusSpec& s) {
  return {{"num_words_lang_a", s.num_words_lang_a},
          {"num_words_lang_b", s.num_words_lang_b},
          {"num_speakers", s.num_speakers},
          {"instances_per_word_per_speaker", s.instances_per_word_per_speaker},
          {"feature_dim", s.feature_dim},
          {"word_len_frames", {s.word_len_frames.min, s.word_len_frames.max}},
          {"speaker_gain_spread", s.speaker_gain_spread},
          {"speaker_bias_spread", s.speaker_bias_spread},
          {"noise_sigma", s.noise_sigma},
          {"time_warp_spread", s.time_warp_spread},
          {"num_search_utterances", s.num_search_utterances},
          {"words_per_utterance", {s.words_per_utterance.min, s.words_per_utterance.max}},
          {"silence_len_frames", {s.silence_len_frames.min, s.silence_len_frames.max}},
          {"seed", s.seed}};
}

// Missing keys keep their defaults; used for both manifests and run configs.
inline CorpusSpec corpus_spec_from_json(const nlohmann::json& j, CorpusSpec s = {}) {
  auto range = [&](const char* key, FrameRange& r) {
    if (j.contains(key)) {
      const auto& a = j.at(key);
      if (!a.is_array() || a.size() != 2)
        throw ValidationError(str_cat("CorpusSpec.", key, ": expected [min, max]"));
      r = {a[0].get<std::size_t>(), a[1].get<std::size_t>()};
    }
  };
  auto field = [&](const char* key, auto& v) {
    if (j.contains(key)) v = j.at(key).get<std::decay_t<decltype(v)>>();
  };
  field("num_words_lang_a", s.num_words_lang_a);
  field("num_words_lang_b", s.num_words_lang_b);
  field("num_speakers", s.num_speakers);
  field("instances_per_word_per_speaker", s.instances_per_word_per_speaker);
  field("feature_dim", s.feature_dim);
  range("word_len_frames", s.word_len_frames);
  field("speaker_gain_spread", s.speaker_gain_spread);
  field("speaker_bias_spread", s.speaker_bias_spread);
  field("noise_sigma", s.noise_sigma);
  field("time_warp_spread", s.time_warp_spread);
  field("num_search_utterances", s.num_search_utterances);
  range("words_per_utterance", s.words_per_utterance);
  range("silence_len_frames", s.silence_len_frames);
  field("seed", s.seed);
  return s;
}

namespace detail {

inline nlohmann::json blob_entry(const std::filesystem::path& dir, const std::string& rel,
                                 const FeatureSequence& f) {
  const std::string bytes = encode_awef(f);
  write_file(dir / rel, bytes);
  return {{"blob", rel},
          {"rows", f.num_frames},
          {"cols", f.dim},
          {"crc32", hex32(crc32_of(bytes))},
          {"frame_shift", f.frame_shift},
          {"frame_length", f.frame_length}};
}

inline FeatureSequence load_blob(const std::filesystem::path& dir, const nlohmann::json& e) {
  const std::string rel = e.at("blob").get<std::string>();
  const auto path = dir / rel;
  if (!std::filesystem::exists(path)) throw IoError(str_cat("missing feature blob '", path.string(), "'"));
  const std::string bytes = read_file(path);
  FeatureSequence f = decode_awef(bytes, rel);
  if (hex32(crc32_of(bytes)) != e.at("crc32").get<std::string>())
    throw IntegrityError(str_cat("checksum mismatch for feature blob '", rel, "'"));
  if (f.num_frames != e.at("rows").get<std::size_t>() || f.dim != e.at("cols").get<std::size_t>())
    throw IntegrityError(str_cat("feature blob '", rel, "' shape disagrees with manifest"));
  f.frame_shift = e.at("frame_shift").get<double>();
  f.frame_length = e.at("frame_length").get<double>();
  return f;
}

}  // namespace detail

inline constexpr int kManifestVersion = 1;

inline void save_manifest(const CorpusBundle& b, const std::filesystem::path& dir,
                          const nlohmann::json& provenance = nullptr) {
  std::filesystem::create_directories(dir / "blobs");
  nlohmann::json j;
  j["format"] = "awe-corpus";
  j["version"] = kManifestVersion;
  j["spec"] = to_json(b.manifest.spec);
  j["vocabulary"] = nlohmann::json::array();
  for (const auto& w : b.manifest.vocabulary)
    j["vocabulary"].push_back({{"word_id", w.word_id}, {"language_id", w.language_id}, {"name", w.name}});
  j["train_speakers"] = b.manifest.train_speakers;
  j["heldout_speakers"] = b.manifest.heldout_speakers;

  auto instances = [&](const std::vector<WordInstance>& list, const char* prefix) {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      char rel[64];
      std::snprintf(rel, sizeof(rel), "blobs/%s_%06zu.awef", prefix, i);
      auto e = detail::blob_entry(dir, rel, list[i].features);
      e["word_id"] = list[i].word_id;
      e["speaker_id"] = list[i].speaker_id;
      e["language_id"] = list[i].language_id;
      arr.push_back(std::move(e));
    }
    return arr;
  };
  j["train_instances"] = instances(b.train_instances, "train");
  j["template_instances"] = instances(b.template_instances, "template");
  j["utterances"] = nlohmann::json::array();
  for (std::size_t i = 0; i < b.utterances.size(); ++i) {
    char rel[64];
    std::snprintf(rel, sizeof(rel), "blobs/utt_%06zu.awef", i);
    auto e = detail::blob_entry(dir, rel, b.utterances[i].features);
    e["utterance_id"] = b.utterances[i].utterance_id;
    e["speaker_id"] = b.utterances[i].speaker_id;
    j["utterances"].push_back(std::move(e));
  }
  j["ground_truth"] = nlohmann::json::array();
  for (const auto& o : b.ground_truth)
    j["ground_truth"].push_back({{"utterance_id", o.utterance_id},
                                 {"word_id", o.word_id},
                                 {"start_frame", o.start_frame},
                                 {"end_frame", o.end_frame}});
  if (!provenance.is_null()) j["provenance"] = provenance;
  write_file(dir / "manifest.json", j.dump(1) + "\n");
}

inline CorpusBundle load_manifest(const std::filesystem::path& dir) {
  const auto index_path = dir / "manifest.json";
  if (!std::filesystem::exists(index_path))
    throw IoError(str_cat("missing manifest index '", index_path.string(), "'"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(index_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(str_cat("corrupt manifest index '", index_path.string(), "': ", e.what()));
  }
  try {
    if (j.value("format", "") != "awe-corpus" || j.value("version", 0) != kManifestVersion)
      throw IoError(str_cat("'", index_path.string(), "' is not a version-", kManifestVersion,
                            " corpus manifest"));
    CorpusBundle b;
    b.manifest.spec = corpus_spec_from_json(j.at("spec"));
    for (const auto& w : j.at("vocabulary"))
      b.manifest.vocabulary.push_back(
          {w.at("word_id").get<int>(), w.at("language_id").get<int>(), w.at("name").get<std::string>()});
    b.manifest.train_speakers = j.at("train_speakers").get<std::vector<int>>();
    b.manifest.heldout_speakers = j.at("heldout_speakers").get<std::vector<int>>();
    auto instances = [&](const nlohmann::json& arr) {
      std::vector<WordInstance> out;
      for (const auto& e : arr)
        out.push_back({e.at("word_id").get<int>(), e.at("speaker_id").get<int>(),
                       e.at("language_id").get<int>(), detail::load_blob(dir, e)});
      return out;
    };
    b.train_instances = instances(j.at("train_instances"));
    b.template_instances = instances(j.at("template_instances"));
    for (const auto& e : j.at("utterances"))
      b.utterances.push_back(
          {e.at("utterance_id").get<int>(), e.at("speaker_id").get<int>(), detail::load_blob(dir, e)});
    for (const auto& e : j.at("ground_truth"))
      b.ground_truth.push_back({e.at("utterance_id").get<int>(), e.at("word_id").get<int>(),
                                e.at("start_frame").get<std::size_t>(),
                                e.at("end_frame").get<std::size_t>()});
    check_bundle_invariants(b);
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(str_cat("corrupt manifest index '", index_path.string(), "': ", e.what()));
  }
}

// keyword id -> set of utterance ids containing it at least once.
inline std::map<int, std::set<int>> relevance_from(const std::vector<Occurrence>& ground_truth) {
  std::map<int, std::set<int>> rel;
  for (const auto& o : ground_truth) rel[o.word_id].insert(o.utterance_id);
  return rel;
}

}  // namespace awe
