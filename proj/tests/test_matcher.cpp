// awe/tests/test_matcher.cpp

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

#include <algorithm>
#include <cmath>

#include "awe/matcher.hpp"
#include "awe/ranking.hpp"
#include "test_support.hpp"

namespace awe {
namespace {

using testing::random_sequence;
using testing::TempDir;
using testing::tiny_model;

const tk::BlockLayout kLayout{{{0, 2}, {2, 4}}};

// Eight-frame windows keep the tiny network fast.
WindowConfig small_window(std::size_t stride = 2, std::size_t sma_len = 5) {
  return WindowConfig{0.08, stride, sma_len};
}

std::vector<std::size_t> starts_of(const std::vector<Window>& ws) {
  std::vector<std::size_t> s;
  for (const auto& w : ws) s.push_back(w.start_frame);
  return s;
}

// -------------------------------------------------------------- windows

TEST(WindowSegments, EightyFramesGiveSixteenWindows) {
  const auto ws = window_segments(FeatureSequence(80, 3, 1.0f), WindowConfig{});
  ASSERT_EQ(ws.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(ws[i].start_frame, 5 * i);
    EXPECT_EQ(ws[i].features.num_frames, 80u);
  }
  // The last window holds 5 real frames then zero padding.
  EXPECT_EQ(ws.back().features(4, 0), 1.0f);
  EXPECT_EQ(ws.back().features(5, 0), 0.0f);
}

TEST(WindowSegments, ShortInputIsPaddedEverywhere) {
  std::mt19937_64 rng(1);
  const FeatureSequence seq = random_sequence(12, 2, rng);
  const auto ws = window_segments(seq, WindowConfig{});
  EXPECT_EQ(starts_of(ws), (std::vector<std::size_t>{0, 5, 10}));
  for (const auto& w : ws) {
    EXPECT_EQ(w.features.num_frames, 80u);
    EXPECT_EQ(w.features, pad_or_clip(seq.slice(w.start_frame, 12), 80));
  }
}

TEST(WindowSegments, StrideEqualToLengthGivesOneWindow) {
  const auto ws = window_segments(FeatureSequence(37, 2, 1.0f), WindowConfig{0.8, 37, 5});
  ASSERT_EQ(ws.size(), 1u);
  EXPECT_EQ(ws[0].start_frame, 0u);
}

TEST(WindowSegments, EmptySequenceAndBadConfig) {
  EXPECT_THROW(window_segments(FeatureSequence(0, 2), WindowConfig{}), ValidationError);
  EXPECT_THROW(window_segments(FeatureSequence(5, 2), WindowConfig{0.8, 0, 5}), ValidationError);
  EXPECT_THROW(window_segments(FeatureSequence(5, 2), WindowConfig{0.0, 5, 5}), ValidationError);
  EXPECT_THROW(window_segments(FeatureSequence(5, 2), WindowConfig{0.001, 5, 5}), ValidationError);
  EXPECT_EQ(window_frames(WindowConfig{}, 0.010), 80u);
}

// ---------------------------------------------------------------- costs

TEST(CosineCost, HandExamples) {
  const Embedding x{1, 0};
  const std::vector<Embedding> ys{{0, 1}, {1, 0}};
  const CostTrace c = cosine_cost(x, ys);
  EXPECT_EQ(c.trace, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(c.min_cost, 0.0);
  EXPECT_EQ(c.argmin, 1u);  // second position
  EXPECT_FALSE(c.zero_norm_warning);

  const Embedding a{1, 1}, b{1, 0};
  EXPECT_NEAR(cosine_distance(a, b), 1 - 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cosine_distance(a, b), 0.29289, 1e-5);
  const Embedding v{0.3f, -2.0f, 5.5f};
  EXPECT_NEAR(cosine_distance(v, v), 0.0, 1e-12);
  const Embedding neg{-0.3f, 2.0f, -5.5f};
  EXPECT_NEAR(cosine_distance(v, neg), 2.0, 1e-12);
}

TEST(CosineCost, ZeroNormIsOneWithWarning) {
  const Embedding x{1, 2};
  const std::vector<Embedding> ys{{0, 0}, {2, 4}};
  const CostTrace c = cosine_cost(x, ys);
  EXPECT_EQ(c.trace[0], 1.0);
  EXPECT_TRUE(c.zero_norm_warning);
  EXPECT_EQ(c.argmin, 1u);
}

TEST(CosineCost, ErrorsOnEmptyAndMismatch) {
  const Embedding x{1, 2};
  EXPECT_THROW(cosine_cost(x, std::vector<Embedding>{}), ValidationError);
  EXPECT_THROW(cosine_cost(x, std::vector<Embedding>{{1, 2, 3}}), ShapeError);
}

TEST(CosineCost, InvariantToPositiveScaling) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1, 1);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int trial = 0; trial < 1000; ++trial) {
    Embedding x(16), y(16);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    const double base = cosine_distance(x, y);
    ASSERT_GE(base, 0.0);
    ASSERT_LE(base, 2.0);
    const float c = scale(rng);
    Embedding cx = x;
    for (auto& v : cx) v *= c;
    ASSERT_NEAR(cosine_distance(cx, y), base, 1e-6);
    ASSERT_NEAR(cosine_distance(y, cx), base, 1e-6);
  }
}

// ------------------------------------------------------------------ SMA

TEST(Sma, HandExamples) {
  const std::vector<double> t{0, 1, 0, 1};
  EXPECT_EQ(sma(t, 2), (std::vector<double>{0, 0.5, 0.5, 0.5}));
  EXPECT_EQ(sma(t, 1), t);
  const std::vector<double> c(7, 0.375);
  EXPECT_EQ(sma(c, 3), c);
  EXPECT_EQ(sma(t, 10), (std::vector<double>{0, 0.5, 1.0 / 3, 0.5}));
  EXPECT_THROW(sma(t, 0), ValidationError);
}

TEST(Sma, NeverExtendsTheRange) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> t(1 + trial % 40);
    for (auto& v : t) v = u(rng);
    const auto s = sma(t, 1 + static_cast<std::size_t>(trial) % 7);
    ASSERT_EQ(s.size(), t.size());
    ASSERT_LE(*std::min_element(t.begin(), t.end()), *std::min_element(s.begin(), s.end()) + 1e-15);
    ASSERT_GE(*std::max_element(t.begin(), t.end()) + 1e-15, *std::max_element(s.begin(), s.end()));
  }
}

// --------------------------------------------------------------- fusion

TEST(FuseTemplatesMean, HandExamples) {
  const std::vector<Embedding> one{{0.25f, -3.0f}};
  EXPECT_EQ(fuse_templates_mean(one), one[0]);
  const std::vector<Embedding> two{{1, 0}, {0, 1}};
  EXPECT_EQ(fuse_templates_mean(two), (Embedding{0.5f, 0.5f}));
  EXPECT_THROW(fuse_templates_mean(std::vector<Embedding>{}), ValidationError);
  EXPECT_THROW(fuse_templates_mean(std::vector<Embedding>{{1, 2}, {1}}), ShapeError);
}

TEST(FuseTemplatesMean, PermutationInvariantAndExactMean) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<Embedding> embs(10, Embedding(32));
  for (auto& e : embs)
    for (auto& v : e) v = u(rng);
  const Embedding fused = fuse_templates_mean(embs);
  for (std::size_t k = 0; k < 32; ++k) {
    double acc = 0;
    for (const auto& e : embs) acc += e[k];
    EXPECT_EQ(fused[k], static_cast<float>(acc / 10.0));
  }
  for (int p = 0; p < 20; ++p) {
    std::shuffle(embs.begin(), embs.end(), rng);
    EXPECT_EQ(fuse_templates_mean(embs), fused);
  }
}

// --------------------------------------------------------------- search

class SearchTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = tiny_model(kLayout);
    params_ = build_network(cfg_);
  }
  KeywordQuery query(int id, const std::vector<FeatureSequence>& templates, const WindowConfig& w) const {
    return make_query(id, std::span<const FeatureSequence>(templates), params_, cfg_, w);
  }
  ModelConfig cfg_;
  NetworkParams<float> params_;
};

TEST_F(SearchTest, PlantedWindowAtTheStartScoresZero) {
  std::mt19937_64 rng(5);
  const WindowConfig w = small_window();
  std::vector<Utterance> utts;
  for (int u = 0; u < 4; ++u) utts.push_back({u, 0, random_sequence(30, 8, rng)});
  const std::vector<FeatureSequence> tmpl{utts[2].features.slice(0, 8)};
  const std::vector<KeywordQuery> qs{query(9, tmpl, w)};
  const SearchOutput out = search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(utts), params_, cfg_, w);
  ASSERT_EQ(out.rankings.size(), 1u);
  const RankedList& r = out.rankings[0];
  EXPECT_EQ(r.keyword_id, 9);
  EXPECT_EQ(r.entries.size(), 4u);
  EXPECT_EQ(r.entries[0].utterance_id, 2);
  EXPECT_LE(r.entries[0].score, 1e-5);
  EXPECT_EQ(r.entries[0].best_start, 0u);
  EXPECT_TRUE(is_canonical(r));
}

TEST_F(SearchTest, PlantedWindowMidUtteranceWithoutSmoothing) {
  std::mt19937_64 rng(6);
  const WindowConfig w = small_window(2, 1);
  std::vector<Utterance> utts;
  for (int u = 0; u < 3; ++u) utts.push_back({u, 0, random_sequence(40, 8, rng)});
  const std::vector<FeatureSequence> tmpl{utts[1].features.slice(12, 20)};
  const std::vector<KeywordQuery> qs{query(0, tmpl, w)};
  const SearchOutput out = search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(utts), params_, cfg_, w);
  EXPECT_EQ(out.rankings[0].entries[0].utterance_id, 1);
  EXPECT_LE(out.rankings[0].entries[0].score, 1e-5);
  EXPECT_EQ(out.rankings[0].entries[0].best_start, 12u);
}

TEST_F(SearchTest, IdenticalUtterancesTieByIdAndThreadsDoNotMatter) {
  std::mt19937_64 rng(7);
  const WindowConfig w = small_window();
  const FeatureSequence same = random_sequence(25, 8, rng);
  std::vector<Utterance> utts{{5, 0, same}, {2, 0, same}, {7, 1, random_sequence(19, 8, rng)}};
  const std::vector<FeatureSequence> tmpl{random_sequence(6, 8, rng), random_sequence(11, 8, rng)};
  const std::vector<KeywordQuery> qs{query(0, tmpl, w), query(1, {random_sequence(8, 8, rng)}, w)};
  const SearchOutput one = search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(utts), params_, cfg_, w, 1);
  const SearchOutput three = search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(utts), params_, cfg_, w, 3);
  EXPECT_EQ(one.rankings, three.rankings);
  for (const auto& list : one.rankings) {
    std::vector<int> order;
    for (const auto& e : list.entries) order.push_back(e.utterance_id);
    const auto p2 = std::find(order.begin(), order.end(), 2);
    ASSERT_NE(p2 + 1, order.end());
    EXPECT_EQ(*(p2 + 1), 5);
    EXPECT_EQ(list.entries[static_cast<std::size_t>(p2 - order.begin())].score,
              list.entries[static_cast<std::size_t>(p2 - order.begin()) + 1].score);
  }
}

TEST_F(SearchTest, TracesHaveOneCostPerWindow) {
  std::mt19937_64 rng(8);
  const WindowConfig w = small_window(3, 4);
  std::vector<Utterance> utts{{0, 0, random_sequence(17, 8, rng)}, {1, 0, random_sequence(4, 8, rng)}};
  const std::vector<KeywordQuery> qs{query(3, {random_sequence(9, 8, rng)}, w)};
  const SearchOutput out = search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(utts), params_, cfg_, w);
  ASSERT_EQ(out.traces.size(), 2u);
  for (const auto& t : out.traces) {
    const auto& u = utts[static_cast<std::size_t>(t.utterance_id)];
    EXPECT_EQ(t.starts, starts_of(window_segments(u.features, w)));
    EXPECT_EQ(t.costs.size(), t.starts.size());
    EXPECT_EQ(t.smoothed, sma(t.costs, 4));
    for (double c : t.costs) {
      EXPECT_TRUE(std::isfinite(c));
      EXPECT_GE(c, 0.0);
      EXPECT_LE(c, 2.0);
    }
  }
  const std::string blob = encode_traces(out.traces);
  EXPECT_EQ(blob.substr(0, 4), "AWET");
  // header + per trace (3 ids + n * 3 values) * 4 bytes
  EXPECT_EQ(blob.size(), 12u + 4 * (3 + 3 * 6) + 4 * (3 + 3 * 2));
}

TEST_F(SearchTest, AppendingAnExactMatchNeverRaisesTheScore) {
  std::mt19937_64 rng(9);
  const WindowConfig w = small_window(2, 1);
  const FeatureSequence tmpl = random_sequence(8, 8, rng);
  const std::vector<KeywordQuery> qs{query(0, {tmpl}, w)};
  for (int trial = 0; trial < 5; ++trial) {
    FeatureSequence base = random_sequence(2 * (3 + static_cast<std::size_t>(trial)), 8, rng);
    FeatureSequence longer(base.num_frames + tmpl.num_frames, 8);
    std::copy(base.data.begin(), base.data.end(), longer.data.begin());
    std::copy(tmpl.data.begin(), tmpl.data.end(), longer.data.begin() + static_cast<std::ptrdiff_t>(base.data.size()));
    const std::vector<Utterance> a{{0, 0, base}}, b{{0, 0, longer}};
    const double before =
        search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(a), params_, cfg_, w).rankings[0].entries[0].score;
    const double after =
        search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(b), params_, cfg_, w).rankings[0].entries[0].score;
    EXPECT_LE(after, before);
    EXPECT_LE(after, 1e-5);
  }
}

TEST_F(SearchTest, QueryTemplatesArePaddedToTheWindowAndFusedByMean) {
  std::mt19937_64 rng(10);
  const WindowConfig w = small_window();
  const std::vector<FeatureSequence> tmpl{random_sequence(5, 8, rng), random_sequence(8, 8, rng),
                                          random_sequence(13, 8, rng)};
  const KeywordQuery q = query(4, tmpl, w);
  ASSERT_EQ(q.templates.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(q.templates[i], extract_embedding(params_, cfg_, pad_or_clip(tmpl[i], 8)));
  EXPECT_EQ(q.fused, fuse_templates_mean(q.templates));
  EXPECT_THROW(query(4, {}, w), ValidationError);
}

TEST_F(SearchTest, RejectsQueryFromADifferentModelWidth) {
  KeywordQuery q;
  q.templates = {Embedding(3, 1.0f)};
  q.fused = Embedding(3, 1.0f);
  const std::vector<KeywordQuery> qs{q};
  const std::vector<Utterance> utts{{0, 0, FeatureSequence(10, 8, 1.0f)}};
  EXPECT_THROW(search(std::span<const KeywordQuery>(qs), std::span<const Utterance>(utts), params_, cfg_, small_window()),
               ShapeError);
}

// ---------------------------------------------------------- results file

TEST(ResultsFile, RoundTripPreservesScoresExactly) {
  TempDir dir;
  std::vector<RankedList> r{{3, {{1, 0.1, 5}, {0, 1.0 / 3.0, 0}}}, {1, {{0, 2e-17, 10}, {1, 1.5, 20}}}};
  write_results(dir / "r.jsonl", "awe", r, nlohmann::json{{"config_hash", "abcd"}});
  const ResultsFile rf = read_results(dir / "r.jsonl");
  EXPECT_EQ(rf.system, "awe");
  EXPECT_EQ(rf.meta.at("provenance").at("config_hash"), "abcd");
  ASSERT_EQ(rf.rankings.size(), 2u);
  EXPECT_EQ(rf.rankings[0], r[1]);
  EXPECT_EQ(rf.rankings[1], r[0]);
  const std::string text = read_file(dir / "r.jsonl");
  EXPECT_NE(text.find("\"rank\":2"), std::string::npos);
}

TEST(ResultsFile, MissingOrCorruptIsIoError) {
  TempDir dir;
  EXPECT_THROW(read_results(dir / "none.jsonl"), IoError);
  write_file(dir / "bad.jsonl", "{\"type\":\"meta\",\"system\":\"awe\"}\n{\"type\":\"result\"\n");
  EXPECT_THROW(read_results(dir / "bad.jsonl"), IoError);
}

TEST(RankedList, CanonicalOrderBreaksTiesById) {
  RankedList l{0, {{4, 0.5, 0}, {1, 0.5, 0}, {3, 0.2, 0}}};
  EXPECT_FALSE(is_canonical(l));
  sort_canonical(l);
  EXPECT_EQ(l.entries[0].utterance_id, 3);
  EXPECT_EQ(l.entries[1].utterance_id, 1);
  EXPECT_EQ(l.entries[2].utterance_id, 4);
}

}  // namespace
}  // namespace awe
