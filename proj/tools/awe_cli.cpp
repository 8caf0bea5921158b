// awe/tools/awe_cli.cpp

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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "awe/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> workdir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> system;
  std::optional<std::string> fusion;
  std::optional<std::size_t> templates;
  std::optional<double> alpha;
  std::optional<std::string> softmax;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> epochs;
  std::optional<std::string> wav_dir;
  std::optional<double> frame_length, frame_shift, fmin, fmax, preemphasis;
  std::optional<std::size_t> n_mels;
  std::optional<std::string> window;
  bool dump_traces = false;
};

awe::RunConfig resolve(const Overrides& o) {
  awe::RunConfig c = o.config.empty() ? awe::RunConfig{} : awe::load_run_config(o.config);
  if (o.workdir) c.workdir = *o.workdir;
  if (o.seed) c.set_seed(*o.seed);
  if (o.system) c.system = awe::search_system_from(*o.system);
  if (o.fusion) c.fusion = awe::fusion_from(*o.fusion);
  if (o.templates) c.templates_per_keyword = *o.templates;
  if (o.alpha) c.model.alpha = *o.alpha;
  if (o.softmax) c.model.softmax_mode = awe::softmax_mode_from(*o.softmax);
  if (o.threads) c.threads = *o.threads;
  if (o.epochs) c.model.epochs = *o.epochs;
  if (o.wav_dir) c.wav_dir = awe::fs::path(*o.wav_dir);
  if (o.dump_traces) c.dump_traces = true;
  if (o.frame_length) c.features.frame_length = *o.frame_length;
  if (o.frame_shift) c.features.frame_shift = *o.frame_shift;
  if (o.n_mels) c.features.n_mels = *o.n_mels;
  if (o.fmin) c.features.fmin = *o.fmin;
  if (o.fmax) c.features.fmax = *o.fmax;
  if (o.preemphasis) c.features.preemphasis = *o.preemphasis;
  if (o.window) c.features = awe::fbank_config_from_json({{"window", *o.window}}, c.features);
  awe::validate(c);
  return c;
}

void print_ok(const std::string& command, const awe::fs::path& out) {
  std::cout << nlohmann::json{{"status", "ok"}, {"command", command}, {"output", out.string()}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-by-example spoken term detection with acoustic word embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(awe::kToolVersion));
  Overrides o;

  app.add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--workdir", o.workdir, "Working directory (overrides paths.workdir)");
  app.add_option("--seed", o.seed, "Seed for corpus synthesis and model initialisation");
  app.add_option("--system", o.system, "Search system")->check(CLI::IsMember({"awe", "sdtw"}));
  app.add_option("--fusion", o.fusion, "Template fusion for sdtw")->check(CLI::IsMember({"none", "dtw"}));
  app.add_option("--templates-per-keyword", o.templates, "Templates per keyword")->check(CLI::PositiveNumber);
  app.add_option("--alpha", o.alpha, "Weight of the variability-invariant loss");
  app.add_option("--softmax", o.softmax, "Output layer normalisation")->check(CLI::IsMember({"one", "block"}));
  app.add_option("--threads", o.threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--epochs", o.epochs, "Training epochs");

  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  auto* featurize = app.add_subcommand("featurize", "Compute log Mel filterbanks for a directory of wav files");
  featurize->add_option("--wav-dir", o.wav_dir, "Directory of PCM16 mono wav files");
  featurize->add_option("--frame-length", o.frame_length, "Analysis frame length in seconds");
  featurize->add_option("--frame-shift", o.frame_shift, "Frame shift in seconds");
  featurize->add_option("--n-mels", o.n_mels, "Number of Mel bands");
  featurize->add_option("--fmin", o.fmin, "Lowest filter edge in Hz");
  featurize->add_option("--fmax", o.fmax, "Highest filter edge in Hz (default: Nyquist)");
  featurize->add_option("--preemphasis", o.preemphasis, "Pre-emphasis coefficient");
  featurize->add_option("--window", o.window, "Analysis window")->check(CLI::IsMember({"hamming", "hann"}));
  auto* train = app.add_subcommand("train", "Train the embedding network");
  auto* embed = app.add_subcommand("embed", "Embed keyword templates");
  auto* search = app.add_subcommand("search", "Rank search utterances for every keyword");
  search->add_flag("--dump-traces", o.dump_traces, "Also write per-utterance cost traces");
  auto* eval = app.add_subcommand("eval", "Score search results");

  CLI11_PARSE(app, argc, argv);

  std::string command = app.get_subcommands().front()->get_name();
  try {
    const awe::RunConfig c = resolve(o);
    if (synth->parsed()) {
      print_ok(command, awe::cmd_synth(c));
    } else if (featurize->parsed()) {
      print_ok(command, awe::cmd_featurize(c));
    } else if (train->parsed()) {
      const auto out = awe::cmd_train(c, [](const awe::EpochStats& e) {
        std::fprintf(stderr, "epoch %3zu  loss %.4f  ce %.4f  mse %.4f  acc %.3f  lr %.4g\n", e.epoch,
                     e.total_loss, e.ce_loss, e.mse_loss, e.accuracy, e.lr);
      });
      print_ok(command, out);
    } else if (embed->parsed()) {
      print_ok(command, awe::cmd_embed(c));
    } else if (search->parsed()) {
      print_ok(command, awe::cmd_search(c));
    } else if (eval->parsed()) {
      awe::fs::path out;
      const awe::MetricsReport rep = awe::cmd_eval(c, &out);
      std::cerr << awe::render_table(rep);
      print_ok(command, out);
    }
  } catch (const awe::Error& e) {
    std::cout << nlohmann::json{{"status", "error"}, {"command", command}, {"kind", e.kind()}, {"message", e.what()}}
                     .dump()
              << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cout << nlohmann::json{{"status", "error"}, {"command", command}, {"kind", "internal"}, {"message", e.what()}}
                     .dump()
              << '\n';
    return 3;
  }
  return 0;
}
