// Copyright 2026 The BiasProbe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// biasprobe: generate probe manifests, collect completions, classify them and
// emit report tables.
//
//   biasprobe all --experiment anchoring --corpus HumanEval.jsonl.gz
//       --backend synthetic:canonical --seed 7 --out runs/a
//       --sandbox "python3 tests/support/sandbox_runner.py"
//
// Options may also come from a TOML/INI file given with --config; flags on
// the command line take precedence over file values.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "biasprobe/pipeline.h"

namespace {

using biasprobe::RunConfig;

template <typename T, typename ParseFn>
absl::StatusOr<std::vector<T>> ParseList(const std::vector<std::string>& names,
                                         ParseFn parse, absl::string_view what) {
  std::vector<T> out;
  for (const std::string& name : names) {
    std::optional<T> value = parse(name);
    if (!value.has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown ", what, " '", name, "'"));
    }
    out.push_back(*value);
  }
  return out;
}

struct RawFlags {
  std::string corpus;
  std::vector<std::string> experiments;
  std::string backend;
  std::optional<uint64_t> seed;
  std::string out;
  bool resume = false;
  int parallelism = 1;
  double timeout_s = 60;
  std::string sandbox;
  int requests_per_minute = 0;
  double failure_budget = 0.05;
  std::string model_label;
  std::vector<std::string> framing_lines;
  size_t n_min = 0;
  size_t n_max = biasprobe::kMaxAnchorLines;
  std::vector<std::string> anchor_kinds;
  bool no_renamed_control = false;
  std::vector<std::string> placements;
  std::vector<int> percents;
  bool allow_custom_percent = false;
};

absl::StatusOr<RunConfig> BuildConfig(const RawFlags& f) {
  RunConfig c;
  c.corpus = f.corpus;
  for (const std::string& name : f.experiments) {
    if (name == "all") {
      c.experiments.assign(std::begin(biasprobe::kAllExperiments),
                           std::end(biasprobe::kAllExperiments));
      continue;
    }
    std::optional<biasprobe::Experiment> e = biasprobe::ParseExperiment(name);
    if (!e.has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown experiment '", name, "'"));
    }
    if (std::find(c.experiments.begin(), c.experiments.end(), *e) ==
        c.experiments.end()) {
      c.experiments.push_back(*e);
    }
  }
  c.backend_spec = f.backend;
  c.seed = f.seed;
  c.out = f.out;
  c.resume = f.resume;
  c.parallelism = f.parallelism;
  c.request_timeout =
      std::chrono::milliseconds(static_cast<int64_t>(f.timeout_s * 1000));
  c.sandbox_command = f.sandbox;
  c.requests_per_minute = f.requests_per_minute;
  c.max_failure_fraction = f.failure_budget;
  c.model_label = f.model_label;

  biasprobe::ExperimentParams& p = c.params;
  if (!f.framing_lines.empty()) {
    auto lines = ParseList<biasprobe::FramingLine>(
        f.framing_lines, biasprobe::ParseFramingLine, "framing line");
    if (!lines.ok()) return lines.status();
    p.framing_lines = *lines;
  }
  p.min_lines = f.n_min;
  p.max_lines = f.n_max;
  if (!f.anchor_kinds.empty()) {
    auto kinds = ParseList<biasprobe::AnchorKind>(
        f.anchor_kinds, biasprobe::ParseAnchorKind, "anchor kind");
    if (!kinds.ok()) return kinds.status();
    p.anchor_kinds = *kinds;
  }
  p.anchoring_renamed_control = !f.no_renamed_control;
  if (!f.placements.empty()) {
    auto placements = ParseList<biasprobe::NamePlacement>(
        f.placements, biasprobe::ParseNamePlacement, "placement");
    if (!placements.ok()) return placements.status();
    p.placements = *placements;
  }
  if (!f.percents.empty()) p.gpt3_percents = f.percents;
  p.allow_custom_percent = f.allow_custom_percent;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive-bias probes for code and text generation models"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1, 1);
  app.fallthrough();

  RawFlags f;
  app.add_option("--corpus", f.corpus, "Problem corpus (.jsonl or .jsonl.gz)");
  app.add_option("--experiment", f.experiments,
                 "Experiments to process, or 'all'")
      ->delimiter(',');
  app.add_option("--backend", f.backend,
                 "synthetic:<profile>, replay:<path> or http:<model>@<url>");
  app.add_option("--seed", f.seed, "Seed for sampled experiments");
  app.add_option("--out", f.out, "Output directory");
  app.add_flag("--resume", f.resume, "Continue an existing run store");
  app.add_option("--parallelism", f.parallelism,
                 "Concurrent requests and sandbox workers")
      ->check(CLI::PositiveNumber);
  app.add_option("--timeout", f.timeout_s, "Per-request timeout in seconds")
      ->check(CLI::PositiveNumber);
  app.add_option("--sandbox", f.sandbox,
                 "Shell command that starts one sandbox runner");
  app.add_option("--requests-per-minute", f.requests_per_minute,
                 "Request cap; 0 disables it")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--failure-budget", f.failure_budget,
                 "Largest tolerated share of failed requests")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--model-label", f.model_label,
                 "Model column label in framing tables");
  app.add_option("--framing-lines", f.framing_lines, "Framing line keys")
      ->delimiter(',');
  app.add_option("--n-min", f.n_min, "Smallest anchoring prefix length");
  app.add_option("--n-max", f.n_max, "Largest anchoring prefix length");
  app.add_option("--anchor-kinds", f.anchor_kinds, "print_var, add_var")
      ->delimiter(',');
  app.add_flag("--no-renamed-control", f.no_renamed_control,
               "Skip the renamed-anchor control probes");
  app.add_option("--placements", f.placements, "Attribute name placements")
      ->delimiter(',');
  app.add_option("--percents", f.percents, "Anchor offsets in percent")
      ->delimiter(',');
  app.add_flag("--allow-custom-percent", f.allow_custom_percent,
               "Permit offsets other than 20 and 50");

  CLI::App* generate = app.add_subcommand("generate", "Write probe manifests");
  CLI::App* run = app.add_subcommand("run", "Collect completions");
  CLI::App* classify = app.add_subcommand("classify", "Classify completions");
  CLI::App* report = app.add_subcommand("report", "Aggregate report tables");
  CLI::App* all = app.add_subcommand("all", "Run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  absl::StatusOr<RunConfig> config = BuildConfig(f);
  absl::Status status = config.status();
  if (status.ok()) {
    if (generate->parsed()) {
      status = biasprobe::GenerateStage(*config, std::cout);
    } else if (run->parsed()) {
      status = biasprobe::RunStage(*config, std::cout);
    } else if (classify->parsed()) {
      status = biasprobe::ClassifyStage(*config, std::cout);
    } else if (report->parsed()) {
      status = biasprobe::ReportStage(*config, std::cout);
    } else if (all->parsed()) {
      status = biasprobe::AllStages(*config, std::cout);
    }
  }
  if (!status.ok()) {
    std::cerr << "biasprobe: " << status.message() << "\n";
  }
  return biasprobe::ExitCodeFor(status);
}
