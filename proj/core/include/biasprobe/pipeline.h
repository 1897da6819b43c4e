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

// Stage orchestration over an output directory:
//   <out>/manifests/<experiment>.jsonl
//   <out>/completions.jsonl
//   <out>/classifications/<experiment>.jsonl
//   <out>/reports/<experiment>/{<table>.csv, <table>_long.csv, report.json,
//                               summary.json}
// Every stage reads only its declared inputs, so re-running a stage over
// unchanged inputs rewrites identical bytes.

#ifndef BIASPROBE_PIPELINE_H_
#define BIASPROBE_PIPELINE_H_

#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "biasprobe/backends.h"
#include "biasprobe/report.h"
#include "biasprobe/transforms.h"

namespace biasprobe {

struct ExperimentParams {
  std::vector<FramingLine> framing_lines{std::begin(kAllFramingLines),
                                         std::end(kAllFramingLines)};
  size_t min_lines = 0;
  size_t max_lines = kMaxAnchorLines;
  std::vector<AnchorKind> anchor_kinds{AnchorKind::kPrintVar,
                                       AnchorKind::kAddVar};
  bool anchoring_renamed_control = true;
  std::vector<OperationOrder> orders{OperationOrder::kUnaryFirst,
                                     OperationOrder::kBinaryFirst};
  std::vector<PromptStyle> matheq_styles{PromptStyle::kInstructional,
                                         PromptStyle::kNonInstructional};
  std::vector<NamePlacement> placements{std::begin(kAllPlacements),
                                        std::end(kAllPlacements)};
  std::vector<DeletionStyle> deletion_styles{DeletionStyle::kInstructional,
                                             DeletionStyle::kDocstring};
  std::vector<int> gpt3_percents{20, 50};
  bool allow_custom_percent = false;
};

struct RunConfig {
  std::filesystem::path corpus;
  std::vector<Experiment> experiments;
  ExperimentParams params;
  std::optional<uint64_t> seed;
  std::string backend_spec;
  std::filesystem::path out;
  bool resume = false;
  int parallelism = 1;
  int requests_per_minute = 0;
  std::chrono::milliseconds request_timeout{60000};
  // Shell command starting one sandbox runner; empty disables execution.
  std::string sandbox_command;
  // Largest tolerated share of failed requests in a run; beyond it the run
  // stage reports ResourceExhausted.
  double max_failure_fraction = 0.05;
  // Label for the framing table's model column; defaults to the backend id.
  std::string model_label;
};

// Experiments whose generator draws random numbers need a seed.
bool NeedsSeed(Experiment experiment);

// Checks parameter combinations before any stage touches the filesystem.
absl::Status ValidateConfig(const RunConfig& config);

struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path Manifest(Experiment e) const;
  std::filesystem::path Store() const { return root / "completions.jsonl"; }
  std::filesystem::path Classifications(Experiment e) const;
  std::filesystem::path Reports(Experiment e) const;
};

// Anchoring filter counts for n = 0..kMaxAnchorLines.
std::vector<size_t> FilterCounts(std::span<const CodeProblem> problems);

absl::StatusOr<std::vector<TransformedPrompt>> GenerateExperiment(
    Experiment experiment, std::span<const CodeProblem> problems,
    const RunConfig& config);

absl::Status GenerateStage(const RunConfig& config, std::ostream& log);
absl::Status RunStage(const RunConfig& config, std::ostream& log);
absl::Status ClassifyStage(const RunConfig& config, std::ostream& log);
absl::Status ReportStage(const RunConfig& config, std::ostream& log);
absl::Status AllStages(const RunConfig& config, std::ostream& log);

// Process exit code for a stage status: 0 ok, 1 usage or configuration,
// 2 missing inputs, 3 backend failure budget exceeded.
int ExitCodeFor(const absl::Status& status);

}  // namespace biasprobe

#endif  // BIASPROBE_PIPELINE_H_
